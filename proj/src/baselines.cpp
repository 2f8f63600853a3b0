#include "ada/baselines.hpp"

#include "ada/iada.hpp"

#include <algorithm>
#include <cmath>

namespace ada {

void BaselineParams::validate() const {
  if (!(beta > 0.0)) throw ParameterError("beta must be positive");
  if (!(gamma_damp > 0.0)) throw ParameterError("gamma_damp must be positive");
  for (double t : prox_weights) {
    if (!(t > 0.0)) throw ParameterError("proximal weights must be positive");
  }
  if (!(stop_eps > 0.0)) throw ParameterError("stop_eps must be positive");
}

namespace {

double block_norm_sq(const CouplingMatrix& E) {
  if (const auto g = E.gram_scale()) return *g;
  const double n = spectral_norm(E.to_dense());
  return n * n;
}

StepMetrics primal_metrics(std::size_t iter, const BlockVecs& x_prev,
                           const BlockVecs& x_next, const Problem& problem) {
  StepMetrics met;
  met.iter = iter;
  const Vec r = constraint_residual(x_next, problem);
  met.objective = objective(x_next, problem);
  met.constraint_residual_norm = r.norm();
  met.x_rel_change = std::sqrt(squared_norm(difference(x_prev, x_next))) /
                     std::max(1.0, std::sqrt(squared_norm(x_prev)));
  met.feas_rel = met.constraint_residual_norm / std::max(1.0, problem.q().norm());
  met.per_block_cert.assign(problem.num_blocks(), 0.0);
  met.inner_iters.assign(problem.num_blocks(), 0);
  met.thresholds.assign(problem.num_blocks(), 0.0);
  return met;
}

template <class State, class Step, class Multiplier>
BaselineResult run_loop(State state, std::size_t max_iters, double eps,
                        const BaselineRunOptions& options, Step&& step,
                        Multiplier&& multiplier) {
  BaselineResult res;
  auto primal = [](const State& s) -> BlockVecs {
    if constexpr (requires { s.z; }) {
      return BlockVecs{s.x, s.z};
    } else {
      return s.x;
    }
  };
  if (options.observer) options.observer(0, primal(state), multiplier(state));
  res.status = RunStatus::max_iters_reached;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    auto [next, met] = step(state, it);
    state = std::move(next);
    res.trace.push_back(std::move(met));
    if (options.observer) options.observer(it, primal(state), multiplier(state));
    if (check_stop(res.trace.back(), eps, options.stop_mode)) {
      res.status = RunStatus::converged;
      break;
    }
  }
  res.x = primal(state);
  res.multiplier = multiplier(state);
  return res;
}

}  // namespace

std::vector<double> default_prox_weights(const Problem& problem, double beta,
                                         double gamma_damp) {
  if (!(gamma_damp > 0.0 && gamma_damp < 2.0)) {
    throw ParameterError("Prox-JADMM damping must lie in (0, 2)");
  }
  const double K = static_cast<double>(problem.num_blocks());
  std::vector<double> taus;
  for (const auto& b : problem.blocks()) {
    taus.push_back(beta * (K / (2.0 - gamma_damp) - 1.0) * block_norm_sq(b.E) + 0.1);
  }
  return taus;
}

// ---------------------------------------------------------------------------
// VSADMM

VsadmmState VsadmmState::zeros(const Problem& problem) {
  const IterateState z = IterateState::zeros(problem);
  return {z.w, z.x, z.y};
}

std::vector<BlockSolverPtr> vsadmm_solvers(const Problem& problem, double beta,
                                           InnerSolverOptions opts) {
  return make_block_solvers(problem, beta, 0.0, opts);
}

std::pair<VsadmmState, StepMetrics> vsadmm_step(const VsadmmState& state,
                                                const Problem& problem,
                                                const BaselineParams& params,
                                                std::span<const BlockSolverPtr> solvers) {
  const std::size_t K = problem.num_blocks();
  if (solvers.size() != K) throw DimensionError("need one solver per block");
  const double beta = params.beta;

  VsadmmState next;
  next.x.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    BlockSubproblem sub;
    sub.block = &problem.block(k);
    sub.alpha = beta;
    sub.target = state.w[k] - state.y[k] / beta;
    if (problem.carries_q(k)) sub.target += problem.q();
    sub.mu = 0.0;
    sub.anchor = state.x[k];
    try {
      next.x[k] = solvers[k]->solve(sub, state.x[k], SolveTolerance{}).x;
    } catch (const std::exception& e) {
      throw BlockFailure(k, e.what());
    }
  }

  // w = argmin_{w in W} sum ||E_k x_k - w_k + y_k / beta||^2 = P_W(v)
  BlockVecs Ex(K);
  BlockVecs v(K);
  for (std::size_t k = 0; k < K; ++k) {
    Ex[k] = problem.block(k).E.apply(next.x[k]);
    if (problem.carries_q(k)) Ex[k] -= problem.q();
    v[k] = Ex[k] + state.y[k] / beta;
  }
  next.w = project_onto_W(v);
  next.y.resize(K);
  for (std::size_t k = 0; k < K; ++k) next.y[k] = state.y[k] + beta * (Ex[k] - next.w[k]);

  StepMetrics met = primal_metrics(0, state.x, next.x, problem);
  met.delta_g_norm_sq = beta * squared_norm(difference(state.w, next.w)) +
                        squared_norm(difference(state.x, next.x)) +
                        squared_norm(difference(state.y, next.y)) / beta;
  return {std::move(next), std::move(met)};
}

BaselineResult run_vsadmm(const Problem& problem, const BaselineParams& params,
                          std::span<const BlockSolverPtr> solvers,
                          const BaselineRunOptions& options) {
  params.validate();
  return run_loop(
      VsadmmState::zeros(problem), params.max_iters, params.stop_eps, options,
      [&](const VsadmmState& s, std::size_t it) {
        auto out = vsadmm_step(s, problem, params, solvers);
        out.second.iter = it;
        return out;
      },
      [](const VsadmmState& s) { return s.multiplier(); });
}

// ---------------------------------------------------------------------------
// Prox-JADMM

ProxJadmmState ProxJadmmState::zeros(const Problem& problem) {
  ProxJadmmState s;
  for (const auto& b : problem.blocks()) s.x.push_back(Vec::Zero(b.n));
  s.lambda = Vec::Zero(problem.m());
  return s;
}

std::vector<BlockSolverPtr> prox_jadmm_solvers(const Problem& problem,
                                               const BaselineParams& params,
                                               InnerSolverOptions opts) {
  const auto taus = params.prox_weights.empty()
                        ? default_prox_weights(problem, params.beta, params.gamma_damp)
                        : params.prox_weights;
  return make_block_solvers(problem, params.beta, taus, opts);
}

std::pair<ProxJadmmState, StepMetrics> prox_jadmm_step(
    const ProxJadmmState& state, const Problem& problem, const BaselineParams& params,
    std::span<const BlockSolverPtr> solvers) {
  const std::size_t K = problem.num_blocks();
  if (solvers.size() != K) throw DimensionError("need one solver per block");
  const double beta = params.beta;
  const auto taus = params.prox_weights.empty()
                        ? default_prox_weights(problem, beta, params.gamma_damp)
                        : params.prox_weights;
  if (taus.size() != K) throw DimensionError("need one proximal weight per block");

  BlockVecs Ex(K);
  Vec Ex_sum = Vec::Zero(problem.m());
  for (std::size_t k = 0; k < K; ++k) {
    Ex[k] = problem.block(k).E.apply(state.x[k]);
    Ex_sum += Ex[k];
  }

  ProxJadmmState next;
  next.x.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    // ||E_k x_k + sum_{j != k} E_j x_j - q - lambda/beta||^2
    BlockSubproblem sub;
    sub.block = &problem.block(k);
    sub.alpha = beta;
    sub.target = problem.q() + state.lambda / beta - (Ex_sum - Ex[k]);
    sub.mu = taus[k];
    sub.anchor = state.x[k];
    try {
      next.x[k] = solvers[k]->solve(sub, state.x[k], SolveTolerance{}).x;
    } catch (const std::exception& e) {
      throw BlockFailure(k, e.what());
    }
  }
  const Vec r = constraint_residual(next.x, problem);
  next.lambda = state.lambda - params.gamma_damp * beta * r;

  StepMetrics met = primal_metrics(0, state.x, next.x, problem);
  met.delta_g_norm_sq = squared_norm(difference(state.x, next.x)) +
                        (state.lambda - next.lambda).squaredNorm() / beta;
  return {std::move(next), std::move(met)};
}

BaselineResult run_prox_jadmm(const Problem& problem, const BaselineParams& params,
                              std::span<const BlockSolverPtr> solvers,
                              const BaselineRunOptions& options) {
  params.validate();
  return run_loop(
      ProxJadmmState::zeros(problem), params.max_iters, params.stop_eps, options,
      [&](const ProxJadmmState& s, std::size_t it) {
        auto out = prox_jadmm_step(s, problem, params, solvers);
        out.second.iter = it;
        return out;
      },
      [](const ProxJadmmState& s) { return s.multiplier(); });
}

// ---------------------------------------------------------------------------
// Two-block lasso ADMM

namespace {

const SmoothPart& lasso_smooth(const Problem& p) {
  if (p.num_blocks() != 2) throw ParameterError("two-block ADMM needs a 2-block problem");
  const auto& b1 = p.block(0);
  const auto& b2 = p.block(1);
  const bool ok =
      b1.objective.smooth && b1.objective.smooth->loss == SmoothLoss::least_squares &&
      !b1.objective.l1 && !b1.box && b1.E.kind() == CouplingMatrix::Kind::identity &&
      b1.E.scale() == 1.0 && !b2.objective.smooth && b2.objective.l1 && !b2.box &&
      b2.E.kind() == CouplingMatrix::Kind::identity && b2.E.scale() == -1.0 &&
      p.q().isZero(0.0);
  if (!ok) throw ParameterError("problem is not the two-block lasso splitting x - z = 0");
  return *b1.objective.smooth;
}

}  // namespace

Admm2Lasso::Admm2Lasso(const Problem& problem, double beta)
    : problem_(&problem),
      beta_(beta),
      chol_(lasso_smooth(problem).A, lasso_smooth(problem).data, beta),
      l1_(*problem.block(1).objective.l1) {}

Admm2State Admm2Lasso::zeros() const {
  const Index d = problem_->block(0).n;
  return {Vec::Zero(d), Vec::Zero(d), Vec::Zero(d)};
}

std::pair<Admm2State, StepMetrics> Admm2Lasso::step(const Admm2State& s,
                                                    const BaselineParams& params) const {
  if (std::abs(params.beta - beta_) > 1e-14 * std::max(1.0, beta_)) {
    throw ParameterError("ADMM factorization was built for a different beta");
  }
  Admm2State n;
  n.x = chol_.solve(chol_.At_b() + beta_ * (s.z - s.u));
  const Vec v = n.x + s.u;
  n.z.resize(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    n.z[i] = soft_threshold(v[i], l1_.lambda * l1_.weight(i) / beta_);
  }
  n.u = s.u + params.admm_step * (n.x - n.z);

  StepMetrics met = primal_metrics(0, {s.x, s.z}, {n.x, n.z}, *problem_);
  met.delta_g_norm_sq = (n.x - s.x).squaredNorm() + (n.z - s.z).squaredNorm() +
                        beta_ * (n.u - s.u).squaredNorm();
  return {std::move(n), std::move(met)};
}

BaselineResult Admm2Lasso::run(const BaselineParams& params,
                               const BaselineRunOptions& options) const {
  params.validate();
  const double beta = beta_;
  return run_loop(
      zeros(), params.max_iters, params.stop_eps, options,
      [&](const Admm2State& s, std::size_t it) {
        auto out = step(s, params);
        out.second.iter = it;
        return out;
      },
      [beta](const Admm2State& s) { return s.multiplier(beta); });
}

}  // namespace ada
