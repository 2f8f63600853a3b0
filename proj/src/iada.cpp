#include "ada/iada.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ada {

void InexactSchedule::validate() const {
  if (kind == Kind::exact) return;
  if (!(eps0 > 0.0)) throw ParameterError("eps0 must be positive");
  if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
  if (!(E_norm > 0.0)) throw ParameterError("||E|| must be positive");
}

double InexactSchedule::eps(std::size_t nu) const {
  if (nu < 1) throw ParameterError("iteration index starts at 1");
  return eps0 / std::pow(static_cast<double>(nu), gamma);
}

double criterion_A_threshold(std::size_t nu, const InexactSchedule& schedule,
                             double rho, double c, std::size_t K) {
  if (!(rho > 0.0) || !(c > 0.0) || K < 1) {
    throw ParameterError("threshold needs rho > 0, c > 0 and K >= 1");
  }
  if (!(schedule.eps0 > 0.0) || !(schedule.gamma > 0.0) || !(schedule.E_norm > 0.0)) {
    throw ParameterError("threshold needs eps0, gamma and ||E|| positive");
  }
  const double En = schedule.E_norm;
  return schedule.eps(nu) / (c * static_cast<double>(K) * (rho * En + En + 1.0));
}

double criterion_B_threshold(std::size_t nu, const InexactSchedule& schedule,
                             double rho, double c, std::size_t K,
                             double x_step_norm) {
  if (x_step_norm < 0.0) throw ParameterError("step norm must be nonnegative");
  return criterion_A_threshold(nu, schedule, rho, c, K) * std::min(1.0, x_step_norm);
}

namespace {

Vec power_start(Index n) {
  // deterministic, not orthogonal to any coordinate direction
  Vec v(n);
  for (Index i = 0; i < n; ++i) {
    v[i] = 1.0 + std::fmod(0.6180339887498949 * static_cast<double>(i + 1), 1.0);
  }
  return v.normalized();
}

// Power iteration on a symmetric PSD operator; returns the top eigenvalue.
template <class Apply>
double top_eigenvalue(Index n, Apply&& apply, const PowerIterationOptions& opts) {
  Vec v = power_start(n);
  double lambda = 0.0;
  double prev = 0.0;
  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    Vec w = apply(v);
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    prev = lambda;
    lambda = v.dot(w);
    v = w / wn;
    if (it > 0 && std::abs(lambda - prev) <= opts.rel_tol * lambda) return lambda;
  }
  throw SpectralNormError(std::sqrt(std::max(0.0, std::min(prev, lambda))),
                          std::sqrt(std::max(0.0, std::max(prev, lambda))));
}

}  // namespace

double spectral_norm(const Mat& E, PowerIterationOptions opts) {
  if (E.size() == 0) return 0.0;
  double lambda = 0.0;
  if (E.cols() <= E.rows()) {
    lambda = top_eigenvalue(E.cols(), [&](const Vec& v) -> Vec { return E.transpose() * (E * v); },
                            opts);
  } else {
    lambda = top_eigenvalue(E.rows(), [&](const Vec& v) -> Vec { return E * (E.transpose() * v); },
                            opts);
  }
  return std::sqrt(std::max(0.0, lambda));
}

double spectral_norm(const Problem& problem, PowerIterationOptions opts) {
  const double lambda = top_eigenvalue(
      problem.m(),
      [&](const Vec& v) -> Vec {
        Vec out = Vec::Zero(problem.m());
        for (const auto& b : problem.blocks()) b.E.apply_add(b.E.apply_transpose(v), out);
        return out;
      },
      opts);
  return std::sqrt(std::max(0.0, lambda));
}

TolerancePolicy make_tolerance_policy(const InexactSchedule& schedule,
                                      const SolverParams& params, std::size_t K) {
  schedule.validate();
  if (schedule.kind == InexactSchedule::Kind::exact) return {};
  const double rho = params.rho;
  const double c = params.c;
  const bool by_step = schedule.kind == InexactSchedule::Kind::criterion_B;
  return [schedule, rho, c, K, by_step](std::size_t nu, std::size_t, const Vec& x_prev) {
    SolveTolerance tol;
    tol.base = criterion_A_threshold(nu, schedule, rho, c, K);
    tol.scale_by_step = by_step;
    if (by_step) tol.step_origin = x_prev;
    return tol;
  };
}

BlockSolveCertificate inexact_block_solve(std::size_t k, std::size_t nu,
                                          const IterateState& state,
                                          const Problem& problem,
                                          const SolverParams& params,
                                          const InexactSchedule& schedule,
                                          const BlockSolver& inner) {
  params.validate();
  const BlockSubproblem sub = ada_subproblem(k, state, problem, params);
  const auto policy = make_tolerance_policy(schedule, params, problem.num_blocks());
  const SolveTolerance tol = policy ? policy(nu, k, state.x[k]) : SolveTolerance{};
  BlockSolveCertificate cert = inner.solve(sub, state.x[k], tol);
  if (!tol.exact() && cert.subgrad_bound > tol.at(cert.x)) {
    throw InnerSolverError("inner solver exhausted its budget", cert.subgrad_bound,
                           tol.at(cert.x));
  }
  return cert;
}

RunResult iada_run(const Problem& problem, const SolverParams& params,
                   const InexactSchedule& schedule,
                   std::span<const BlockSolverPtr> solvers,
                   const IterateState& initial, const RunOptions& options) {
  params.validate();
  return run_with_policy(problem, params, solvers, initial, options,
                         make_tolerance_policy(schedule, params, problem.num_blocks()));
}

double step_inexactness(const StepMetrics& metrics, const InexactSchedule& schedule,
                        double rho, double c) {
  const double En = schedule.E_norm;
  const double total =
      std::accumulate(metrics.per_block_cert.begin(), metrics.per_block_cert.end(), 0.0);
  return c * (rho * En + En + 1.0) * total;
}

}  // namespace ada
