#include "ada/ada_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <thread>

namespace ada {

std::size_t StepMetrics::inner_iters_total() const {
  return std::accumulate(inner_iters.begin(), inner_iters.end(), std::size_t{0});
}

BlockSubproblem ada_subproblem(std::size_t k, const IterateState& state,
                               const Problem& problem, const SolverParams& params) {
  if (k >= problem.num_blocks()) throw DimensionError("block index out of range");
  BlockSubproblem sub;
  sub.block = &problem.block(k);
  // (rho/4)||E x - q - w + (2/rho) y||^2 = (alpha/2)||E x - target||^2
  sub.alpha = params.rho / 2.0;
  sub.target = state.w[k] - (2.0 / params.rho) * state.y[k];
  if (problem.carries_q(k)) sub.target += problem.q();
  sub.mu = 1.0 / params.c;
  sub.anchor = state.x[k];
  return sub;
}

double phi_value(std::size_t k, const Vec& x_k, const IterateState& state,
                 const Problem& problem, const SolverParams& params) {
  params.validate();
  const BlockSubproblem sub = ada_subproblem(k, state, problem, params);
  if (x_k.size() != sub.block->n) throw DimensionError("x_k has wrong length");
  return sub.value(x_k);
}

namespace {

template <class F>
void for_each_block(std::size_t K, unsigned threads, F&& fn) {
  if (threads <= 1 || K <= 1) {
    for (std::size_t k = 0; k < K; ++k) fn(k);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, K);
  std::vector<std::exception_ptr> errors(K);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t k = t; k < K; k += workers) {
          try {
            fn(k);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::pair<IterateState, StepMetrics> decomposition_step(
    const IterateState& state, const Problem& problem, const SolverParams& params,
    std::span<const BlockSolverPtr> solvers, std::size_t iter,
    const TolerancePolicy& policy) {
  const std::size_t K = problem.num_blocks();
  if (solvers.size() != K) throw DimensionError("need one solver per block");
  const double rho = params.rho;

  IterateState next;
  next.x.resize(K);
  StepMetrics met;
  met.iter = iter;
  met.per_block_cert.assign(K, 0.0);
  met.inner_iters.assign(K, 0);
  met.thresholds.assign(K, 0.0);

  for_each_block(K, params.threads, [&](std::size_t k) {
    const BlockSubproblem sub = ada_subproblem(k, state, problem, params);
    const SolveTolerance tol = policy ? policy(iter, k, state.x[k]) : SolveTolerance{};
    try {
      BlockSolveCertificate cert = solvers[k]->solve(sub, state.x[k], tol);
      if (!tol.exact()) {
        met.thresholds[k] = tol.at(cert.x);
        if (cert.subgrad_bound > met.thresholds[k]) {
          throw InnerSolverError("certificate exceeds the inexactness threshold",
                                 cert.subgrad_bound, met.thresholds[k]);
        }
      }
      next.x[k] = std::move(cert.x);
      met.per_block_cert[k] = cert.subgrad_bound;
      met.inner_iters[k] = cert.inner_iters;
    } catch (const std::exception& e) {
      throw BlockFailure(k, e.what());
    }
  });

  // eta, then the zeta barrier, then w and y; sums run in block order
  next.eta.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    Vec r = problem.block(k).E.apply(next.x[k]) - state.w[k];
    if (problem.carries_q(k)) r -= problem.q();
    next.eta[k] = state.y[k] + (rho / 2.0) * r;
  }
  next.zeta_bar = project_onto_Wperp(next.eta);

  next.w.resize(K);
  next.y.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    next.w[k] = state.w[k] + (next.eta[k] - next.zeta_bar) / rho;
    next.y[k] = 0.5 * (next.eta[k] + next.zeta_bar);
  }
  const Vec w_mean = project_onto_Wperp(next.w);
  for (auto& wk : next.w) wk -= w_mean;
  met.w_drift = std::sqrt(static_cast<double>(K)) * w_mean.norm();

  const Vec r = constraint_residual(next.x, problem);
  met.objective = objective(next.x, problem);
  met.constraint_residual_norm = r.norm();
  met.delta_g_norm_sq = g_distance_sq(state, next, rho, params.c);
  met.x_rel_change = std::sqrt(squared_norm(difference(state.x, next.x))) /
                     std::max(1.0, std::sqrt(squared_norm(state.x)));
  met.feas_rel = met.constraint_residual_norm / std::max(1.0, problem.q().norm());
  return {std::move(next), std::move(met)};
}

std::pair<IterateState, StepMetrics> ada_step(const IterateState& state,
                                              const Problem& problem,
                                              const SolverParams& params,
                                              std::span<const BlockSolverPtr> solvers) {
  params.validate();
  return decomposition_step(state, problem, params, solvers, 1, {});
}

bool check_stop(const StepMetrics& metrics, double eps, StopMode mode) {
  switch (mode) {
    case StopMode::x_change:
      return metrics.x_rel_change <= eps;
    case StopMode::feasibility:
      return metrics.feas_rel <= eps;
    case StopMode::both:
      return metrics.x_rel_change <= eps && metrics.feas_rel <= eps;
    case StopMode::max_iters:
      return false;
  }
  return false;
}

RunResult run_with_policy(const Problem& problem, const SolverParams& params,
                          std::span<const BlockSolverPtr> solvers,
                          const IterateState& initial, const RunOptions& options,
                          const TolerancePolicy& policy) {
  params.validate();
  problem.check_primal(initial.x);
  if (initial.w.size() != problem.num_blocks() || initial.y.size() != problem.num_blocks()) {
    throw DimensionError("initial state has the wrong number of blocks");
  }

  RunResult res;
  res.final_state = initial;
  if (options.observer) options.observer(0, res.final_state);

  for (std::size_t it = 1; it <= params.max_iters; ++it) {
    auto [next, met] =
        decomposition_step(res.final_state, problem, params, solvers, it, policy);
    res.final_state = std::move(next);
    res.max_w_drift = std::max(res.max_w_drift, met.w_drift);
    res.trace.push_back(std::move(met));
    if (options.observer) options.observer(it, res.final_state);
    const StepMetrics& last = res.trace.back();
    if (check_stop(last, params.stop_eps, options.stop_mode)) {
      res.status = RunStatus::converged;
      return res;
    }
    if (options.extra_stop && options.extra_stop(res.final_state, last)) {
      res.status = RunStatus::stopped_by_predicate;
      return res;
    }
  }
  res.status = RunStatus::max_iters_reached;
  return res;
}

RunResult run(const Problem& problem, const SolverParams& params,
              std::span<const BlockSolverPtr> solvers, const IterateState& initial,
              const RunOptions& options) {
  return run_with_policy(problem, params, solvers, initial, options, {});
}

BlockVecs ergodic_average(std::span<const BlockVecs> iterates, std::size_t n) {
  if (n < 1) throw ParameterError("ergodic average needs N >= 1");
  if (n > iterates.size()) throw ParameterError("N exceeds the trace length");
  ErgodicAverager avg;
  for (std::size_t i = 0; i < n; ++i) avg.add(iterates[i]);
  return avg.mean();
}

void ErgodicAverager::add(const BlockVecs& x) {
  if (count_ == 0) {
    sum_ = x;
  } else {
    if (x.size() != sum_.size()) throw DimensionError("iterate block count changed");
    for (std::size_t k = 0; k < x.size(); ++k) sum_[k] += x[k];
  }
  ++count_;
}

BlockVecs ErgodicAverager::mean() const {
  if (count_ == 0) throw ParameterError("no iterates accumulated");
  BlockVecs out = sum_;
  for (auto& v : out) v /= static_cast<double>(count_);
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& os, const Trace& trace, bool with_certificates,
                     std::size_t num_blocks) {
  os << "iter,objective,residual,delta_g,x_rel,feas_rel";
  if (with_certificates) {
    for (std::size_t k = 1; k <= num_blocks; ++k) os << ",cert_" << k;
    os << ",inner_iters_total";
  }
  os << '\n';
  for (const auto& m : trace) {
    os << m.iter << ',' << format_double(m.objective) << ','
       << format_double(m.constraint_residual_norm) << ','
       << format_double(m.delta_g_norm_sq) << ',' << format_double(m.x_rel_change)
       << ',' << format_double(m.feas_rel);
    if (with_certificates) {
      for (std::size_t k = 0; k < num_blocks; ++k) {
        os << ',' << format_double(k < m.per_block_cert.size() ? m.per_block_cert[k] : 0.0);
      }
      os << ',' << m.inner_iters_total();
    }
    os << '\n';
  }
}

}  // namespace ada
