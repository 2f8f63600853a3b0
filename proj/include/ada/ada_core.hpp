#pragma once

#include "ada/block_solvers.hpp"
#include "ada/model.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace ada {

struct StepMetrics {
  std::size_t iter = 0;
  double objective = 0.0;
  double constraint_residual_norm = 0.0;
  double delta_g_norm_sq = 0.0;  // ||u^nu - u^{nu+1}||_G^2 over (w, x, eta, zeta)
  double x_rel_change = 0.0;     // ||x^nu - x^{nu+1}|| / max(1, ||x^nu||)
  double feas_rel = 0.0;         // ||E x^{nu+1} - q|| / max(1, ||q||)
  std::vector<double> per_block_cert;
  std::vector<std::size_t> inner_iters;
  // Active inexactness threshold per block; 0 when the solve was exact.
  std::vector<double> thresholds;
  double w_drift = 0.0;  // size of the re-projection of w onto W

  std::size_t inner_iters_total() const;
};

using Trace = std::vector<StepMetrics>;

// `both` requires the x-change and the feasibility test at once.
enum class StopMode { x_change, feasibility, both, max_iters };

enum class RunStatus { converged, max_iters_reached, stopped_by_predicate };

// A block solver failed; carries the 0-based block index.
class BlockFailure : public Error {
 public:
  BlockFailure(std::size_t block, const std::string& what)
      : Error("block " + std::to_string(block + 1) + ": " + what), block_(block) {}
  std::size_t block() const { return block_; }

 private:
  std::size_t block_;
};

// Called with (iteration, state): once with iteration 0 for the initial state,
// then after every step.
using IterationObserver = std::function<void(std::size_t, const IterateState&)>;
using StopPredicate = std::function<bool(const IterateState&, const StepMetrics&)>;

struct RunOptions {
  StopMode stop_mode = StopMode::x_change;
  IterationObserver observer;
  // Extra stopping rule checked after the regular one (e.g. consensus tests).
  StopPredicate extra_stop;
};

struct RunResult {
  IterateState final_state;
  Trace trace;
  RunStatus status = RunStatus::max_iters_reached;
  double max_w_drift = 0.0;
};

// Produces the accuracy demanded of block k at a given outer iteration.
// An empty policy means every block is solved exactly.
using TolerancePolicy =
    std::function<SolveTolerance(std::size_t iter, std::size_t block, const Vec& x_prev)>;

// phi_k at x_k for the current state (with the -q term on the last block).
double phi_value(std::size_t k, const Vec& x_k, const IterateState& state,
                 const Problem& problem, const SolverParams& params);

BlockSubproblem ada_subproblem(std::size_t k, const IterateState& state,
                               const Problem& problem, const SolverParams& params);

std::pair<IterateState, StepMetrics> ada_step(const IterateState& state,
                                              const Problem& problem,
                                              const SolverParams& params,
                                              std::span<const BlockSolverPtr> solvers);

// One sweep with certified (possibly inexact) block solves. `iter` is the
// 1-based index of the iterate being produced.
std::pair<IterateState, StepMetrics> decomposition_step(
    const IterateState& state, const Problem& problem, const SolverParams& params,
    std::span<const BlockSolverPtr> solvers, std::size_t iter,
    const TolerancePolicy& policy);

RunResult run(const Problem& problem, const SolverParams& params,
              std::span<const BlockSolverPtr> solvers, const IterateState& initial,
              const RunOptions& options = {});

// Shared outer loop of ada/iada.
RunResult run_with_policy(const Problem& problem, const SolverParams& params,
                          std::span<const BlockSolverPtr> solvers,
                          const IterateState& initial, const RunOptions& options,
                          const TolerancePolicy& policy);

bool check_stop(const StepMetrics& metrics, double eps, StopMode mode);

// Mean of the first n iterates x^1..x^n.
BlockVecs ergodic_average(std::span<const BlockVecs> iterates, std::size_t n);

// Streaming version for long runs.
class ErgodicAverager {
 public:
  void add(const BlockVecs& x);
  std::size_t count() const { return count_; }
  BlockVecs mean() const;

 private:
  BlockVecs sum_;
  std::size_t count_ = 0;
};

// CSV: iter,objective,residual,delta_g,x_rel,feas_rel[,cert_1..cert_K,inner_iters_total]
void write_trace_csv(std::ostream& os, const Trace& trace, bool with_certificates,
                     std::size_t num_blocks);
std::string format_double(double v);

}  // namespace ada
