#pragma once

#include "ada/ada_core.hpp"
#include "ada/block_solvers.hpp"
#include "ada/model.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace ada {

struct BaselineParams {
  double beta = 1.0;        // penalty
  double gamma_damp = 1.0;  // Prox-JADMM dual damping, in (0, 2)
  std::vector<double> prox_weights;  // Prox-JADMM tau_k; empty = default rule
  double admm_step = 1.618;          // two-block ADMM dual step length
  std::size_t max_iters = 1000;
  double stop_eps = 1e-8;

  void validate() const;
};

// tau_k = beta * (K / (2 - gamma) - 1) * ||E_k||^2 + 0.1
std::vector<double> default_prox_weights(const Problem& problem, double beta,
                                         double gamma_damp);

using BaselineObserver =
    std::function<void(std::size_t iter, const BlockVecs& x, const Vec& multiplier)>;

struct BaselineRunOptions {
  StopMode stop_mode = StopMode::x_change;
  BaselineObserver observer;
};

struct BaselineResult {
  BlockVecs x;
  Vec multiplier;  // estimate of y in L(x, y) = f(x) + <Ex - q, y>
  Trace trace;
  RunStatus status = RunStatus::max_iters_reached;
};

// ---------------------------------------------------------------------------
// Variable splitting ADMM

struct VsadmmState {
  BlockVecs w;
  BlockVecs x;
  BlockVecs y;

  static VsadmmState zeros(const Problem& problem);
  Vec multiplier() const { return project_onto_Wperp(y); }
};

// Block solvers for the x-update: alpha = beta, mu = 0.
std::vector<BlockSolverPtr> vsadmm_solvers(const Problem& problem, double beta,
                                           InnerSolverOptions opts = {});

std::pair<VsadmmState, StepMetrics> vsadmm_step(const VsadmmState& state,
                                                const Problem& problem,
                                                const BaselineParams& params,
                                                std::span<const BlockSolverPtr> solvers);

BaselineResult run_vsadmm(const Problem& problem, const BaselineParams& params,
                          std::span<const BlockSolverPtr> solvers,
                          const BaselineRunOptions& options = {});

// ---------------------------------------------------------------------------
// Proximal Jacobian ADMM

struct ProxJadmmState {
  BlockVecs x;
  Vec lambda;

  static ProxJadmmState zeros(const Problem& problem);
  Vec multiplier() const { return -lambda; }
};

// Block solvers for the Jacobi x-update: alpha = beta, mu = tau_k.
std::vector<BlockSolverPtr> prox_jadmm_solvers(const Problem& problem,
                                               const BaselineParams& params,
                                               InnerSolverOptions opts = {});

std::pair<ProxJadmmState, StepMetrics> prox_jadmm_step(
    const ProxJadmmState& state, const Problem& problem, const BaselineParams& params,
    std::span<const BlockSolverPtr> solvers);

BaselineResult run_prox_jadmm(const Problem& problem, const BaselineParams& params,
                              std::span<const BlockSolverPtr> solvers,
                              const BaselineRunOptions& options = {});

// ---------------------------------------------------------------------------
// Classic two-block ADMM for  min 1/2||Ax - b||^2 + lambda ||z||_1  s.t. x - z = 0,
// scaled dual form with dual step length `admm_step`.

struct Admm2State {
  Vec x;
  Vec z;
  Vec u;  // scaled dual

  Vec multiplier(double beta) const { return beta * u; }
};

class Admm2Lasso {
 public:
  // `problem` must be the two-block lasso splitting: block 1 least squares
  // with E = I, block 2 l1 with E = -I, q = 0.
  Admm2Lasso(const Problem& problem, double beta);

  Admm2State zeros() const;
  std::pair<Admm2State, StepMetrics> step(const Admm2State& state,
                                          const BaselineParams& params) const;
  BaselineResult run(const BaselineParams& params,
                     const BaselineRunOptions& options = {}) const;

 private:
  const Problem* problem_;
  double beta_;
  CachedQuadSolver chol_;
  L1Part l1_;
};

}  // namespace ada
