#pragma once

#include "ada/ada_core.hpp"
#include "ada/block_solvers.hpp"
#include "ada/model.hpp"

#include <cstddef>
#include <span>

namespace ada {

// Inexactness schedule eps_nu = eps0 / nu^gamma feeding criteria (A) and (B).
struct InexactSchedule {
  enum class Kind { exact, criterion_A, criterion_B };

  Kind kind = Kind::criterion_A;
  double eps0 = 1.0;
  double gamma = 1.5;
  double E_norm = 1.0;  // spectral norm of the stacked E, computed once

  void validate() const;
  double eps(std::size_t nu) const;
  // Summability of eps_nu (gamma > 1) is what the convergence theory needs.
  bool summable() const { return gamma > 1.0; }
};

// (eps0 / nu^gamma) / (c K (rho ||E|| + ||E|| + 1))
double criterion_A_threshold(std::size_t nu, const InexactSchedule& schedule,
                             double rho, double c, std::size_t K);
// criterion A threshold * min(1, ||x_k^{nu+1} - x_k^nu||)
double criterion_B_threshold(std::size_t nu, const InexactSchedule& schedule,
                             double rho, double c, std::size_t K,
                             double x_step_norm);

class SpectralNormError : public Error {
 public:
  SpectralNormError(double lo, double hi)
      : Error("power iteration did not converge"), lo_(lo), hi_(hi) {}
  double lower() const { return lo_; }
  double upper() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

struct PowerIterationOptions {
  double rel_tol = 1e-10;
  std::size_t max_iters = 1000;
};

// Largest singular value by power iteration. Returns 0 for a zero matrix.
double spectral_norm(const Mat& E, PowerIterationOptions opts = {});
// Spectral norm of the stacked coupling matrix [E_1 ... E_K].
double spectral_norm(const Problem& problem, PowerIterationOptions opts = {});

// Block solve meeting the active criterion at outer iteration nu (1-based).
BlockSolveCertificate inexact_block_solve(std::size_t k, std::size_t nu,
                                          const IterateState& state,
                                          const Problem& problem,
                                          const SolverParams& params,
                                          const InexactSchedule& schedule,
                                          const BlockSolver& inner);

TolerancePolicy make_tolerance_policy(const InexactSchedule& schedule,
                                      const SolverParams& params, std::size_t K);

RunResult iada_run(const Problem& problem, const SolverParams& params,
                   const InexactSchedule& schedule,
                   std::span<const BlockSolverPtr> solvers,
                   const IterateState& initial, const RunOptions& options = {});

// c * (rho ||E|| + ||E|| + 1) * sum_k cert_k for one step; bounded by eps_nu
// whenever every certificate met criterion (A).
double step_inexactness(const StepMetrics& metrics, const InexactSchedule& schedule,
                        double rho, double c);

}  // namespace ada
