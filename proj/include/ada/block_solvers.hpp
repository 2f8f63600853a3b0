#pragma once

#include "ada/model.hpp"

#include <Eigen/Cholesky>

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ada {

class InnerSolverError : public Error {
 public:
  InnerSolverError(const std::string& what, double achieved, double required)
      : Error(what), achieved_(achieved), required_(required) {}
  double achieved() const { return achieved_; }
  double required() const { return required_; }

 private:
  double achieved_;
  double required_;
};

// The per-block subproblem shared by every splitting method in this library:
//
//   min_{x in X_k}  f_k(x) + (alpha/2) ||E_k x - target||^2 + (mu/2) ||x - anchor||^2
//
// ADA uses alpha = rho/2, mu = 1/c; VSADMM alpha = beta, mu = 0; Prox-JADMM
// alpha = beta, mu = tau_k.
struct BlockSubproblem {
  const BlockSpec* block = nullptr;
  double alpha = 0.0;
  Vec target;
  double mu = 0.0;
  Vec anchor;

  double value(const Vec& x) const;
  // Gradient of everything except the l1 term.
  Vec smooth_gradient(const Vec& x) const;
  // dist(0, subdifferential at x), including the box normal cone.
  double subgrad_dist(const Vec& x) const;
};

double soft_threshold(double a, double kappa);
Vec soft_threshold(const Vec& a, double kappa);

// Minimal norm of g + lambda * d||.||_1(x).
double subgrad_dist_l1(const Vec& x, const Vec& smooth_grad, double lambda1);
// Same, with optional per-coordinate weights and box normal cone.
double min_subgradient_norm(const Vec& x, const Vec& smooth_grad,
                            const std::optional<L1Part>& l1,
                            const std::optional<Box>& box);

// Cholesky factorization of A^T A + extra + sigma I, or of the dual system
// A A^T + sigma I when A is wide and there is no extra term.
class CachedQuadSolver {
 public:
  enum class Mode { primal, woodbury };

  CachedQuadSolver(const DesignMatrix& A, Vec b, double sigma);
  CachedQuadSolver(const DesignMatrix& A, Vec b, double sigma, const Mat& extra);

  Mode mode() const { return mode_; }
  double sigma() const { return sigma_; }
  Index dim() const { return n_; }
  const Vec& At_b() const { return At_b_; }

  // (A^T A + extra + sigma I)^{-1} rhs
  Vec solve(const Vec& rhs) const;

 private:
  Mode mode_ = Mode::primal;
  double sigma_ = 0.0;
  Index n_ = 0;
  Mat A_;  // kept for the woodbury path
  Vec At_b_;
  Eigen::LLT<Mat> llt_;
};

// Exact minimizer of the ADA subproblem for a least-squares block with E_k = I:
// [A^T A + (rho/2 + 1/c) I]^{-1} (A^T b + (rho/2) w + x/c - y).
Vec quad_solve(const CachedQuadSolver& solver, const Vec& w, const Vec& x,
               const Vec& y, double rho, double c);

// Exact minimizer of lambda1 ||.||_1 + (rho/4)||sign*x - w + (2/rho) y||^2 +
// (1/2c)||x - x_prev||^2.
Vec l1_prox_block(const Vec& w, const Vec& x_prev, const Vec& y, double rho,
                  double c, double lambda1, double sign);

struct LbfgsOptions {
  std::size_t memory = 10;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  std::size_t max_inner = 500;
  // Give up when the gradient norm has not halved over this many iterations
  // (it has reached its rounding floor). 0 disables the check.
  std::size_t stall_window = 30;
};

struct LbfgsResult {
  Vec x;
  double value = 0.0;
  double grad_norm = 0.0;
  std::size_t iters = 0;
  bool converged = false;
};

// Returns f(x) and writes the gradient into `grad`.
using ValueAndGradient = std::function<double(const Vec& x, Vec& grad)>;
// Gradient-norm target as a function of the current point.
using ToleranceAt = std::function<double(const Vec& x)>;

LbfgsResult lbfgs_minimize(const ValueAndGradient& fg, Vec x0, double grad_tol,
                           std::size_t max_inner = 500);
LbfgsResult lbfgs_minimize(const ValueAndGradient& fg, Vec x0,
                           const ToleranceAt& tol, const LbfgsOptions& opts);

// Accuracy demanded from one block solve. `base == 0` asks for an exact solve.
// With `scale_by_step`, the threshold is base * min(1, ||x - step_origin||).
struct SolveTolerance {
  double base = 0.0;
  bool scale_by_step = false;
  Vec step_origin;

  bool exact() const { return base <= 0.0; }
  double at(const Vec& x) const;
};

struct BlockSolveCertificate {
  Vec x;
  double subgrad_bound = 0.0;  // upper bound on dist(0, d phi(x))
  std::size_t inner_iters = 0;
};

class BlockSolver {
 public:
  virtual ~BlockSolver() = default;
  virtual BlockSolveCertificate solve(const BlockSubproblem& sub,
                                      const Vec& warm_start,
                                      const SolveTolerance& tol) const = 0;
  virtual std::string name() const = 0;
};

using BlockSolverPtr = std::shared_ptr<const BlockSolver>;

enum class InnerStrategy {
  closed_form,  // factorize / prox whenever the block allows it
  iterative,    // L-BFGS on quadratic blocks, factorization only as fallback
};

struct InnerSolverOptions {
  InnerStrategy strategy = InnerStrategy::closed_form;
  std::size_t max_inner = 500;
  // Gradient tolerance used for "exact" solves of blocks with no closed form.
  double exact_grad_tol = 1e-10;
};

// Least squares / quadratic block, no l1, no box. Factorization cached for
// the (alpha, mu) it was built with.
class QuadraticBlockSolver final : public BlockSolver {
 public:
  QuadraticBlockSolver(const BlockSpec& block, double alpha, double mu,
                       InnerSolverOptions opts = {});
  BlockSolveCertificate solve(const BlockSubproblem& sub, const Vec& warm_start,
                              const SolveTolerance& tol) const override;
  std::string name() const override { return "quadratic"; }
  const CachedQuadSolver& factorization() const { return chol_; }

 private:
  Vec exact(const BlockSubproblem& sub) const;

  double alpha_;
  double mu_;
  InnerSolverOptions opts_;
  CachedQuadSolver chol_;
};

// Weighted-l1 (or zero) objective with E_k^T E_k = gamma I, optional box.
class ProxL1BlockSolver final : public BlockSolver {
 public:
  BlockSolveCertificate solve(const BlockSubproblem& sub, const Vec& warm_start,
                              const SolveTolerance& tol) const override;
  std::string name() const override { return "l1_prox"; }
};

// Smooth block without l1 or box.
class LbfgsBlockSolver final : public BlockSolver {
 public:
  explicit LbfgsBlockSolver(InnerSolverOptions opts = {}) : opts_(opts) {}
  BlockSolveCertificate solve(const BlockSubproblem& sub, const Vec& warm_start,
                              const SolveTolerance& tol) const override;
  std::string name() const override { return "lbfgs"; }

 private:
  InnerSolverOptions opts_;
};

// Anything else: accelerated proximal gradient with backtracking, certified
// by the exact minimal subgradient norm.
class ProxGradientBlockSolver final : public BlockSolver {
 public:
  explicit ProxGradientBlockSolver(InnerSolverOptions opts = {}) : opts_(opts) {}
  BlockSolveCertificate solve(const BlockSubproblem& sub, const Vec& warm_start,
                              const SolveTolerance& tol) const override;
  std::string name() const override { return "prox_gradient"; }

 private:
  InnerSolverOptions opts_;
};

// Picks a solver per block from its structure. `mus` holds mu per block.
std::vector<BlockSolverPtr> make_block_solvers(const Problem& problem,
                                               double alpha,
                                               const std::vector<double>& mus,
                                               InnerSolverOptions opts = {});
std::vector<BlockSolverPtr> make_block_solvers(const Problem& problem,
                                               double alpha, double mu,
                                               InnerSolverOptions opts = {});

}  // namespace ada
