#include "ada/block_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace ada {

// ---------------------------------------------------------------------------
// Subproblem

double BlockSubproblem::value(const Vec& x) const {
  const Vec r = block->E.apply(x) - target;
  return block->objective.value(x) + 0.5 * alpha * r.squaredNorm() +
         0.5 * mu * (x - anchor).squaredNorm();
}

Vec BlockSubproblem::smooth_gradient(const Vec& x) const {
  Vec g = block->objective.smooth_gradient(x);
  if (alpha != 0.0) {
    const Vec r = block->E.apply(x) - target;
    g += alpha * block->E.apply_transpose(r);
  }
  if (mu != 0.0) g += mu * (x - anchor);
  return g;
}

double BlockSubproblem::subgrad_dist(const Vec& x) const {
  return min_subgradient_norm(x, smooth_gradient(x), block->objective.l1,
                              block->box);
}

// ---------------------------------------------------------------------------
// Scalar pieces

double soft_threshold(double a, double kappa) {
  if (kappa < 0.0) throw ParameterError("soft threshold needs kappa >= 0");
  if (a > kappa) return a - kappa;
  if (a < -kappa) return a + kappa;
  return 0.0;
}

Vec soft_threshold(const Vec& a, double kappa) {
  Vec out(a.size());
  for (Index i = 0; i < a.size(); ++i) out[i] = soft_threshold(a[i], kappa);
  return out;
}

double subgrad_dist_l1(const Vec& x, const Vec& smooth_grad, double lambda1) {
  if (lambda1 < 0.0) throw ParameterError("negative l1 scale");
  return min_subgradient_norm(x, smooth_grad, L1Part{lambda1, {}}, std::nullopt);
}

double min_subgradient_norm(const Vec& x, const Vec& smooth_grad,
                            const std::optional<L1Part>& l1,
                            const std::optional<Box>& box) {
  if (x.size() != smooth_grad.size()) throw DimensionError("gradient length mismatch");
  double s = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    // The subdifferential at coordinate i is an interval [lo, hi].
    double lo = smooth_grad[i];
    double hi = smooth_grad[i];
    if (l1) {
      const double lam = l1->lambda * l1->weight(i);
      if (x[i] > 0.0) {
        lo += lam;
        hi += lam;
      } else if (x[i] < 0.0) {
        lo -= lam;
        hi -= lam;
      } else {
        lo -= lam;
        hi += lam;
      }
    }
    if (box) {
      if (x[i] <= box->lo[i]) lo = -std::numeric_limits<double>::infinity();
      if (x[i] >= box->hi[i]) hi = std::numeric_limits<double>::infinity();
    }
    double d = 0.0;
    if (lo > 0.0) d = lo;
    else if (hi < 0.0) d = -hi;
    s += d * d;
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// CachedQuadSolver

CachedQuadSolver::CachedQuadSolver(const DesignMatrix& A, Vec b, double sigma)
    : sigma_(sigma), n_(A.cols()) {
  if (!(sigma > 0.0)) throw ParameterError("cached solver needs sigma > 0");
  if (b.size() != A.rows()) throw DimensionError("b length differs from A rows");
  At_b_ = A.apply_transpose(b);
  if (A.cols() > A.rows()) {
    mode_ = Mode::woodbury;
    A_ = A.to_dense();
    Mat M = A.outer_gram();
    M.diagonal().array() += sigma;
    llt_.compute(M);
  } else {
    mode_ = Mode::primal;
    Mat M = A.gram();
    M.diagonal().array() += sigma;
    llt_.compute(M);
  }
  if (llt_.info() != Eigen::Success) {
    throw Error("cached factorization failed: matrix not positive definite");
  }
}

CachedQuadSolver::CachedQuadSolver(const DesignMatrix& A, Vec b, double sigma,
                                   const Mat& extra)
    : sigma_(sigma), n_(A.cols()) {
  if (sigma < 0.0) throw ParameterError("cached solver needs sigma >= 0");
  if (b.size() != A.rows()) throw DimensionError("b length differs from A rows");
  if (extra.rows() != n_ || extra.cols() != n_) {
    throw DimensionError("extra term has wrong shape");
  }
  At_b_ = A.apply_transpose(b);
  Mat M = A.gram() + extra;
  M.diagonal().array() += sigma;
  llt_.compute(M);
  if (llt_.info() != Eigen::Success) {
    throw Error("cached factorization failed: matrix not positive definite");
  }
}

Vec CachedQuadSolver::solve(const Vec& rhs) const {
  if (rhs.size() != n_) throw DimensionError("rhs length mismatch");
  if (mode_ == Mode::primal) return llt_.solve(rhs);
  // (A^T A + s I)^{-1} r = (r - A^T (A A^T + s I)^{-1} A r) / s
  const Vec t = llt_.solve(A_ * rhs);
  return (rhs - A_.transpose() * t) / sigma_;
}

Vec quad_solve(const CachedQuadSolver& solver, const Vec& w, const Vec& x,
               const Vec& y, double rho, double c) {
  if (!(rho > 0.0) || !(c > 0.0)) throw ParameterError("rho and c must be positive");
  const double sigma = rho / 2.0 + 1.0 / c;
  if (std::abs(sigma - solver.sigma()) > 1e-14 * std::max(1.0, sigma)) {
    throw ParameterError("factorization was built for a different (rho, c)");
  }
  return solver.solve(solver.At_b() + (rho / 2.0) * w + x / c - y);
}

Vec l1_prox_block(const Vec& w, const Vec& x_prev, const Vec& y, double rho,
                  double c, double lambda1, double sign) {
  if (!(rho > 0.0) || !(c > 0.0)) throw ParameterError("rho and c must be positive");
  if (lambda1 < 0.0) throw ParameterError("negative l1 scale");
  if (std::abs(std::abs(sign) - 1.0) > 0.0) {
    throw ParameterError("l1 prox block needs E_k = +I or -I");
  }
  const double sigma = rho / 2.0 + 1.0 / c;
  const Vec center = (x_prev / c + sign * ((rho / 2.0) * w - y)) / sigma;
  return soft_threshold(center, lambda1 / sigma);
}

// ---------------------------------------------------------------------------
// L-BFGS

namespace {

struct LinePoint {
  double alpha = 0.0;
  double f = 0.0;
  double d = 0.0;  // directional derivative
};

double cubic_min(const LinePoint& a, const LinePoint& b) {
  const double lo = std::min(a.alpha, b.alpha);
  const double hi = std::max(a.alpha, b.alpha);
  const double d1 = a.d + b.d - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.d * b.d;
  double t = 0.5 * (lo + hi);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    const double cand =
        b.alpha - (b.alpha - a.alpha) * (b.d + d2 - d1) / (b.d - a.d + 2.0 * d2);
    if (std::isfinite(cand)) t = cand;
  }
  // keep away from the bracket ends
  const double margin = 0.1 * (hi - lo);
  return std::clamp(t, lo + margin, hi - margin);
}

class WolfeSearch {
 public:
  WolfeSearch(const ValueAndGradient& fg, const Vec& x, const Vec& p,
              double f0, double d0, const LbfgsOptions& opts)
      : fg_(fg), x_(x), p_(p), f0_(f0), d0_(d0), opts_(opts) {}

  // Returns true on success; xn/gn/fn hold the accepted point.
  bool run(double alpha1, Vec& xn, Vec& gn, double& fn) {
    LinePoint prev{0.0, f0_, d0_};
    double alpha = alpha1;
    for (int i = 0; i < 40; ++i) {
      LinePoint cur = eval(alpha, xn, gn, fn);
      if (!std::isfinite(cur.f)) {
        alpha = 0.5 * (prev.alpha + alpha);
        continue;
      }
      if (approx_wolfe(cur)) return true;
      if (cur.f > f0_ + opts_.c1 * cur.alpha * d0_ || (i > 0 && cur.f >= prev.f)) {
        return zoom(prev, cur, xn, gn, fn);
      }
      if (std::abs(cur.d) <= -opts_.c2 * d0_) return true;
      if (cur.d >= 0.0) return zoom(cur, prev, xn, gn, fn);
      prev = cur;
      alpha *= 2.0;
    }
    return false;
  }

 private:
  LinePoint eval(double alpha, Vec& xn, Vec& gn, double& fn) {
    xn = x_ + alpha * p_;
    fn = fg_(xn, gn);
    ++evals_;
    return {alpha, fn, gn.dot(p_)};
  }

  // Accept points whose decrease is lost in rounding but whose slope shows
  // the step is good (Hager-Zhang style approximate Wolfe test).
  bool approx_wolfe(const LinePoint& cur) const {
    const double ftol = 1e-12 * std::abs(f0_);
    return cur.f <= f0_ + ftol && cur.d <= (2.0 * opts_.c1 - 1.0) * d0_ &&
           cur.d >= opts_.c2 * d0_;
  }

  bool zoom(LinePoint lo, LinePoint hi, Vec& xn, Vec& gn, double& fn) {
    Vec x_best;
    Vec g_best;
    double f_best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 30; ++j) {
      const double alpha = cubic_min(lo, hi);
      LinePoint cur = eval(alpha, xn, gn, fn);
      if (cur.f < f_best && cur.f <= f0_ + opts_.c1 * cur.alpha * d0_) {
        f_best = cur.f;
        x_best = xn;
        g_best = gn;
      }
      if (approx_wolfe(cur)) return true;
      if (cur.f > f0_ + opts_.c1 * cur.alpha * d0_ || cur.f >= lo.f) {
        hi = cur;
      } else {
        if (std::abs(cur.d) <= -opts_.c2 * d0_) return true;
        if (cur.d * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = cur;
      }
      if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, lo.alpha)) break;
    }
    if (std::isfinite(f_best)) {
      xn = std::move(x_best);
      gn = std::move(g_best);
      fn = f_best;
      return true;
    }
    return false;
  }

  const ValueAndGradient& fg_;
  const Vec& x_;
  const Vec& p_;
  double f0_;
  double d0_;
  const LbfgsOptions& opts_;
  int evals_ = 0;
};

}  // namespace

LbfgsResult lbfgs_minimize(const ValueAndGradient& fg, Vec x0, double grad_tol,
                           std::size_t max_inner) {
  if (!(grad_tol > 0.0)) throw ParameterError("grad_tol must be positive");
  LbfgsOptions opts;
  opts.max_inner = max_inner;
  return lbfgs_minimize(fg, std::move(x0), [grad_tol](const Vec&) { return grad_tol; },
                        opts);
}

LbfgsResult lbfgs_minimize(const ValueAndGradient& fg, Vec x0,
                           const ToleranceAt& tol, const LbfgsOptions& opts) {
  LbfgsResult res;
  res.x = std::move(x0);
  Vec g(res.x.size());
  res.value = fg(res.x, g);
  res.grad_norm = g.norm();

  std::deque<Vec> s_hist;
  std::deque<Vec> y_hist;
  std::deque<double> rho_hist;
  std::vector<double> a(opts.memory);

  Vec xn(res.x.size());
  Vec gn(res.x.size());
  bool reset_once = false;
  double window_start_norm = res.grad_norm;
  std::size_t window_start_iter = 0;

  while (true) {
    if (res.grad_norm <= tol(res.x)) {
      res.converged = true;
      return res;
    }
    if (res.iters >= opts.max_inner) return res;
    if (opts.stall_window > 0 && res.iters >= window_start_iter + opts.stall_window) {
      if (res.grad_norm > 0.5 * window_start_norm) return res;
      window_start_norm = res.grad_norm;
      window_start_iter = res.iters;
    }

    // two-loop recursion
    Vec p = -g;
    const std::size_t h = s_hist.size();
    for (std::size_t i = h; i-- > 0;) {
      a[i] = rho_hist[i] * s_hist[i].dot(p);
      p -= a[i] * y_hist[i];
    }
    if (h > 0) p *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < h; ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(p);
      p += (a[i] - b) * s_hist[i];
    }
    double d0 = g.dot(p);
    if (!(d0 < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      p = -g;
      d0 = -g.squaredNorm();
    }

    const double alpha1 = h == 0 ? std::min(1.0, 1.0 / res.grad_norm) : 1.0;
    double fn = 0.0;
    WolfeSearch search(fg, res.x, p, res.value, d0, opts);
    if (!search.run(alpha1, xn, gn, fn)) {
      if (h == 0 || reset_once) return res;
      // retry from steepest descent once before giving up
      reset_once = true;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }
    reset_once = false;

    Vec s = xn - res.x;
    Vec yv = gn - g;
    const double sy = s.dot(yv);
    res.x.swap(xn);
    g.swap(gn);
    res.value = fn;
    res.grad_norm = g.norm();
    ++res.iters;
    if (sy > 1e-16 * s.norm() * yv.norm()) {
      if (s_hist.size() == opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
    }
  }
}

// ---------------------------------------------------------------------------
// Block solvers

double SolveTolerance::at(const Vec& x) const {
  if (!scale_by_step) return base;
  return base * std::min(1.0, (x - step_origin).norm());
}

namespace {

ValueAndGradient subproblem_fg(const BlockSubproblem& sub) {
  return [&sub](const Vec& x, Vec& grad) {
    grad = sub.smooth_gradient(x);
    return sub.value(x);
  };
}

void check_matches(const BlockSubproblem& sub, double alpha, double mu) {
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-14 * std::max(1.0, std::abs(b));
  };
  if (!close(sub.alpha, alpha) || !close(sub.mu, mu)) {
    throw ParameterError("subproblem weights differ from the cached factorization");
  }
}

CachedQuadSolver build_quadratic(const BlockSpec& block, double alpha, double mu) {
  const auto& sm = *block.objective.smooth;
  Vec b = sm.loss == SmoothLoss::least_squares ? sm.data : Vec::Zero(sm.A.rows());
  if (const auto gamma = block.E.gram_scale()) {
    return CachedQuadSolver(sm.A, std::move(b), alpha * *gamma + mu);
  }
  const Mat Ed = block.E.to_dense();
  const Mat extra = alpha * Ed.transpose() * Ed;
  return CachedQuadSolver(sm.A, std::move(b), mu, extra);
}

}  // namespace

QuadraticBlockSolver::QuadraticBlockSolver(const BlockSpec& block, double alpha,
                                           double mu, InnerSolverOptions opts)
    : alpha_(alpha), mu_(mu), opts_(opts), chol_(build_quadratic(block, alpha, mu)) {
  const auto& f = block.objective;
  if (!f.smooth || f.smooth->loss == SmoothLoss::logistic || f.l1 || block.box) {
    throw ParameterError("quadratic block solver needs an unconstrained quadratic block");
  }
}

Vec QuadraticBlockSolver::exact(const BlockSubproblem& sub) const {
  check_matches(sub, alpha_, mu_);
  Vec rhs = chol_.At_b();
  if (alpha_ != 0.0) rhs += alpha_ * sub.block->E.apply_transpose(sub.target);
  if (mu_ != 0.0) rhs += mu_ * sub.anchor;
  return chol_.solve(rhs);
}

BlockSolveCertificate QuadraticBlockSolver::solve(const BlockSubproblem& sub,
                                                  const Vec& warm_start,
                                                  const SolveTolerance& tol) const {
  BlockSolveCertificate cert;
  if (opts_.strategy == InnerStrategy::iterative && !tol.exact()) {
    LbfgsOptions lo;
    lo.max_inner = opts_.max_inner;
    auto res = lbfgs_minimize(subproblem_fg(sub), warm_start,
                              [&tol](const Vec& x) { return tol.at(x); }, lo);
    cert.inner_iters = res.iters;
    if (res.converged) {
      cert.x = std::move(res.x);
      cert.subgrad_bound = res.grad_norm;
      return cert;
    }
    // threshold below what the iteration can reach: factorize instead
  }
  cert.x = exact(sub);
  cert.subgrad_bound = 0.0;
  return cert;
}

BlockSolveCertificate ProxL1BlockSolver::solve(const BlockSubproblem& sub,
                                               const Vec&,
                                               const SolveTolerance&) const {
  const BlockSpec& b = *sub.block;
  if (b.objective.smooth) throw ParameterError("l1 prox solver needs a nonsmooth-only block");
  const auto gamma = b.E.gram_scale();
  if (!gamma) throw ParameterError("l1 prox solver needs E_k^T E_k = gamma I");
  const double sigma = sub.alpha * *gamma + sub.mu;
  if (!(sigma > 0.0)) throw ParameterError("l1 prox solver needs a positive curvature");

  Vec center = Vec::Zero(b.n);
  if (sub.alpha != 0.0) center += sub.alpha * b.E.apply_transpose(sub.target);
  if (sub.mu != 0.0) center += sub.mu * sub.anchor;
  center /= sigma;

  BlockSolveCertificate cert;
  cert.x = center;
  if (b.objective.l1) {
    const auto& l1 = *b.objective.l1;
    for (Index i = 0; i < b.n; ++i) {
      cert.x[i] = soft_threshold(center[i], l1.lambda * l1.weight(i) / sigma);
    }
  }
  // separable and one-dimensional per coordinate, so clamping is exact
  if (b.box) cert.x = b.box->project(cert.x);
  cert.subgrad_bound = 0.0;
  return cert;
}

BlockSolveCertificate LbfgsBlockSolver::solve(const BlockSubproblem& sub,
                                              const Vec& warm_start,
                                              const SolveTolerance& tol) const {
  const BlockSpec& b = *sub.block;
  if (!b.objective.smooth || b.objective.l1 || b.box) {
    throw ParameterError("L-BFGS block solver needs a smooth unconstrained block");
  }
  LbfgsOptions lo;
  lo.max_inner = opts_.max_inner;
  const bool exact = tol.exact();
  const double exact_tol = opts_.exact_grad_tol;
  auto res = lbfgs_minimize(
      subproblem_fg(sub), warm_start,
      [&](const Vec& x) { return exact ? exact_tol : tol.at(x); }, lo);
  if (!res.converged && !exact) {
    throw InnerSolverError("L-BFGS did not reach the inexactness threshold",
                           res.grad_norm, tol.at(res.x));
  }
  BlockSolveCertificate cert;
  cert.x = std::move(res.x);
  cert.subgrad_bound = res.grad_norm;
  cert.inner_iters = res.iters;
  return cert;
}

BlockSolveCertificate ProxGradientBlockSolver::solve(const BlockSubproblem& sub,
                                                     const Vec& warm_start,
                                                     const SolveTolerance& tol) const {
  const BlockSpec& b = *sub.block;
  const auto& l1 = b.objective.l1;
  const bool exact = tol.exact();
  auto target = [&](const Vec& x) { return exact ? opts_.exact_grad_tol : tol.at(x); };

  // prox of t * (l1 + box indicator)
  auto prox = [&](const Vec& v, double t) {
    Vec out = v;
    if (l1) {
      for (Index i = 0; i < b.n; ++i) {
        out[i] = soft_threshold(v[i], t * l1->lambda * l1->weight(i));
      }
    }
    if (b.box) out = b.box->project(out);
    return out;
  };
  auto smooth_value = [&](const Vec& x) {
    double v = sub.value(x);
    if (l1) v -= l1->value(x);
    return v;
  };

  BlockSolveCertificate cert;
  Vec x = prox(warm_start, 0.0);
  Vec z = x;
  double theta = 1.0;
  double L = 1.0;
  double best = sub.subgrad_dist(x);
  Vec best_x = x;
  double prev_obj = sub.value(x);
  const std::size_t budget = 20 * opts_.max_inner;

  for (std::size_t it = 0; it < budget; ++it) {
    if (best <= target(best_x)) break;
    const Vec gz = sub.smooth_gradient(z);
    const double fz = smooth_value(z);
    Vec xn;
    while (true) {
      xn = prox(z - gz / L, 1.0 / L);
      const Vec d = xn - z;
      if (smooth_value(xn) <= fz + gz.dot(d) + 0.5 * L * d.squaredNorm() + 1e-15 * std::abs(fz)) {
        break;
      }
      L *= 2.0;
      if (L > 1e300) break;
    }
    ++cert.inner_iters;
    const double obj = sub.value(xn);
    if (obj > prev_obj) {
      // adaptive restart
      theta = 1.0;
      z = x;
      continue;
    }
    const double theta_n = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    z = xn + ((theta - 1.0) / theta_n) * (xn - x);
    theta = theta_n;
    x = std::move(xn);
    prev_obj = obj;
    L *= 0.9;
    const double dist = sub.subgrad_dist(x);
    if (dist < best) {
      best = dist;
      best_x = x;
    }
  }
  if (best > target(best_x) && !exact) {
    throw InnerSolverError("proximal gradient did not reach the inexactness threshold",
                           best, target(best_x));
  }
  cert.x = std::move(best_x);
  cert.subgrad_bound = best;
  return cert;
}

std::vector<BlockSolverPtr> make_block_solvers(const Problem& problem,
                                               double alpha,
                                               const std::vector<double>& mus,
                                               InnerSolverOptions opts) {
  if (mus.size() != problem.num_blocks()) {
    throw DimensionError("need one proximal weight per block");
  }
  std::vector<BlockSolverPtr> out;
  out.reserve(problem.num_blocks());
  for (std::size_t k = 0; k < problem.num_blocks(); ++k) {
    const BlockSpec& b = problem.block(k);
    const auto& f = b.objective;
    const auto gamma = b.E.gram_scale();
    if (!f.smooth && gamma && alpha * *gamma + mus[k] > 0.0) {
      out.push_back(std::make_shared<ProxL1BlockSolver>());
    } else if (f.smooth && f.smooth->loss != SmoothLoss::logistic && !f.l1 && !b.box) {
      out.push_back(std::make_shared<QuadraticBlockSolver>(b, alpha, mus[k], opts));
    } else if (f.smooth && !f.l1 && !b.box) {
      out.push_back(std::make_shared<LbfgsBlockSolver>(opts));
    } else {
      out.push_back(std::make_shared<ProxGradientBlockSolver>(opts));
    }
  }
  return out;
}

std::vector<BlockSolverPtr> make_block_solvers(const Problem& problem,
                                               double alpha, double mu,
                                               InnerSolverOptions opts) {
  return make_block_solvers(problem, alpha,
                            std::vector<double>(problem.num_blocks(), mu), opts);
}

}  // namespace ada
