#include "ada/block_solvers.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace ada;

namespace {

BlockSpec ls_block(Mat A, Vec b, CouplingMatrix E) {
  BlockSpec s;
  s.n = A.cols();
  s.E = std::move(E);
  s.objective.smooth = SmoothPart{DesignMatrix(std::move(A)), SmoothLoss::least_squares, std::move(b)};
  return s;
}

Vec signs(Vec v) {
  return v.unaryExpr([](double t) { return t > 0 ? 1.0 : -1.0; });
}

}  // namespace

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  CHECK(soft_threshold(0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-1.0, 1.0) == 0.0);
  CHECK(soft_threshold(1.0, 1.0) == 0.0);
  CHECK(soft_threshold(2.5, 0.0) == 2.5);
  CHECK_THROWS_AS(soft_threshold(1.0, -0.1), ParameterError);

  Vec a(3);
  a << -2.0, 0.2, 4.0;
  const Vec s = soft_threshold(a, 0.5);
  CHECK(s[0] == -1.5);
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 3.5);
}

TEST_CASE("soft_threshold is the scalar prox of kappa |.|") {
  oracle::Random rng(1);
  for (int t = 0; t < 50; ++t) {
    const double a = rng.uniform(-5, 5), kappa = rng.uniform(0, 3);
    const double ref = oracle::golden_section(
        [&](double x) { return kappa * std::abs(x) + 0.5 * (x - a) * (x - a); }, -10, 10);
    CHECK(soft_threshold(a, kappa) == doctest::Approx(ref).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("l1_prox_block minimizes its scalar objective coordinatewise") {
  oracle::Random rng(2);
  for (int t = 0; t < 20; ++t) {
    const Index n = 4;
    const Vec w = rng.vec(n), xp = rng.vec(n), y = rng.vec(n);
    const double rho = rng.uniform(0.2, 8), c = rng.uniform(0.2, 8), lam = rng.uniform(0, 2);
    const double sign = t % 2 ? 1.0 : -1.0;
    const Vec x = l1_prox_block(w, xp, y, rho, c, lam, sign);
    for (Index i = 0; i < n; ++i) {
      auto phi = [&](double v) {
        const double r = sign * v - w[i] + 2.0 * y[i] / rho;
        return lam * std::abs(v) + rho / 4.0 * r * r + (v - xp[i]) * (v - xp[i]) / (2.0 * c);
      };
      CHECK(x[i] == doctest::Approx(oracle::golden_section(phi, -50, 50)).epsilon(1e-7).scale(1.0));
    }
  }
  CHECK_THROWS_AS(l1_prox_block(Vec::Zero(1), Vec::Zero(1), Vec::Zero(1), 1, 1, 1, 2.0), ParameterError);
  CHECK_THROWS_AS(l1_prox_block(Vec::Zero(1), Vec::Zero(1), Vec::Zero(1), 0, 1, 1, 1.0), ParameterError);
}

TEST_CASE("CachedQuadSolver primal and Woodbury paths match a dense solve") {
  oracle::Random rng(3);
  for (auto [r, c] : {std::pair<Index, Index>{10, 4}, {4, 10}, {6, 6}}) {
    const Mat A = rng.mat(r, c);
    const Vec b = rng.vec(r), rhs = rng.vec(c);
    const double sigma = 0.7;
    const CachedQuadSolver s(DesignMatrix(A), b, sigma);
    CHECK((s.mode() == CachedQuadSolver::Mode::woodbury) == (c > r));
    Mat H = A.transpose() * A;
    H.diagonal().array() += sigma;
    const Vec ref = H.fullPivLu().solve(rhs);
    CHECK((s.solve(rhs) - ref).norm() <= 1e-10 * ref.norm());
    CHECK((s.At_b() - A.transpose() * b).norm() <= 1e-12 * (1.0 + b.norm()));
  }
  CHECK_THROWS_AS(CachedQuadSolver(DesignMatrix(Mat::Ones(2, 2)), Vec::Zero(2), 0.0), ParameterError);
  CHECK_THROWS_AS(CachedQuadSolver(DesignMatrix(Mat::Ones(2, 2)), Vec::Zero(3), 1.0), DimensionError);
}

TEST_CASE("quad_solve is the exact ADA least-squares step") {
  oracle::Random rng(4);
  for (auto [r, c] : {std::pair<Index, Index>{8, 3}, {3, 8}}) {
    const Mat A = rng.mat(r, c);
    const Vec b = rng.vec(r), w = rng.vec(c), x = rng.vec(c), y = rng.vec(c);
    const double rho = 2.5, cc = 0.8;
    const CachedQuadSolver s(DesignMatrix(A), b, rho / 2 + 1 / cc);
    const Vec got = quad_solve(s, w, x, y, rho, cc);
    // same minimizer written as the generic block subproblem with target w - 2y/rho
    const Vec ref = oracle::quadratic_block_min(A, b, Mat::Identity(c, c), w - 2.0 * y / rho,
                                                rho / 2, 1 / cc, x);
    CHECK((got - ref).norm() <= 1e-10 * (1.0 + ref.norm()));
    CHECK_THROWS_AS(quad_solve(s, w, x, y, rho + 1, cc), ParameterError);
  }
}

TEST_CASE("min_subgradient_norm") {
  Vec x(3), g(3);
  x << 1.0, -2.0, 0.0;
  g << 0.5, 0.5, 0.5;
  // no l1: plain gradient norm
  CHECK(min_subgradient_norm(x, g, std::nullopt, std::nullopt) == doctest::Approx(std::sqrt(0.75)));
  // lambda = 1: 1.5, -0.5, interval [-0.5, 1.5] contains 0
  CHECK(subgrad_dist_l1(x, g, 1.0) == doctest::Approx(std::sqrt(2.5)));
  // weights
  const L1Part weighted{1.0, Vec::Constant(3, 0.25)};
  // 0.75, 0.25, [0.25, 0.75] -> 0.25
  CHECK(min_subgradient_norm(x, g, weighted, std::nullopt) ==
        doctest::Approx(std::sqrt(0.5625 + 0.0625 + 0.0625)));
  // box: x at the lower bound absorbs positive subgradients only
  Box box{Vec::Constant(3, -2.0), Vec::Constant(3, 1.0)};
  // coordinate 0 at hi: [0.5, inf) -> still 0.5 distance? lower end 0.5 > 0 -> 0.5
  // coordinate 1 at lo: (-inf, 0.5] contains 0
  CHECK(min_subgradient_norm(x, g, std::nullopt, box) == doctest::Approx(std::sqrt(0.25 + 0.25)));
  Vec gneg = -g;
  // coordinate 0 at hi with -0.5: [-0.5, inf) contains 0
  CHECK(min_subgradient_norm(x, gneg, std::nullopt, box) == doctest::Approx(std::sqrt(0.25 + 0.25)));
  CHECK_THROWS_AS(min_subgradient_norm(x, Vec::Zero(2), std::nullopt, std::nullopt), DimensionError);
}

TEST_CASE("subgrad_dist is zero at the exact subproblem minimizer") {
  oracle::Random rng(5);
  const Mat A = rng.mat(6, 4);
  const BlockSpec blk = ls_block(A, rng.vec(6), CouplingMatrix::dense(rng.mat(5, 4)));
  BlockSubproblem sub{&blk, 1.3, rng.vec(5), 0.4, rng.vec(4)};
  const Vec xs = oracle::quadratic_block_min(A, blk.objective.smooth->data, blk.E.to_dense(),
                                             sub.target, sub.alpha, sub.mu, sub.anchor);
  CHECK(sub.subgrad_dist(xs) < 1e-10);
  const Vec z = xs + rng.vec(4);
  const Vec fd = oracle::fd_gradient([&](const Vec& v) { return sub.value(v); }, z);
  CHECK((sub.smooth_gradient(z) - fd).norm() < 1e-6 * fd.norm());
  CHECK(sub.subgrad_dist(z) == doctest::Approx(sub.smooth_gradient(z).norm()));
}

TEST_CASE("L-BFGS matches finite differences and reaches the tolerance") {
  // Rosenbrock in 4 dimensions
  auto rosen = [](const Vec& x, Vec& g) {
    double f = 0;
    g = Vec::Zero(x.size());
    for (Index i = 0; i + 1 < x.size(); ++i) {
      const double a = x[i + 1] - x[i] * x[i], b = 1 - x[i];
      f += 100 * a * a + b * b;
      g[i] += -400 * a * x[i] - 2 * b;
      g[i + 1] += 200 * a;
    }
    return f;
  };
  Vec x0 = Vec::Constant(4, -1.2);
  Vec g;
  rosen(x0, g);
  const Vec fd = oracle::fd_gradient([&](const Vec& v) { Vec t; return rosen(v, t); }, x0);
  CHECK((g - fd).norm() < 1e-4 * g.norm());

  const LbfgsResult r = lbfgs_minimize(rosen, x0, 1e-8, 2000);
  CHECK(r.converged);
  CHECK(r.grad_norm <= 1e-8);
  CHECK((r.x - Vec::Ones(4)).norm() < 1e-6);
}

TEST_CASE("L-BFGS on a logistic subproblem agrees with the oracle gradient") {
  oracle::Random rng(6);
  const Mat A = rng.mat(30, 5);
  const Vec labels = signs(rng.vec(30));
  BlockSpec blk;
  blk.n = 5;
  blk.E = CouplingMatrix::identity(5);
  blk.objective.smooth = SmoothPart{DesignMatrix(A), SmoothLoss::logistic, labels};
  BlockSubproblem sub{&blk, 0.5, rng.vec(5), 0.1, rng.vec(5)};
  const LbfgsBlockSolver solver;
  const auto cert = solver.solve(sub, Vec::Zero(5), SolveTolerance{});
  const Vec fd = oracle::fd_gradient(
      [&](const Vec& v) {
        return oracle::logistic_naive(A, labels, v) + 0.25 * (v - sub.target).squaredNorm() +
               0.05 * (v - sub.anchor).squaredNorm();
      },
      cert.x);
  CHECK(fd.norm() < 1e-6);
  CHECK(cert.subgrad_bound <= 1e-10);
}

TEST_CASE("the certificate bounds the distance to the exact minimizer") {
  // phi is (mu + alpha * sigma_min(E)^2)-strongly convex, so
  // ||x - x*|| <= dist(0, d phi(x)) / modulus.
  oracle::Random rng(7);
  for (int t = 0; t < 10; ++t) {
    const Mat A = rng.mat(5, 4);
    const BlockSpec blk = ls_block(A, rng.vec(5), CouplingMatrix::identity(4));
    const double alpha = rng.uniform(0.5, 3), mu = rng.uniform(0.1, 1);
    BlockSubproblem sub{&blk, alpha, rng.vec(4), mu, rng.vec(4)};
    InnerSolverOptions opts;
    opts.strategy = InnerStrategy::iterative;
    const QuadraticBlockSolver solver(blk, alpha, mu, opts);
    const double tol = 1e-3;
    const auto cert = solver.solve(sub, Vec::Zero(4), SolveTolerance{tol, false, {}});
    const Vec xs = oracle::quadratic_block_min(A, blk.objective.smooth->data, Mat::Identity(4, 4),
                                               sub.target, alpha, mu, sub.anchor);
    CHECK(cert.subgrad_bound <= tol);
    CHECK(sub.subgrad_dist(cert.x) <= cert.subgrad_bound * (1 + 1e-8) + 1e-14);
    CHECK((cert.x - xs).norm() <= cert.subgrad_bound / (alpha + mu) + 1e-12);
  }
}

TEST_CASE("SolveTolerance scaled by the step") {
  SolveTolerance t{0.5, true, Vec::Zero(2)};
  Vec x(2);
  x << 0.3, 0.4;
  CHECK(t.at(x) == doctest::Approx(0.25));
  x << 3.0, 4.0;
  CHECK(t.at(x) == doctest::Approx(0.5));
  CHECK_FALSE(t.exact());
  CHECK(SolveTolerance{}.exact());
}

TEST_CASE("block solvers reproduce the dense oracle on each block kind") {
  oracle::Random rng(8);
  const Index n = 4;
  const double alpha = 1.7, mu = 0.6;

  SUBCASE("quadratic with a dense coupling") {
    const Mat A = rng.mat(3, n);
    const BlockSpec blk = ls_block(A, rng.vec(3), CouplingMatrix::dense(rng.mat(6, n)));
    BlockSubproblem sub{&blk, alpha, rng.vec(6), mu, rng.vec(n)};
    const QuadraticBlockSolver solver(blk, alpha, mu);
    const auto cert = solver.solve(sub, Vec::Zero(n), SolveTolerance{});
    const Vec ref = oracle::quadratic_block_min(A, blk.objective.smooth->data, blk.E.to_dense(),
                                                sub.target, alpha, mu, sub.anchor);
    CHECK((cert.x - ref).norm() < 1e-10);
    BlockSubproblem other = sub;
    other.alpha = 2 * alpha;
    CHECK_THROWS_AS(solver.solve(other, Vec::Zero(n), SolveTolerance{}), ParameterError);
  }
  SUBCASE("quadratic loss without data") {
    const Mat A = rng.mat(3, n);
    BlockSpec blk;
    blk.n = n;
    blk.E = CouplingMatrix::identity(n, -1.0);
    blk.objective.smooth = SmoothPart{DesignMatrix(A), SmoothLoss::quadratic, Vec()};
    BlockSubproblem sub{&blk, alpha, rng.vec(n), mu, rng.vec(n)};
    const QuadraticBlockSolver solver(blk, alpha, mu);
    const auto cert = solver.solve(sub, Vec::Zero(n), SolveTolerance{});
    const Vec ref = oracle::quadratic_block_min(A, Vec::Zero(3), -Mat::Identity(n, n), sub.target,
                                                alpha, mu, sub.anchor);
    CHECK((cert.x - ref).norm() < 1e-10);
  }
  SUBCASE("weighted l1 with a box, stacked coupling") {
    BlockSpec blk;
    blk.n = n;
    blk.E = CouplingMatrix::stacked(3, n, -1.0);
    blk.objective.l1 = L1Part{0.4, rng.vec(n).cwiseAbs()};
    blk.box = Box{Vec::Constant(n, -0.3), Vec::Constant(n, 0.5)};
    BlockSubproblem sub{&blk, alpha, rng.vec(3 * n), mu, rng.vec(n)};
    const ProxL1BlockSolver solver;
    const auto cert = solver.solve(sub, Vec::Zero(n), SolveTolerance{});
    for (Index i = 0; i < n; ++i) {
      auto phi = [&](double v) {
        Vec x = cert.x;
        x[i] = v;
        return sub.value(x);
      };
      CHECK(cert.x[i] == doctest::Approx(oracle::golden_section(phi, -0.3, 0.5)).epsilon(1e-7).scale(1.0));
    }
    CHECK(sub.subgrad_dist(cert.x) < 1e-12);
  }
  SUBCASE("logistic with l1 via proximal gradient") {
    const Mat A = rng.mat(20, n);
    BlockSpec blk;
    blk.n = n;
    blk.E = CouplingMatrix::identity(n);
    blk.objective.smooth = SmoothPart{DesignMatrix(A), SmoothLoss::logistic, signs(rng.vec(20))};
    blk.objective.l1 = L1Part{2.0, Vec()};
    BlockSubproblem sub{&blk, alpha, rng.vec(n), mu, rng.vec(n)};
    const ProxGradientBlockSolver solver;
    const auto exact = solver.solve(sub, Vec::Zero(n), SolveTolerance{});
    CHECK(exact.subgrad_bound <= 1e-10);
    CHECK(sub.subgrad_dist(exact.x) == doctest::Approx(exact.subgrad_bound));
    // perturbing any coordinate does not lower the objective
    const double f0 = sub.value(exact.x);
    for (Index i = 0; i < n; ++i) {
      for (double h : {-1e-4, 1e-4}) {
        Vec x = exact.x;
        x[i] += h;
        CHECK(sub.value(x) >= f0 - 1e-12);
      }
    }
  }
}

TEST_CASE("make_block_solvers picks by structure") {
  oracle::Random rng(9);
  const Index n = 3;
  BlockSpec quad = ls_block(rng.mat(4, n), rng.vec(4), CouplingMatrix::identity(n));
  BlockSpec logi;
  logi.n = n;
  logi.E = CouplingMatrix::identity(n);
  logi.objective.smooth = SmoothPart{DesignMatrix(rng.mat(4, n)), SmoothLoss::logistic, signs(rng.vec(4))};
  BlockSpec lasso = quad;
  lasso.objective.l1 = L1Part{1.0, Vec()};
  BlockSpec l1;
  l1.n = n;
  l1.E = CouplingMatrix::identity(n, -1.0);
  l1.objective.l1 = L1Part{1.0, Vec()};
  const Problem p({quad, logi, lasso, l1}, Vec::Zero(n));
  const auto solvers = make_block_solvers(p, 1.0, 0.5);
  CHECK(solvers[0]->name() == "quadratic");
  CHECK(solvers[1]->name() == "lbfgs");
  CHECK(solvers[2]->name() == "prox_gradient");
  CHECK(solvers[3]->name() == "l1_prox");
  CHECK_THROWS_AS(make_block_solvers(p, 1.0, std::vector<double>{1.0}), DimensionError);
}
