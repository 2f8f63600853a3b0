#include "ada/diagnostics.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <utility>

using namespace ada;

namespace {

// 1/2||A x1 - b||^2 + lambda ||x2||_1, x1 - x2 = 0
Problem lasso(const Mat& A, const Vec& b, double lambda) {
  BlockSpec ls;
  ls.n = A.cols();
  ls.E = CouplingMatrix::identity(A.cols());
  ls.objective.smooth = SmoothPart{DesignMatrix(A), SmoothLoss::least_squares, b};
  BlockSpec z;
  z.n = A.cols();
  z.E = CouplingMatrix::identity(A.cols(), -1.0);
  z.objective.l1 = L1Part{lambda, Vec()};
  return Problem({ls, z}, Vec::Zero(A.cols()));
}

}  // namespace

TEST_CASE("monotone decrease check") {
  const std::vector<double> dec{5, 4, 3, 3, 1};
  const auto ok = verify_monotone(dec);
  CHECK(ok.ok);
  CHECK(ok.violations == 0);
  CHECK_FALSE(ok.first_violation);

  // swapping two entries breaks it at the later position (1-based)
  std::vector<double> perm = dec;
  std::swap(perm[1], perm[3]);  // 5 3 3 4 1
  const auto bad = verify_monotone(perm);
  CHECK_FALSE(bad.ok);
  CHECK(bad.violations == 1);
  CHECK(*bad.first_violation == 4);

  // rounding-level increases are tolerated
  CHECK(verify_monotone(std::vector<double>{1.0, 1.0 + 1e-12, 0.5}).ok);
  CHECK_THROWS_AS(verify_monotone(std::vector<double>{1.0, 0.5}), DiagnosticError);
  // wiggles far below the largest value are ignored
  CHECK(verify_monotone(std::vector<double>{1.0, 1e-30, 3e-30, 1e-31}).ok);
  CHECK_FALSE(verify_monotone(std::vector<double>{1.0, 1e-30, 3e-30, 1e-31}, 1e-9, 0.0).ok);

  Trace t(4);
  for (std::size_t i = 0; i < 4; ++i) t[i].delta_g_norm_sq = 1.0 / static_cast<double>(i + 1);
  CHECK(verify_monotone(t).ok);
  CHECK(deltas_of(t)[2] == doctest::Approx(1.0 / 3));
}

TEST_CASE("summability of a_nu = 1/nu^2") {
  std::vector<double> a;
  for (int nu = 1; nu <= 100; ++nu) a.push_back(1.0 / (nu * nu));
  const auto rep = summability(a, 0.1);
  REQUIRE(rep.partial_sums.size() == 100);
  long double s = 0;
  for (double v : a) s += v;
  CHECK(rep.partial_sums.back() == doctest::Approx(static_cast<double>(s)).epsilon(1e-14));
  for (std::size_t i = 1; i < 100; ++i) CHECK(rep.partial_sums[i] >= rep.partial_sums[i - 1]);
  // nu a_nu = 1/nu: medians of 1/1..1/10 and 1/91..1/100
  CHECK(rep.first_window_median == doctest::Approx(0.5 * (1.0 / 5 + 1.0 / 6)));
  CHECK(rep.last_window_median == doctest::Approx(0.5 * (1.0 / 95 + 1.0 / 96)));
  double tail = 0;
  for (int nu = 91; nu <= 100; ++nu) tail += 1.0 / (nu * nu);
  CHECK(rep.tail_share == doctest::Approx(tail / static_cast<double>(s)));

  CHECK_THROWS_AS(summability(std::vector<double>{}), DiagnosticError);
  CHECK_THROWS_AS(summability(a, 0.0), ParameterError);
  // short traces still get a one-element window
  const auto one = summability(std::vector<double>{2.0, 1.0}, 0.1);
  CHECK(one.first_window_median == 2.0);
  CHECK(one.last_window_median == 2.0);
}

TEST_CASE("Fejer check") {
  CHECK(verify_fejer(std::vector<double>{4, 2, 1, 1}).ok);
  const auto bad = verify_fejer(std::vector<double>{4, 2, 3, 1});
  CHECK_FALSE(bad.ok);
  CHECK(*bad.first_violation == 2);
  CHECK(bad.max_rel_increase == doctest::Approx(0.5));
  CHECK(verify_fejer(std::vector<double>{}).ok);
  CHECK(verify_fejer(std::vector<double>{1.0, 1e-15, 2e-15}).ok);
  CHECK_FALSE(verify_fejer(std::vector<double>{1.0, 1e-15, 2e-15}, 1e-8, 0.0).ok);
}

TEST_CASE("linear tail of a geometric sequence") {
  std::vector<double> d;
  for (int i = 0; i < 40; ++i) d.push_back(std::pow(0.5, i));
  const auto rep = verify_linear_tail(d, 0.25);
  CHECK(rep.theta == doctest::Approx(0.5));
  CHECK(rep.pairs_used == 9);

  // pairs below the floor are skipped
  std::vector<double> tiny(10, 1e-15);
  CHECK_THROWS_AS(verify_linear_tail(tiny, 0.5), DiagnosticError);
  CHECK_THROWS_AS(verify_linear_tail(std::vector<double>{1.0}, 0.5), DiagnosticError);
  CHECK_THROWS_AS(verify_linear_tail(d, 1.5), ParameterError);
}

TEST_CASE("ergodic bound bookkeeping") {
  oracle::Random rng(1);
  const Mat A = rng.mat(6, 3);
  const Problem p = lasso(A, rng.vec(6), 0.3);
  IterateState ref = IterateState::zeros(p);
  const Vec xr = rng.vec(3);
  ref.x = {xr, xr};
  ref.w = {xr, -xr};
  const Vec eta = rng.vec(3);
  ref.eta = {eta, eta};
  ref.y = ref.eta;
  ref.zeta_bar = eta;
  const IterateState init = IterateState::zeros(p);

  ErgodicMonitor mon(p, ref, init, 2.0, 0.5);
  const double d0 = g_distance_sq(ref, init, 2.0, 0.5);
  // the reference itself: lhs = 0 for every N
  for (int i = 0; i < 5; ++i) mon.add(ref.x);
  for (std::size_t N = 1; N <= 5; ++N) {
    CHECK(mon.report().lhs[N - 1] == doctest::Approx(0.0).scale(1.0));
    CHECK(mon.report().rhs[N - 1] == doctest::Approx(d0 / static_cast<double>(N)));
  }
  CHECK(mon.report().max_violation == doctest::Approx(-d0 / 5));

  // arbitrary iterates against a naive evaluation of the mean
  std::vector<BlockVecs> xs;
  for (int i = 0; i < 4; ++i) xs.push_back({rng.vec(3), rng.vec(3)});
  const auto rep = verify_ergodic(xs, ref, init, p, 2.0, 0.5);
  BlockVecs mean{Vec::Zero(3), Vec::Zero(3)};
  for (const auto& x : xs) {
    mean[0] += x[0] / 4;
    mean[1] += x[1] / 4;
  }
  const double f = oracle::block_value_naive(p.block(0), mean[0]) + oracle::block_value_naive(p.block(1), mean[1]);
  const double fr = oracle::block_value_naive(p.block(0), xr) + oracle::block_value_naive(p.block(1), xr);
  CHECK(rep.lhs[3] == doctest::Approx(f + eta.dot(mean[0] - mean[1]) - fr).epsilon(1e-12));

  IterateState empty;
  CHECK_THROWS_AS(ErgodicMonitor(p, empty, init, 1.0, 1.0), DiagnosticError);
}

TEST_CASE("G-distance recorder") {
  oracle::Random rng(2);
  const Problem p = lasso(rng.mat(4, 2), rng.vec(4), 0.1);
  IterateState ref = IterateState::zeros(p);
  ref.x[0] = rng.vec(2);
  GDistanceRecorder rec(ref, 3.0, 2.0);
  rec(0, IterateState::zeros(p));
  rec(1, ref);
  REQUIRE(rec.distances().size() == 2);
  CHECK(rec.distances()[0] == doctest::Approx(ref.x[0].norm() / std::sqrt(2.0)));
  CHECK(rec.distances()[1] == 0.0);
}

TEST_CASE("KKT residual") {
  oracle::Random rng(3);
  const Mat A = rng.mat(5, 3);
  SUBCASE("zero data: the origin is optimal") {
    const Problem p = lasso(A, Vec::Zero(5), 1.0);
    CHECK(kkt_residual({Vec::Zero(3), Vec::Zero(3)}, Vec::Zero(3), p) == 0.0);
  }
  SUBCASE("hand-assembled components") {
    const Vec b = rng.vec(5);
    const Problem p = lasso(A, b, 0.5);
    Vec x1(3), x2(3), y(3);
    x1 << 1.0, 0.0, -1.0;
    x2 << 0.5, 0.0, 0.0;
    y << 0.2, -0.1, 0.3;
    const Vec r = x1 - x2;
    const Vec g1 = A.transpose() * (A * x1 - b) + y;
    // block 2: -y + 0.5 * d|x2|; coordinates 2,3 at zero absorb |.| <= 0.5
    double d2 = std::pow(-y[0] + 0.5, 2);
    for (int i = 1; i < 3; ++i) d2 += std::pow(std::max(0.0, std::abs(y[i]) - 0.5), 2);
    const double ref = std::sqrt(r.squaredNorm() + g1.squaredNorm() + d2);
    CHECK(kkt_residual({x1, x2}, y, p) == doctest::Approx(ref).epsilon(1e-13));
    CHECK_THROWS_AS(kkt_residual({x1, x2}, Vec::Zero(2), p), DimensionError);
  }
}

TEST_CASE("rate report JSON") {
  RateReport r;
  r.monotone_ok = true;
  r.partial_sums = {1.0, 1.5};
  r.nu_a_nu_medians = {0.3, 0.01};
  r.tail_ratio_theta = 0.9;
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j["monotone_ok"] == true);
  CHECK(j["first_violation"].is_null());
  CHECK(j["fejer_ok"].is_null());
  CHECK(j["ergodic_max_violation"].is_null());
  CHECK(j["partial_sums"].size() == 2);
  CHECK(j["nu_a_nu_medians"][1] == 0.01);
  CHECK(j["tail_ratio_theta"] == 0.9);
}
