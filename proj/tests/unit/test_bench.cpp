#include "ada/bench.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace ada;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("ada_test_bench_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("counter RNG is reproducible and stream-separated") {
  CounterRng a(7, 1), b(7, 1), c(7, 2), d(8, 1);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
  }
  CounterRng u(3);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = u.uniform();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CounterRng g(4);
  for (int i = 0; i < n; ++i) {
    const double v = g.gaussian();
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / n) < 0.05);
  CHECK(std::abs(s2 / n - 1.0) < 0.05);
  CounterRng k(5);
  for (int i = 0; i < 1000; ++i) CHECK(k.below(7) < 7);
  CHECK(splitmix64(0) != splitmix64(1));
}

TEST_CASE("lasso generator") {
  CHECK(lasso_support_size(800) == 40);
  CHECK(lasso_support_size(10) == 1);
  const LassoInstance a = gen_lasso(30, 60, 11);
  const LassoInstance b = gen_lasso(30, 60, 11);
  const LassoInstance c = gen_lasso(30, 60, 12);
  CHECK(a.A == b.A);
  CHECK(a.b == b.b);
  CHECK(a.A != c.A);
  CHECK((a.x0.array() != 0.0).count() == lasso_support_size(60));
  CHECK(a.lambda == doctest::Approx(0.1 * (a.A.transpose() * a.b).cwiseAbs().maxCoeff()));
  // b = A x0 + small noise
  CHECK((a.b - a.A * a.x0).norm() < 0.2 * std::sqrt(30.0));

  Mat A(2, 2);
  A << 1, 0, 0, 1;
  Vec bb(2);
  bb << 2, -1;
  CHECK(lasso_lambda(A, bb) == doctest::Approx(0.2));

  const Problem p = lasso_problem(a.A, a.b, a.lambda);
  CHECK(p.num_blocks() == 2);
  CHECK(p.block(1).objective.l1->lambda == a.lambda);
  CHECK(p.q().isZero());
}

TEST_CASE("exchange generator has a zero-gradient optimum") {
  const ExchangeInstance ex = gen_exchange(4, 12, 5, 3);
  REQUIRE(ex.x_star.size() == 4);
  Vec sum = Vec::Zero(5);
  for (std::size_t k = 0; k < 4; ++k) {
    sum += ex.x_star[k];
    CHECK(ex.problem.block(k).objective.smooth->gradient(ex.x_star[k]).norm() < 1e-10);
  }
  CHECK(sum.norm() < 1e-12);
  CHECK(objective(ex.x_star, ex.problem) < 1e-20);

  const IterateState s = zero_gradient_saddle(ex.problem, ex.x_star);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(s.eta[k].isZero());
    CHECK((s.w[k] - ex.x_star[k]).norm() == 0.0);
  }
}

TEST_CASE("logistic regression data and consensus problem") {
  const LabeledData data = gen_logreg_data(40, 6, 2);
  CHECK(data.A.rows() == 40);
  for (Index i = 0; i < 40; ++i) CHECK(std::abs(data.labels[i]) == 1.0);

  const auto parts = partition_rows(data.A, data.labels, 3);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].A.rows() == 14);
  CHECK(parts[1].A.rows() == 13);
  CHECK(parts[2].A.rows() == 13);
  CHECK(parts[1].b == data.labels.segment(14, 13));
  // stacking the parts back gives the original data
  Mat stacked(40, 6);
  Vec labels(40);
  Index row = 0;
  for (const auto& part : parts) {
    stacked.middleRows(row, part.A.rows()) = part.A.to_dense();
    labels.segment(row, part.A.rows()) = part.b;
    row += part.A.rows();
  }
  CHECK(stacked == data.A.to_dense());
  CHECK(labels == data.labels);
  CHECK_THROWS_AS(partition_rows(data.A, data.labels, 41), ParameterError);
  CHECK_THROWS_AS(partition_rows(data.A, data.labels, 0), ParameterError);

  const double lam = logreg_lambda(data.A, data.labels);
  const Problem p = build_logreg_consensus(parts, lam);
  REQUIRE(p.num_blocks() == 4);
  CHECK(p.m() == 18);
  // at z = 0 each logistic term is rows * log 2
  CHECK(consensus_objective(Vec::Zero(6), p) == doctest::Approx(40 * std::log(2.0)));
  CHECK(p.block(0).objective.value(Vec::Zero(6)) == doctest::Approx(14 * std::log(2.0)));

  // F(z) against a naive evaluation and its gradient against finite differences
  oracle::Random rng(1);
  const Vec z = rng.vec(6);
  const Mat Ad = data.A.to_dense();
  CHECK(consensus_objective(z, p) ==
        doctest::Approx(oracle::logistic_naive(Ad, data.labels, z) + lam * z.lpNorm<1>()).epsilon(1e-12));
  Vec grad = Vec::Zero(6);
  for (std::size_t i = 0; i < 3; ++i) grad += p.block(i).objective.smooth_gradient(z);
  const Vec fd = oracle::fd_gradient([&](const Vec& v) { return oracle::logistic_naive(Ad, data.labels, v); }, z);
  CHECK((grad - fd).norm() < 1e-6 * fd.norm());

  // consistent x_i = z satisfy the coupling
  BlockVecs x(4, z);
  CHECK(constraint_residual(x, p).norm() == 0.0);
  CHECK(consensus_ratio(x) == 0.0);
  x[0] = z + Vec::Constant(6, 1.0);
  CHECK(consensus_ratio(x) == doctest::Approx(std::sqrt(6.0) / (3 * z.norm())));
}

TEST_CASE("LIBSVM reading") {
  std::istringstream in("+1 1:0.5 3:-2\n\n-1 2:1e-3\r\n0 4:7\n");
  const LibsvmData d = read_libsvm(in);
  CHECK(d.n == 3);
  CHECK(d.d == 4);
  CHECK(d.labels[0] == 1.0);
  CHECK(d.labels[1] == -1.0);
  CHECK(d.labels[2] == -1.0);
  CHECK(d.A.coeff(0, 2) == -2.0);
  CHECK(d.A.coeff(1, 1) == 1e-3);
  CHECK(d.A.coeff(2, 3) == 7.0);
  CHECK(d.A.nonZeros() == 4);

  auto fails_on = [](const std::string& text, std::size_t line) {
    std::istringstream s(text);
    try {
      read_libsvm(s);
    } catch (const ParseError& e) {
      return e.line() == line;
    }
    return false;
  };
  CHECK(fails_on("1 1:1\n1 0:1\n", 2));
  CHECK(fails_on("1 2:1 2:3\n", 1));
  CHECK(fails_on("1 3:1 2:3\n", 1));
  CHECK(fails_on("1 1:1\nx 1:1\n", 2));
  CHECK(fails_on("1 1:abc\n", 1));
  CHECK(fails_on("1 1\n", 1));
  std::istringstream empty("\n\n");
  CHECK_THROWS_AS(read_libsvm(empty), Error);
  CHECK_THROWS_AS(load_libsvm("/nonexistent/file.svm"), Error);
}

TEST_CASE("LIBSVM round trip") {
  oracle::Random rng(2);
  Mat D = rng.mat(5, 7);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 7; ++j)
      if ((i * 7 + j) % 3) D(i, j) = 0.0;
  D(4, 6) = 1.0 / 3;
  const SparseMat A = D.sparseView();
  Vec labels(5);
  labels << 1, -1, -1, 1, 1;
  std::stringstream ss;
  write_libsvm(ss, A, labels);
  const LibsvmData back = read_libsvm(ss);
  CHECK(back.labels == labels);
  CHECK(Mat(back.A) == D);
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(R"({"experiment": "exchange", "K": 3, "rho": 2.5, "solver": "vsadmm"})");
  CHECK(c.experiment == Experiment::exchange);
  CHECK(c.dim_K() == 3);
  CHECK(c.dim_n() == 100);
  CHECK(c.rho_value() == 2.5);
  CHECK(c.c_value() == 10.0);
  CHECK(c.solver == SolverKind::vsadmm);

  CHECK(parse_config("{}").rho_value() == 5.0);
  CHECK_THROWS_AS(parse_config(R"({"rh0": 1})"), ParameterError);
  CHECK_THROWS_AS(parse_config(R"({"rho": "big"})"), ParameterError);
  CHECK_THROWS_AS(parse_config(R"({"max_iters": 1.5})"), ParameterError);
  CHECK_THROWS_AS(parse_config(R"({"max_iters": -1})"), ParameterError);
  CHECK_THROWS_AS(parse_config("[1]"), ParameterError);
  CHECK_THROWS_AS(parse_config("{"), ParameterError);
  CHECK_THROWS_AS(parse_config(R"({"solver": "admm2", "experiment": "exchange"})"), ParameterError);
  CHECK_THROWS_AS(parse_config(R"({"stop_mode": "consensus"})"), ParameterError);
  CHECK_THROWS_AS(parse_config(R"({"gamma_damp": 2.0})"), ParameterError);
  CHECK_THROWS_AS(parse_config(R"({"experiment": "sudoku"})"), ParameterError);

  // to_json output parses back to the same settings
  ExperimentConfig e;
  e.experiment = Experiment::logreg;
  e.N = 3;
  e.solver = SolverKind::iada;
  e.criterion = InexactSchedule::Kind::criterion_B;
  e.stop_mode = "consensus";
  const ExperimentConfig r = parse_config(to_json(e));
  CHECK(r.dim_N() == 3);
  CHECK(r.solver == SolverKind::iada);
  CHECK(r.criterion == InexactSchedule::Kind::criterion_B);
  CHECK(to_json(r) == to_json(e));
}

TEST_CASE("name parsing") {
  for (auto s : {SolverKind::ada, SolverKind::iada, SolverKind::vsadmm, SolverKind::proxjadmm, SolverKind::admm2}) {
    CHECK(parse_solver(to_string(s)) == s);
  }
  for (auto e : {Experiment::lasso, Experiment::exchange, Experiment::logreg}) CHECK(parse_experiment(to_string(e)) == e);
  CHECK(parse_criterion("A") == InexactSchedule::Kind::criterion_A);
  CHECK(parse_criterion("B") == InexactSchedule::Kind::criterion_B);
  CHECK_THROWS_AS(parse_solver("newton"), ParameterError);
}

TEST_CASE("run_experiment with max_iters = 0 writes a header-only trace") {
  ExperimentConfig c;
  c.n = 10;
  c.d = 20;
  c.max_iters = 0;
  c.out = scratch_dir("zero").string();
  const ExperimentResult r = run_experiment(c);
  CHECK(r.exit_code == 2);
  CHECK(slurp(fs::path(c.out) / "trace.csv") == "iter,objective,residual,delta_g,x_rel,feas_rel\n");
  const auto s = nlohmann::json::parse(slurp(fs::path(c.out) / "summary.json"));
  CHECK(s["iterations"] == 0);
  fs::remove_all(c.out);
}

TEST_CASE("run_experiment is deterministic and reports convergence") {
  for (SolverKind solver : {SolverKind::ada, SolverKind::iada, SolverKind::vsadmm, SolverKind::proxjadmm, SolverKind::admm2}) {
    CAPTURE(to_string(solver));
    ExperimentConfig c;
    c.n = 15;
    c.d = 30;
    c.solver = solver;
    c.rho = c.c = 20.0;
    c.max_iters = 20000;
    c.stop_eps = 1e-9;
    c.stop_mode = "both";
    c.out = scratch_dir("a").string();
    const ExperimentResult a = run_experiment(c);
    const std::string ta = slurp(fs::path(c.out) / "trace.csv");
    c.out = scratch_dir("b").string();
    const ExperimentResult b = run_experiment(c);
    const std::string tb = slurp(fs::path(c.out) / "trace.csv");
    CHECK(a.exit_code == 0);
    CHECK(ta == tb);
    CHECK(!ta.empty());
    const auto s = nlohmann::json::parse(slurp(fs::path(c.out) / "summary.json"));
    CHECK(s["status"] == "converged");
    CHECK(s["kkt_residual"].get<double>() < 1e-5);
    fs::remove_all(scratch_dir("a"));
    fs::remove_all(scratch_dir("b"));
  }
}

TEST_CASE("exchange runs with the analytic reference fill the rate report") {
  ExperimentConfig c;
  c.experiment = Experiment::exchange;
  c.K = 3;
  c.n = 5;
  c.p = 20;
  c.max_iters = 60;
  c.stop_mode = "max_iters";
  c.reference = true;
  c.out = scratch_dir("ex").string();
  const ExperimentResult r = run_experiment(c);
  CHECK(r.report.monotone_ok.value_or(false));
  CHECK(r.report.fejer_ok.value_or(false));
  REQUIRE(r.report.ergodic_max_violation);
  CHECK(*r.report.ergodic_max_violation <= 0.0);
  REQUIRE(r.report.tail_ratio_theta);
  CHECK(*r.report.tail_ratio_theta < 1.0);
  // each A_k has full column rank here, so the optimum is unique
  const auto s = nlohmann::json::parse(slurp(fs::path(c.out) / "summary.json"));
  CHECK(s["distance_to_known_optimum"].get<double>() < 1e-3);
  fs::remove_all(c.out);
}
