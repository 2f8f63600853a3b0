#pragma once

#include "ada/ada_core.hpp"
#include "ada/baselines.hpp"
#include "ada/diagnostics.hpp"
#include "ada/iada.hpp"
#include "ada/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ada {

// ---------------------------------------------------------------------------
// Random numbers
//
// Counter-based: draw i of stream s under seed is splitmix64 applied to
// seed + (s * 2^32 + i) * golden_gamma. Gaussians use Box-Muller on pairs of
// consecutive uniforms and keep both outputs.

class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64();
  // Uniform on (0, 1), 53 random bits, never exactly 0.
  double uniform();
  double gaussian();
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_;
};

std::uint64_t splitmix64(std::uint64_t x);

Mat gaussian_matrix(Index rows, Index cols, CounterRng& rng);
Vec gaussian_vector(Index n, CounterRng& rng);

// ---------------------------------------------------------------------------
// Instances

struct LassoInstance {
  Problem problem;
  Mat A;
  Vec b;
  Vec x0;
  double lambda = 0.0;
};

// Two-block splitting  min 1/2||A x1 - b||^2 + lambda ||x2||_1  s.t. x1 - x2 = 0.
Problem lasso_problem(const Mat& A, const Vec& b, double lambda);
// lambda = 0.1 ||A^T b||_inf
double lasso_lambda(const Mat& A, const Vec& b);
// Number of nonzeros in x0: floor(0.05 d), at least one.
Index lasso_support_size(Index d);
LassoInstance gen_lasso(Index n, Index d, std::uint64_t seed);

struct ExchangeInstance {
  Problem problem;
  BlockVecs x_star;
};

ExchangeInstance gen_exchange(std::size_t K, Index n, Index p, std::uint64_t seed);

struct LabeledData {
  DesignMatrix A;
  Vec labels;  // +1 / -1
};

// Dense Gaussian features, labels sign(A x_true + noise), unit Gaussian noise, sparse
// x_true (floor(0.1 d) nonzeros, at least one).
LabeledData gen_logreg_data(Index n, Index d, std::uint64_t seed);

// ---------------------------------------------------------------------------
// LIBSVM text format

struct LibsvmData {
  SparseMat A;
  Vec labels;
  Index n = 0;
  Index d = 0;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

LibsvmData read_libsvm(std::istream& in);
LibsvmData load_libsvm(const std::filesystem::path& path);
void write_libsvm(std::ostream& out, const SparseMat& A, const Vec& labels);

// ---------------------------------------------------------------------------
// Distributed logistic regression

struct RowBlock {
  DesignMatrix A;
  Vec b;
};

// Contiguous blocks: the first n mod N get ceil(n/N) rows, the rest floor(n/N).
std::vector<RowBlock> partition_rows(const DesignMatrix& A, const Vec& b, std::size_t N);

// N logistic blocks x_i with x_i - z = 0 plus the l1 block z (last).
Problem build_logreg_consensus(const std::vector<RowBlock>& blocks, double lambda);

// lambda_scale * ||A^T b||_inf
double logreg_lambda(const DesignMatrix& A, const Vec& labels, double lambda_scale = 0.1);

// sum_i ||x_i - z|| / (N ||z||), z = last block.
double consensus_ratio(const BlockVecs& x);

// F(z) = sum_i l_i(z) + lambda ||z||_1, evaluated on the consensus problem.
double consensus_objective(const Vec& z, const Problem& problem);

// Stops when the consensus ratio <= ratio_tol and
// |F(z) - F*| / max(1, |F*|) <= gap_tol.
StopPredicate consensus_stop(const Problem& problem, double f_star,
                             double ratio_tol = 1e-6, double gap_tol = 1e-10);

// ---------------------------------------------------------------------------
// Experiment configuration and driver

enum class Experiment { lasso, exchange, logreg };
enum class SolverKind { ada, iada, vsadmm, proxjadmm, admm2 };

struct ExperimentConfig {
  Experiment experiment = Experiment::lasso;
  // Dimensions. Unset values take the experiment defaults:
  // lasso n=200 d=800; exchange K=5 n=100 p=80; logreg n=2000 d=50 N=4.
  std::optional<Index> n;
  std::optional<Index> d;
  std::optional<std::size_t> K;
  std::optional<Index> p;
  std::optional<std::size_t> N;
  std::optional<std::string> libsvm;  // logreg data file instead of synthetic
  double lambda_scale = 0.1;
  std::uint64_t seed = 1;

  SolverKind solver = SolverKind::ada;
  std::optional<double> rho;  // default 5 for lasso, 10 otherwise
  std::optional<double> c;
  std::size_t max_iters = 1000;
  double stop_eps = 1e-8;
  // x_change | feasibility | both | max_iters | consensus (logreg only)
  std::string stop_mode = "x_change";
  unsigned threads = 1;

  InexactSchedule::Kind criterion = InexactSchedule::Kind::criterion_A;
  double eps0 = 1.0;
  double gamma = 1.5;
  std::string inner = "iterative";  // iterative | closed_form
  std::size_t max_inner = 500;

  double beta = 1.0;
  double gamma_damp = 1.0;
  double admm_step = 1.618;

  // High-accuracy reference run for the Fejer / ergodic / tail checks.
  bool reference = false;
  double reference_eps = 1e-12;
  std::size_t reference_max_iters = 50000;
  double tail_window = 0.25;

  std::string out = "out";

  void validate() const;
  Index dim_n() const;
  Index dim_d() const;
  std::size_t dim_K() const;
  Index dim_p() const;
  std::size_t dim_N() const;
  double rho_value() const;
  double c_value() const;
};

// Throws ParameterError on unknown keys, wrong types or bad values.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json(const ExperimentConfig& config);

Experiment parse_experiment(const std::string& s);
SolverKind parse_solver(const std::string& s);
InexactSchedule::Kind parse_criterion(const std::string& s);
std::string to_string(Experiment e);
std::string to_string(SolverKind s);
std::string to_string(InexactSchedule::Kind k);

struct BuiltInstance {
  Problem problem;
  std::optional<BlockVecs> x_star;  // known optimum (exchange)
  // Known saddle point of the lifted problem, used instead of a reference run.
  std::optional<IterateState> saddle;
};

// Saddle point (w, x, eta, zeta) = (E x*, x*, 0, 0) of an instance whose
// optimum x* has zero gradient in every block (exchange).
IterateState zero_gradient_saddle(const Problem& problem, const BlockVecs& x_star);

BuiltInstance build_instance(const ExperimentConfig& config);

struct SolveOutcome {
  BlockVecs x;
  Vec multiplier;
  Trace trace;
  RunStatus status = RunStatus::max_iters_reached;
  std::optional<IterateState> final_state;  // ADA-family solvers only
  double max_w_drift = 0.0;
  double E_norm = 0.0;
};

struct SolveHooks {
  IterationObserver ada_observer;
  BaselineObserver baseline_observer;
  StopPredicate extra_stop;
};

// Runs the configured solver on `problem` from the all-zero start.
SolveOutcome solve(const Problem& problem, const ExperimentConfig& config,
                   const SolveHooks& hooks = {});

// Exact ADA run at config.reference_eps, used as the reference saddle point.
SolveOutcome reference_solve(const Problem& problem, const ExperimentConfig& config);

struct ExperimentResult {
  SolveOutcome outcome;
  RateReport report;
  double wall_seconds = 0.0;
  std::optional<double> f_star;
  int exit_code = 2;
};

// Builds the instance, runs the solver, writes trace.csv, rate_report.json and
// summary.json into config.out. Exit code 0 when converged, 2 otherwise.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace ada
