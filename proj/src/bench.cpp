#include "ada/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

namespace ada {

// ---------------------------------------------------------------------------
// Random numbers

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t CounterRng::next_u64() {
  const std::uint64_t ctr = (stream_ << 32) + counter_++;
  return splitmix64(seed_ + ctr * kGolden);
}

double CounterRng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::gaussian() {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  return r * std::cos(t);
}

std::uint64_t CounterRng::below(std::uint64_t bound) {
  if (bound == 0) throw ParameterError("empty range");
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

Mat gaussian_matrix(Index rows, Index cols, CounterRng& rng) {
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

Vec gaussian_vector(Index n, CounterRng& rng) {
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.gaussian();
  return v;
}

namespace {

// s distinct sorted positions out of d (partial Fisher-Yates).
std::vector<Index> random_support(Index d, Index s, CounterRng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < s; ++i) {
    const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(d - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(s));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Vec sparse_gaussian(Index d, Index s, std::uint64_t seed, std::uint64_t pos_stream,
                    std::uint64_t val_stream) {
  CounterRng pos(seed, pos_stream);
  CounterRng val(seed, val_stream);
  Vec x = Vec::Zero(d);
  for (Index i : random_support(d, s, pos)) x[i] = val.gaussian();
  return x;
}

}  // namespace

// ---------------------------------------------------------------------------
// Instances

Problem lasso_problem(const Mat& A, const Vec& b, double lambda) {
  if (A.rows() != b.size()) throw DimensionError("A and b disagree");
  const Index d = A.cols();
  BlockSpec ls;
  ls.n = d;
  ls.E = CouplingMatrix::identity(d, 1.0);
  ls.objective.smooth = SmoothPart{DesignMatrix(A), SmoothLoss::least_squares, b};
  BlockSpec l1;
  l1.n = d;
  l1.E = CouplingMatrix::identity(d, -1.0);
  l1.objective.l1 = L1Part{lambda, Vec()};
  return Problem({std::move(ls), std::move(l1)}, Vec::Zero(d));
}

double lasso_lambda(const Mat& A, const Vec& b) {
  return 0.1 * (A.transpose() * b).lpNorm<Eigen::Infinity>();
}

Index lasso_support_size(Index d) {
  return std::max<Index>(1, static_cast<Index>(std::floor(0.05 * static_cast<double>(d))));
}

LassoInstance gen_lasso(Index n, Index d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ParameterError("lasso needs n, d >= 1");
  CounterRng ra(seed, 1);
  Mat A = gaussian_matrix(n, d, ra);
  Vec x0 = sparse_gaussian(d, lasso_support_size(d), seed, 2, 3);
  CounterRng rn(seed, 4);
  Vec b = A * x0 + std::sqrt(1e-3) * gaussian_vector(n, rn);
  const double lambda = lasso_lambda(A, b);
  Problem p = lasso_problem(A, b, lambda);
  return {std::move(p), std::move(A), std::move(b), std::move(x0), lambda};
}

ExchangeInstance gen_exchange(std::size_t K, Index n, Index p, std::uint64_t seed) {
  if (K < 2) throw ParameterError("exchange needs K >= 2");
  if (n < 1 || p < 1) throw ParameterError("exchange needs n, p >= 1");
  BlockVecs xs(K, Vec::Zero(n));
  for (std::size_t k = 0; k + 1 < K; ++k) {
    CounterRng r(seed, 100 + k);
    xs[k] = gaussian_vector(n, r);
    xs[K - 1] -= xs[k];
  }
  std::vector<BlockSpec> blocks;
  for (std::size_t k = 0; k < K; ++k) {
    CounterRng r(seed, 1000 + k);
    Mat A = gaussian_matrix(p, n, r);
    Vec b = A * xs[k];
    BlockSpec bs;
    bs.n = n;
    bs.E = CouplingMatrix::identity(n, 1.0);
    bs.objective.smooth = SmoothPart{DesignMatrix(std::move(A)), SmoothLoss::least_squares,
                                     std::move(b)};
    blocks.push_back(std::move(bs));
  }
  return {Problem(std::move(blocks), Vec::Zero(n)), std::move(xs)};
}

LabeledData gen_logreg_data(Index n, Index d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ParameterError("logreg needs n, d >= 1");
  CounterRng ra(seed, 1);
  Mat A = gaussian_matrix(n, d, ra);
  const Index s = std::max<Index>(1, static_cast<Index>(std::floor(0.1 * static_cast<double>(d))));
  const Vec xt = sparse_gaussian(d, s, seed, 2, 3);
  CounterRng rn(seed, 4);
  const Vec score = A * xt + gaussian_vector(n, rn);
  Vec labels(n);
  for (Index i = 0; i < n; ++i) labels[i] = score[i] > 0.0 ? 1.0 : -1.0;
  return {DesignMatrix(std::move(A)), std::move(labels)};
}

// ---------------------------------------------------------------------------
// LIBSVM

namespace {

double parse_number(std::string_view tok, std::size_t line, const char* what) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty()) {
    throw ParseError(line, std::string("bad ") + what + " '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

LibsvmData read_libsvm(std::istream& in) {
  using Triplet = Eigen::Triplet<double>;
  std::vector<Triplet> entries;
  std::vector<double> labels;
  Index d = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok)) continue;  // blank line
    const double label = parse_number(tok, lineno, "label");
    const auto row = static_cast<Index>(labels.size());
    labels.push_back(label > 0.0 ? 1.0 : -1.0);
    long long last = 0;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(lineno, "expected idx:val, got '" + tok + "'");
      const std::string_view sv(tok);
      long long idx = 0;
      const auto key = sv.substr(0, colon);
      const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), idx);
      if (ec != std::errc() || ptr != key.data() + key.size() || key.empty()) {
        throw ParseError(lineno, "bad index '" + std::string(key) + "'");
      }
      if (idx < 1) throw ParseError(lineno, "indices are 1-based");
      if (idx <= last) throw ParseError(lineno, "indices must be strictly increasing");
      last = idx;
      const double v = parse_number(sv.substr(colon + 1), lineno, "value");
      entries.emplace_back(row, static_cast<Index>(idx - 1), v);
      d = std::max<Index>(d, static_cast<Index>(idx));
    }
  }
  if (labels.empty()) throw Error("LIBSVM input contains no rows");
  LibsvmData out;
  out.n = static_cast<Index>(labels.size());
  out.d = d;
  out.A.resize(out.n, d);
  out.A.setFromTriplets(entries.begin(), entries.end());
  out.labels = Eigen::Map<const Vec>(labels.data(), out.n);
  return out;
}

LibsvmData load_libsvm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_libsvm(in);
}

void write_libsvm(std::ostream& out, const SparseMat& A, const Vec& labels) {
  if (A.rows() != labels.size()) throw DimensionError("one label per row");
  for (Index i = 0; i < A.rows(); ++i) {
    out << (labels[i] > 0.0 ? "+1" : "-1");
    for (SparseMat::InnerIterator it(A, i); it; ++it) {
      out << ' ' << (it.col() + 1) << ':' << format_double(it.value());
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Distributed logistic regression

std::vector<RowBlock> partition_rows(const DesignMatrix& A, const Vec& b, std::size_t N) {
  const Index n = A.rows();
  if (b.size() != n) throw DimensionError("one label per row");
  if (N < 1) throw ParameterError("need at least one block");
  if (static_cast<Index>(N) > n) throw ParameterError("more blocks than rows");
  const Index base = n / static_cast<Index>(N);
  const Index extra = n % static_cast<Index>(N);
  std::vector<RowBlock> out;
  Index start = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const Index len = base + (static_cast<Index>(i) < extra ? 1 : 0);
    out.push_back({A.row_block(start, len), b.segment(start, len)});
    start += len;
  }
  return out;
}

Problem build_logreg_consensus(const std::vector<RowBlock>& blocks, double lambda) {
  const std::size_t N = blocks.size();
  if (N < 1) throw ParameterError("need at least one data block");
  const Index d = blocks.front().A.cols();
  const Index m = static_cast<Index>(N) * d;
  std::vector<BlockSpec> specs;
  for (std::size_t i = 0; i < N; ++i) {
    if (blocks[i].A.rows() == 0) throw ParameterError("empty data block");
    if (blocks[i].A.cols() != d) throw DimensionError("blocks disagree on feature count");
    BlockSpec bs;
    bs.n = d;
    bs.E = CouplingMatrix::embedded(m, static_cast<Index>(i) * d, d, 1.0);
    bs.objective.smooth = SmoothPart{blocks[i].A, SmoothLoss::logistic, blocks[i].b};
    specs.push_back(std::move(bs));
  }
  BlockSpec z;
  z.n = d;
  z.E = CouplingMatrix::stacked(static_cast<Index>(N), d, -1.0);
  z.objective.l1 = L1Part{lambda, Vec()};
  specs.push_back(std::move(z));
  return Problem(std::move(specs), Vec::Zero(m));
}

double logreg_lambda(const DesignMatrix& A, const Vec& labels, double lambda_scale) {
  return lambda_scale * A.apply_transpose(labels).lpNorm<Eigen::Infinity>();
}

double consensus_ratio(const BlockVecs& x) {
  if (x.size() < 2) throw DimensionError("need data blocks and z");
  const Vec& z = x.back();
  const double N = static_cast<double>(x.size() - 1);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) s += (x[i] - z).norm();
  const double zn = z.norm();
  if (zn == 0.0) return s == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return s / (N * zn);
}

double consensus_objective(const Vec& z, const Problem& problem) {
  double f = 0.0;
  for (const auto& b : problem.blocks()) f += b.objective.value(z);
  return f;
}

StopPredicate consensus_stop(const Problem& problem, double f_star, double ratio_tol,
                             double gap_tol) {
  return [&problem, f_star, ratio_tol, gap_tol](const IterateState& s, const StepMetrics&) {
    if (consensus_ratio(s.x) > ratio_tol) return false;
    const double gap = std::abs(consensus_objective(s.x.back(), problem) - f_star) /
                       std::max(1.0, std::abs(f_star));
    return gap <= gap_tol;
  };
}

// ---------------------------------------------------------------------------
// Configuration

Experiment parse_experiment(const std::string& s) {
  if (s == "lasso") return Experiment::lasso;
  if (s == "exchange") return Experiment::exchange;
  if (s == "logreg") return Experiment::logreg;
  throw ParameterError("unknown experiment '" + s + "'");
}

SolverKind parse_solver(const std::string& s) {
  if (s == "ada") return SolverKind::ada;
  if (s == "iada") return SolverKind::iada;
  if (s == "vsadmm") return SolverKind::vsadmm;
  if (s == "proxjadmm") return SolverKind::proxjadmm;
  if (s == "admm2") return SolverKind::admm2;
  throw ParameterError("unknown solver '" + s + "'");
}

InexactSchedule::Kind parse_criterion(const std::string& s) {
  if (s == "A") return InexactSchedule::Kind::criterion_A;
  if (s == "B") return InexactSchedule::Kind::criterion_B;
  if (s == "exact") return InexactSchedule::Kind::exact;
  throw ParameterError("unknown criterion '" + s + "'");
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::lasso: return "lasso";
    case Experiment::exchange: return "exchange";
    case Experiment::logreg: return "logreg";
  }
  return "?";
}

std::string to_string(SolverKind s) {
  switch (s) {
    case SolverKind::ada: return "ada";
    case SolverKind::iada: return "iada";
    case SolverKind::vsadmm: return "vsadmm";
    case SolverKind::proxjadmm: return "proxjadmm";
    case SolverKind::admm2: return "admm2";
  }
  return "?";
}

std::string to_string(InexactSchedule::Kind k) {
  switch (k) {
    case InexactSchedule::Kind::criterion_A: return "A";
    case InexactSchedule::Kind::criterion_B: return "B";
    case InexactSchedule::Kind::exact: return "exact";
  }
  return "?";
}

Index ExperimentConfig::dim_n() const {
  if (n) return *n;
  switch (experiment) {
    case Experiment::lasso: return 200;
    case Experiment::exchange: return 100;
    case Experiment::logreg: return 2000;
  }
  return 0;
}

Index ExperimentConfig::dim_d() const {
  if (d) return *d;
  return experiment == Experiment::logreg ? 50 : 800;
}

std::size_t ExperimentConfig::dim_K() const { return K.value_or(5); }
Index ExperimentConfig::dim_p() const { return p.value_or(80); }
std::size_t ExperimentConfig::dim_N() const { return N.value_or(4); }

double ExperimentConfig::rho_value() const {
  if (rho) return *rho;
  return experiment == Experiment::lasso ? 5.0 : 10.0;
}

double ExperimentConfig::c_value() const {
  if (c) return *c;
  return experiment == Experiment::lasso ? 5.0 : 10.0;
}

void ExperimentConfig::validate() const {
  if (dim_n() < 1 || dim_d() < 1 || dim_p() < 1) throw ParameterError("dimensions must be positive");
  if (dim_K() < 2) throw ParameterError("K must be at least 2");
  if (dim_N() < 1) throw ParameterError("N must be positive");
  if (!(rho_value() > 0.0) || !(c_value() > 0.0)) throw ParameterError("rho and c must be positive");
  if (!(stop_eps > 0.0)) throw ParameterError("stop_eps must be positive");
  if (!(eps0 > 0.0) || !(gamma > 0.0)) throw ParameterError("eps0 and gamma must be positive");
  if (!(beta > 0.0) || !(admm_step > 0.0)) throw ParameterError("beta and admm_step must be positive");
  if (!(gamma_damp > 0.0 && gamma_damp < 2.0)) throw ParameterError("gamma_damp must lie in (0, 2)");
  if (!(lambda_scale > 0.0)) throw ParameterError("lambda_scale must be positive");
  if (!(reference_eps > 0.0)) throw ParameterError("reference_eps must be positive");
  if (!(tail_window > 0.0 && tail_window <= 1.0)) throw ParameterError("tail_window must lie in (0, 1]");
  if (max_inner < 1) throw ParameterError("max_inner must be positive");
  if (threads < 1) throw ParameterError("threads must be positive");
  if (inner != "iterative" && inner != "closed_form") throw ParameterError("inner is iterative or closed_form");
  if (stop_mode != "x_change" && stop_mode != "feasibility" && stop_mode != "max_iters" && stop_mode != "both" &&
      stop_mode != "consensus") {
    throw ParameterError("unknown stop_mode '" + stop_mode + "'");
  }
  if (stop_mode == "consensus") {
    if (experiment != Experiment::logreg) throw ParameterError("consensus stop applies to logreg only");
    if (solver != SolverKind::ada && solver != SolverKind::iada) {
      throw ParameterError("consensus stop is available for ada and iada");
    }
  }
  if (solver == SolverKind::admm2 && experiment != Experiment::lasso) {
    throw ParameterError("admm2 solves the lasso experiment only");
  }
  if (libsvm && experiment != Experiment::logreg) throw ParameterError("libsvm data is for logreg");
}

namespace {

using nlohmann::json;

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ParameterError("config key '" + key + "' has the wrong type");
  }
}

template <class T>
T get_positive_int(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ParameterError("config key '" + key + "' must be an integer");
  const auto x = v.get<long long>();
  if (x < 0) throw ParameterError("config key '" + key + "' must be nonnegative");
  return static_cast<T>(x);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") c.experiment = parse_experiment(get_as<std::string>(v, key));
    else if (key == "n") c.n = get_positive_int<Index>(v, key);
    else if (key == "d") c.d = get_positive_int<Index>(v, key);
    else if (key == "K") c.K = get_positive_int<std::size_t>(v, key);
    else if (key == "p") c.p = get_positive_int<Index>(v, key);
    else if (key == "N") c.N = get_positive_int<std::size_t>(v, key);
    else if (key == "libsvm") c.libsvm = get_as<std::string>(v, key);
    else if (key == "lambda_scale") c.lambda_scale = get_as<double>(v, key);
    else if (key == "seed") c.seed = get_positive_int<std::uint64_t>(v, key);
    else if (key == "solver") c.solver = parse_solver(get_as<std::string>(v, key));
    else if (key == "rho") c.rho = get_as<double>(v, key);
    else if (key == "c") c.c = get_as<double>(v, key);
    else if (key == "max_iters") c.max_iters = get_positive_int<std::size_t>(v, key);
    else if (key == "stop_eps") c.stop_eps = get_as<double>(v, key);
    else if (key == "stop_mode") c.stop_mode = get_as<std::string>(v, key);
    else if (key == "threads") c.threads = get_positive_int<unsigned>(v, key);
    else if (key == "criterion") c.criterion = parse_criterion(get_as<std::string>(v, key));
    else if (key == "eps0") c.eps0 = get_as<double>(v, key);
    else if (key == "gamma") c.gamma = get_as<double>(v, key);
    else if (key == "inner") c.inner = get_as<std::string>(v, key);
    else if (key == "max_inner") c.max_inner = get_positive_int<std::size_t>(v, key);
    else if (key == "beta") c.beta = get_as<double>(v, key);
    else if (key == "gamma_damp") c.gamma_damp = get_as<double>(v, key);
    else if (key == "admm_step") c.admm_step = get_as<double>(v, key);
    else if (key == "reference") c.reference = get_as<bool>(v, key);
    else if (key == "reference_eps") c.reference_eps = get_as<double>(v, key);
    else if (key == "reference_max_iters") c.reference_max_iters = get_positive_int<std::size_t>(v, key);
    else if (key == "tail_window") c.tail_window = get_as<double>(v, key);
    else if (key == "out") c.out = get_as<std::string>(v, key);
    else throw ParameterError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  if (c.experiment == Experiment::exchange) {
    j["K"] = c.dim_K();
    j["n"] = c.dim_n();
    j["p"] = c.dim_p();
  } else if (c.experiment == Experiment::lasso) {
    j["n"] = c.dim_n();
    j["d"] = c.dim_d();
  } else {
    j["n"] = c.dim_n();
    j["d"] = c.dim_d();
    j["N"] = c.dim_N();
    j["lambda_scale"] = c.lambda_scale;
    if (c.libsvm) j["libsvm"] = *c.libsvm;
  }
  j["seed"] = c.seed;
  j["solver"] = to_string(c.solver);
  j["rho"] = c.rho_value();
  j["c"] = c.c_value();
  j["max_iters"] = c.max_iters;
  j["stop_eps"] = c.stop_eps;
  j["stop_mode"] = c.stop_mode;
  j["threads"] = c.threads;
  j["criterion"] = to_string(c.criterion);
  j["eps0"] = c.eps0;
  j["gamma"] = c.gamma;
  j["inner"] = c.inner;
  j["max_inner"] = c.max_inner;
  j["beta"] = c.beta;
  j["gamma_damp"] = c.gamma_damp;
  j["admm_step"] = c.admm_step;
  j["reference"] = c.reference;
  j["reference_eps"] = c.reference_eps;
  j["reference_max_iters"] = c.reference_max_iters;
  j["tail_window"] = c.tail_window;
  j["out"] = c.out;
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Driver

IterateState zero_gradient_saddle(const Problem& problem, const BlockVecs& x_star) {
  problem.check_primal(x_star);
  IterateState s = IterateState::zeros(problem);
  for (std::size_t k = 0; k < problem.num_blocks(); ++k) {
    const auto& obj = problem.block(k).objective;
    if (obj.l1 || obj.smooth_gradient(x_star[k]).norm() > 1e-10 * (1.0 + x_star[k].norm())) {
      throw ParameterError("x* is not a zero-gradient point of every block");
    }
    s.w[k] = problem.block(k).E.apply(x_star[k]);
    if (problem.carries_q(k)) s.w[k] -= problem.q();
  }
  s.x = x_star;
  return s;
}

BuiltInstance build_instance(const ExperimentConfig& c) {
  c.validate();
  switch (c.experiment) {
    case Experiment::lasso:
      return {gen_lasso(c.dim_n(), c.dim_d(), c.seed).problem, std::nullopt, std::nullopt};
    case Experiment::exchange: {
      auto inst = gen_exchange(c.dim_K(), c.dim_n(), c.dim_p(), c.seed);
      IterateState saddle = zero_gradient_saddle(inst.problem, inst.x_star);
      return {std::move(inst.problem), std::move(inst.x_star), std::move(saddle)};
    }
    case Experiment::logreg: {
      LabeledData data;
      if (c.libsvm) {
        auto raw = load_libsvm(*c.libsvm);
        data = {DesignMatrix(std::move(raw.A)), std::move(raw.labels)};
      } else {
        data = gen_logreg_data(c.dim_n(), c.dim_d(), c.seed);
      }
      const double lambda = logreg_lambda(data.A, data.labels, c.lambda_scale);
      return {build_logreg_consensus(partition_rows(data.A, data.labels, c.dim_N()), lambda),
              std::nullopt, std::nullopt};
    }
  }
  throw ParameterError("unknown experiment");
}

namespace {

StopMode stop_mode_of(const std::string& s) {
  if (s == "x_change") return StopMode::x_change;
  if (s == "feasibility") return StopMode::feasibility;
  if (s == "both") return StopMode::both;
  return StopMode::max_iters;
}

SolveOutcome from_run(RunResult r, double E_norm) {
  SolveOutcome o;
  o.x = r.final_state.x;
  o.multiplier = r.final_state.zeta_bar;
  o.trace = std::move(r.trace);
  o.status = r.status;
  o.max_w_drift = r.max_w_drift;
  o.final_state = std::move(r.final_state);
  o.E_norm = E_norm;
  return o;
}

SolveOutcome from_baseline(BaselineResult r, double E_norm) {
  SolveOutcome o;
  o.x = std::move(r.x);
  o.multiplier = std::move(r.multiplier);
  o.trace = std::move(r.trace);
  o.status = r.status;
  o.E_norm = E_norm;
  return o;
}

}  // namespace

SolveOutcome solve(const Problem& problem, const ExperimentConfig& c, const SolveHooks& hooks) {
  c.validate();
  const double E_norm = spectral_norm(problem);
  const StopMode mode = stop_mode_of(c.stop_mode);

  SolverParams params;
  params.rho = c.rho_value();
  params.c = c.c_value();
  params.max_iters = c.max_iters;
  params.stop_eps = c.stop_eps;
  params.threads = c.threads;

  BaselineParams bp;
  bp.beta = c.beta;
  bp.gamma_damp = c.gamma_damp;
  bp.admm_step = c.admm_step;
  bp.max_iters = c.max_iters;
  bp.stop_eps = c.stop_eps;
  BaselineRunOptions bopts{mode, hooks.baseline_observer};

  InnerSolverOptions inner;
  inner.max_inner = c.max_inner;

  switch (c.solver) {
    case SolverKind::ada: {
      inner.strategy = InnerStrategy::closed_form;
      const auto solvers = make_block_solvers(problem, params.rho / 2.0, 1.0 / params.c, inner);
      RunOptions opts{mode, hooks.ada_observer, hooks.extra_stop};
      return from_run(run(problem, params, solvers, IterateState::zeros(problem), opts), E_norm);
    }
    case SolverKind::iada: {
      inner.strategy = c.inner == "closed_form" ? InnerStrategy::closed_form : InnerStrategy::iterative;
      const auto solvers = make_block_solvers(problem, params.rho / 2.0, 1.0 / params.c, inner);
      InexactSchedule sched;
      sched.kind = c.criterion;
      sched.eps0 = c.eps0;
      sched.gamma = c.gamma;
      sched.E_norm = E_norm;
      RunOptions opts{mode, hooks.ada_observer, hooks.extra_stop};
      return from_run(iada_run(problem, params, sched, solvers, IterateState::zeros(problem), opts),
                      E_norm);
    }
    case SolverKind::vsadmm: {
      const auto solvers = vsadmm_solvers(problem, bp.beta, inner);
      return from_baseline(run_vsadmm(problem, bp, solvers, bopts), E_norm);
    }
    case SolverKind::proxjadmm: {
      const auto solvers = prox_jadmm_solvers(problem, bp, inner);
      return from_baseline(run_prox_jadmm(problem, bp, solvers, bopts), E_norm);
    }
    case SolverKind::admm2: {
      const Admm2Lasso admm(problem, bp.beta);
      return from_baseline(admm.run(bp, bopts), E_norm);
    }
  }
  throw ParameterError("unknown solver");
}

SolveOutcome reference_solve(const Problem& problem, const ExperimentConfig& config) {
  ExperimentConfig r = config;
  r.solver = SolverKind::ada;
  r.stop_eps = config.reference_eps;
  r.max_iters = config.reference_max_iters;
  r.stop_mode = "x_change";
  return solve(problem, r);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const BuiltInstance inst = build_instance(config);
  const Problem& problem = inst.problem;
  const bool logreg = config.experiment == Experiment::logreg;
  const bool ada_family = config.solver == SolverKind::ada || config.solver == SolverKind::iada;

  ExperimentResult res;
  std::optional<IterateState> ref_state;
  if (inst.saddle && config.reference) {
    ref_state = *inst.saddle;
    res.f_star = objective(ref_state->x, problem);
  } else if (config.reference || config.stop_mode == "consensus") {
    SolveOutcome ref = reference_solve(problem, config);
    res.f_star = logreg ? consensus_objective(ref.x.back(), problem) : objective(ref.x, problem);
    ref_state = std::move(*ref.final_state);
    res.report.reference_stop_eps = config.reference_eps;
  }

  SolveHooks hooks;
  std::optional<GDistanceRecorder> distances;
  std::optional<ErgodicMonitor> ergodic;
  if (ref_state && ada_family && config.reference) {
    const IterateState init = IterateState::zeros(problem);
    distances.emplace(*ref_state, config.rho_value(), config.c_value());
    ergodic.emplace(problem, *ref_state, init, config.rho_value(), config.c_value());
    hooks.ada_observer = [&](std::size_t it, const IterateState& s) {
      (*distances)(it, s);
      if (it > 0) ergodic->add(s.x);
    };
  }
  if (config.stop_mode == "consensus") hooks.extra_stop = consensus_stop(problem, *res.f_star);

  const auto t0 = std::chrono::steady_clock::now();
  res.outcome = solve(problem, config, hooks);
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const SolveOutcome& out = res.outcome;

  RateReport& rep = res.report;
  const auto deltas = deltas_of(out.trace);
  if (config.solver == SolverKind::ada && deltas.size() >= 3) {
    const auto m = verify_monotone(deltas);
    rep.monotone_ok = m.ok;
    if (m.first_violation) rep.first_violation = *m.first_violation;
  }
  if (!deltas.empty()) {
    const auto s = summability(deltas);
    rep.partial_sums = s.partial_sums;
    rep.nu_a_nu_medians = {s.first_window_median, s.last_window_median};
  }
  if (distances) {
    rep.fejer_ok = verify_fejer(distances->distances()).ok;
    if (!out.trace.empty()) rep.ergodic_max_violation = ergodic->report().max_violation;
    try {
      rep.tail_ratio_theta = verify_linear_tail(distances->distances(), config.tail_window).theta;
    } catch (const DiagnosticError&) {
    }
  }

  const std::filesystem::path dir(config.out);
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "trace.csv");
    if (!f) throw Error("cannot write " + (dir / "trace.csv").string());
    write_trace_csv(f, out.trace, config.solver == SolverKind::iada, problem.num_blocks());
  }
  {
    std::ofstream f(dir / "rate_report.json");
    if (!f) throw Error("cannot write rate_report.json");
    f << to_json(rep) << '\n';
  }

  const bool converged =
      out.status == RunStatus::converged || out.status == RunStatus::stopped_by_predicate;
  res.exit_code = converged ? 0 : 2;

  json sum;
  sum["experiment"] = to_string(config.experiment);
  sum["solver"] = to_string(config.solver);
  sum["status"] = converged ? "converged" : "non-converged";
  sum["iterations"] = out.trace.size();
  sum["final_objective"] = objective(out.x, problem);
  sum["constraint_residual"] = constraint_residual(out.x, problem).norm();
  sum["kkt_residual"] = kkt_residual(out.x, out.multiplier, problem);
  sum["E_norm"] = out.E_norm;
  sum["max_w_drift"] = out.max_w_drift;
  sum["wall_seconds"] = res.wall_seconds;
  std::size_t inner_total = 0;
  for (const auto& m : out.trace) inner_total += m.inner_iters_total();
  sum["inner_iters_total"] = inner_total;
  sum["f_star"] = res.f_star ? json(*res.f_star) : json(nullptr);
  if (logreg) {
    sum["consensus_ratio"] = consensus_ratio(out.x);
    sum["consensus_objective"] = consensus_objective(out.x.back(), problem);
  }
  if (inst.x_star) sum["distance_to_known_optimum"] = std::sqrt(squared_norm(difference(out.x, *inst.x_star)));
  sum["config"] = json::parse(to_json(config));
  {
    std::ofstream f(dir / "summary.json");
    if (!f) throw Error("cannot write summary.json");
    f << sum.dump(2) << '\n';
  }
  return res;
}

}  // namespace ada
