#include "ada/diagnostics.hpp"

#include "ada/block_solvers.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace ada {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

std::size_t window_size(std::size_t n, double fraction) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
}

}  // namespace

std::vector<double> deltas_of(const Trace& trace) {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& m : trace) out.push_back(m.delta_g_norm_sq);
  return out;
}

MonotoneReport verify_monotone(std::span<const double> deltas, double rel_slack,
                               double floor_ratio) {
  if (deltas.size() < 3) throw DiagnosticError("trace too short for a monotonicity check");
  MonotoneReport rep;
  const double floor = floor_ratio * *std::max_element(deltas.begin(), deltas.end());
  for (std::size_t i = 1; i < deltas.size(); ++i) {
    if (deltas[i] > deltas[i - 1] * (1.0 + rel_slack) && deltas[i] > floor) {
      ++rep.violations;
      if (!rep.first_violation) rep.first_violation = i + 1;
    }
  }
  rep.ok = rep.violations == 0;
  return rep;
}

MonotoneReport verify_monotone(const Trace& trace, double rel_slack, double floor_ratio) {
  const auto d = deltas_of(trace);
  return verify_monotone(d, rel_slack, floor_ratio);
}

SummabilityReport summability(std::span<const double> deltas, double fraction) {
  if (deltas.empty()) throw DiagnosticError("empty trace");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("window fraction in (0, 1]");
  SummabilityReport rep;
  rep.partial_sums.reserve(deltas.size());
  double s = 0.0;
  for (double a : deltas) {
    s += a;
    rep.partial_sums.push_back(s);
  }
  const std::size_t n = deltas.size();
  const std::size_t w = window_size(n, fraction);
  std::vector<double> first;
  std::vector<double> last;
  double tail = 0.0;
  for (std::size_t i = 0; i < w; ++i) first.push_back(static_cast<double>(i + 1) * deltas[i]);
  for (std::size_t i = n - w; i < n; ++i) {
    last.push_back(static_cast<double>(i + 1) * deltas[i]);
    tail += deltas[i];
  }
  rep.first_window_median = median(std::move(first));
  rep.last_window_median = median(std::move(last));
  rep.tail_share = s > 0.0 ? tail / s : 0.0;
  return rep;
}

FejerReport verify_fejer(std::span<const double> distances, double rel_slack,
                         double floor_ratio) {
  FejerReport rep;
  if (distances.empty()) return rep;
  const double floor = floor_ratio * *std::max_element(distances.begin(), distances.end());
  for (std::size_t i = 1; i < distances.size(); ++i) {
    const double prev = distances[i - 1];
    if (distances[i] <= floor) continue;
    if (prev > 0.0) rep.max_rel_increase = std::max(rep.max_rel_increase, distances[i] / prev - 1.0);
    if (distances[i] > prev * (1.0 + rel_slack)) {
      rep.ok = false;
      if (!rep.first_violation) rep.first_violation = i;
    }
  }
  return rep;
}

GDistanceRecorder::GDistanceRecorder(IterateState reference, double rho, double c)
    : reference_(std::move(reference)), rho_(rho), c_(c) {}

void GDistanceRecorder::operator()(std::size_t, const IterateState& state) {
  distances_.push_back(std::sqrt(g_distance_sq(state, reference_, rho_, c_)));
}

ErgodicMonitor::ErgodicMonitor(const Problem& problem, IterateState reference,
                               const IterateState& initial, double rho, double c)
    : problem_(&problem), reference_(std::move(reference)) {
  if (reference_.x.empty() || reference_.eta.empty()) {
    throw DiagnosticError("ergodic check needs a reference saddle point");
  }
  f_ref_ = objective(reference_.x, problem);
  dist0_sq_ = g_distance_sq(reference_, initial, rho, c);
}

void ErgodicMonitor::add(const BlockVecs& x) {
  avg_.add(x);
  const BlockVecs xt = avg_.mean();
  const double N = static_cast<double>(avg_.count());
  const double lhs = objective(xt, *problem_) +
                     reference_.eta.front().dot(constraint_residual(xt, *problem_)) - f_ref_;
  const double rhs = dist0_sq_ / N;
  report_.lhs.push_back(lhs);
  report_.rhs.push_back(rhs);
  report_.max_violation = std::max(report_.max_violation, lhs - rhs);
}

ErgodicReport verify_ergodic(std::span<const BlockVecs> x_iterates,
                             const IterateState& reference, const IterateState& initial,
                             const Problem& problem, double rho, double c) {
  ErgodicMonitor mon(problem, reference, initial, rho, c);
  for (const auto& x : x_iterates) mon.add(x);
  return mon.report();
}

LinearTailReport verify_linear_tail(std::span<const double> distances,
                                    double window_fraction, double floor) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
    throw ParameterError("window fraction in (0, 1]");
  }
  LinearTailReport rep;
  if (distances.size() < 2) throw DiagnosticError("linear tail window is empty");
  const std::size_t n = distances.size();
  const std::size_t w = std::max<std::size_t>(2, window_size(n, window_fraction));
  rep.theta = 0.0;
  for (std::size_t i = n - std::min(w, n); i + 1 < n; ++i) {
    if (distances[i] < floor) continue;
    rep.theta = std::max(rep.theta, distances[i + 1] / distances[i]);
    ++rep.pairs_used;
  }
  if (rep.pairs_used == 0) throw DiagnosticError("linear tail window is empty");
  return rep;
}

double kkt_residual(const BlockVecs& x, const Vec& y, const Problem& problem) {
  problem.check_primal(x);
  if (y.size() != problem.m()) throw DimensionError("multiplier has wrong length");
  double s = constraint_residual(x, problem).squaredNorm();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const BlockSpec& b = problem.block(k);
    const Vec g = b.objective.smooth_gradient(x[k]) + b.E.apply_transpose(y);
    const double d = min_subgradient_norm(x[k], g, b.objective.l1, b.box);
    s += d * d;
  }
  return std::sqrt(s);
}

std::string to_json(const RateReport& r) {
  using nlohmann::json;
  json j;
  auto opt = [](const auto& o) -> json { return o ? json(*o) : json(nullptr); };
  j["monotone_ok"] = opt(r.monotone_ok);
  j["first_violation"] = opt(r.first_violation);
  j["partial_sums"] = r.partial_sums;
  j["nu_a_nu_medians"] = {r.nu_a_nu_medians.first, r.nu_a_nu_medians.second};
  j["fejer_ok"] = opt(r.fejer_ok);
  j["ergodic_max_violation"] = opt(r.ergodic_max_violation);
  j["tail_ratio_theta"] = opt(r.tail_ratio_theta);
  j["reference_stop_eps"] = opt(r.reference_stop_eps);
  return j.dump(2);
}

}  // namespace ada
