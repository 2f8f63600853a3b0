#pragma once

#include "ada/ada_core.hpp"
#include "ada/model.hpp"

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ada {

class DiagnosticError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Monotone decrease of a_nu = ||u^{nu-1} - u^nu||_G^2

struct MonotoneReport {
  bool ok = true;
  // 1-based iteration nu of the first a_nu > a_{nu-1} (1 + slack)
  std::optional<std::size_t> first_violation;
  std::size_t violations = 0;
};

// Increases among values below floor_ratio * max a_nu are rounding noise and
// are not counted.
MonotoneReport verify_monotone(std::span<const double> deltas, double rel_slack = 1e-9,
                               double floor_ratio = 1e-24);
MonotoneReport verify_monotone(const Trace& trace, double rel_slack = 1e-9,
                               double floor_ratio = 1e-24);

std::vector<double> deltas_of(const Trace& trace);

// ---------------------------------------------------------------------------
// Summability and the o(1/nu) surrogate

struct SummabilityReport {
  std::vector<double> partial_sums;
  // median of nu * a_nu over the first / last `fraction` of the iterations
  double first_window_median = 0.0;
  double last_window_median = 0.0;
  // sum of a_nu over the last window divided by the total sum
  double tail_share = 0.0;
};

SummabilityReport summability(std::span<const double> deltas, double fraction = 0.1);

// ---------------------------------------------------------------------------
// Fejer monotonicity of d_nu = ||u^nu - u_ref||_G

struct FejerReport {
  bool ok = true;
  std::optional<std::size_t> first_violation;
  double max_rel_increase = 0.0;
};

// Increases below floor_ratio * max d_nu are ignored.
FejerReport verify_fejer(std::span<const double> distances, double rel_slack = 1e-8,
                         double floor_ratio = 1e-12);

// Records ||u^nu - reference||_G for every observed iterate.
class GDistanceRecorder {
 public:
  GDistanceRecorder(IterateState reference, double rho, double c);
  void operator()(std::size_t iter, const IterateState& state);
  const std::vector<double>& distances() const { return distances_; }

 private:
  IterateState reference_;
  double rho_;
  double c_;
  std::vector<double> distances_;
};

// ---------------------------------------------------------------------------
// Ergodic O(1/N) bound
//
//   lhs_N = f(x~_N) + <eta_ref_1, E x~_N - q> - f(x_ref),   rhs_N = ||u_ref - u0||_G^2 / N

struct ErgodicReport {
  std::vector<double> lhs;
  std::vector<double> rhs;
  double max_violation = -std::numeric_limits<double>::infinity();
};

class ErgodicMonitor {
 public:
  ErgodicMonitor(const Problem& problem, IterateState reference,
                 const IterateState& initial, double rho, double c);
  // Feed x^1, x^2, ... in order.
  void add(const BlockVecs& x);
  const ErgodicReport& report() const { return report_; }

 private:
  const Problem* problem_;
  IterateState reference_;
  double f_ref_ = 0.0;
  double dist0_sq_ = 0.0;
  ErgodicAverager avg_;
  ErgodicReport report_;
};

ErgodicReport verify_ergodic(std::span<const BlockVecs> x_iterates,
                             const IterateState& reference, const IterateState& initial,
                             const Problem& problem, double rho, double c);

// ---------------------------------------------------------------------------
// Linear tail rate

struct LinearTailReport {
  double theta = 0.0;  // max d_{nu+1} / d_nu over the window
  std::size_t pairs_used = 0;
};

// Window = last `window_fraction` of the distances. Pairs with d_nu < floor
// are skipped; throws DiagnosticError when nothing is left.
LinearTailReport verify_linear_tail(std::span<const double> distances,
                                    double window_fraction, double floor = 1e-13);

// ---------------------------------------------------------------------------
// KKT residual of (x, y) for L(x, y) = f(x) + <Ex - q, y>

double kkt_residual(const BlockVecs& x, const Vec& y, const Problem& problem);

// ---------------------------------------------------------------------------

struct RateReport {
  std::optional<bool> monotone_ok;
  std::optional<std::size_t> first_violation;
  std::vector<double> partial_sums;
  std::pair<double, double> nu_a_nu_medians{0.0, 0.0};
  std::optional<bool> fejer_ok;
  std::optional<double> ergodic_max_violation;
  std::optional<double> tail_ratio_theta;
  std::optional<double> reference_stop_eps;
};

std::string to_json(const RateReport& report);

}  // namespace ada
