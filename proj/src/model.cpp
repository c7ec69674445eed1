#include "spurt/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "spurt/errors.hpp"

namespace spurt {

void ModelParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("ModelParams: ") + what);
  };
  require(re > 0.0, "re must be positive");
  require(we >= 0.0, "we must be non-negative");
  require(eta2 > 0.0 && eta2 <= 1.0, "eta2 must lie in (0, 1]");
  require(a1 > 0.0, "a1 must be positive");
  require(a2 >= 0.0, "a2 must be non-negative");
  require(a3 > 0.0, "a3 must be positive");
  require(q >= 0.0, "q must be non-negative");
}

double slip_stress(double vw, const ModelParams& p) {
  return p.a1 * (1.0 + p.a2 / (1.0 + p.a3 * vw * vw)) * vw;
}

double slip_stress_deriv(double vw, const ModelParams& p) {
  const double s = p.a3 * vw * vw;
  return p.a1 * (1.0 + p.a2 * (1.0 - s) / ((1.0 + s) * (1.0 + s)));
}

double steady_flow_rate(double vw, const ModelParams& p) {
  return vw + slip_stress(vw, p) / 3.0;
}

SteadyState steady_from_slip(double vw, const ModelParams& p) {
  const double sigma = slip_stress(vw, p);
  return SteadyState{vw, -sigma, steady_flow_rate(vw, p), sigma};
}

double min_slip_stress_deriv(const ModelParams& p) {
  // (1 - s)/(1 + s)^2 is minimal at s = 3 with value -1/8.
  return p.a1 * (1.0 - p.a2 / 8.0);
}

SteadyState solve_steady_for_q(double q, const ModelParams& p) {
  if (q < 0.0) throw std::invalid_argument("solve_steady_for_q: q < 0");
  if (1.0 + min_slip_stress_deriv(p) / 3.0 <= 0.0)
    throw NonMonotoneFlowRateMap(
        "steady flow rate is not strictly increasing in the slip velocity");
  if (q == 0.0) return SteadyState{};

  // Q(vw) >= vw, so the root lies in [0, q].
  double lo = 0.0, hi = q;
  while (hi - lo > 1e-8) {
    const double mid = 0.5 * (lo + hi);
    if (steady_flow_rate(mid, p) < q)
      lo = mid;
    else
      hi = mid;
  }
  double vw = 0.5 * (lo + hi);
  for (int it = 0; it < 20; ++it) {
    const double r = steady_flow_rate(vw, p) - q;
    if (std::abs(r) < 1e-15) break;
    vw -= r / (1.0 + slip_stress_deriv(vw, p) / 3.0);
  }
  SteadyState s = steady_from_slip(vw, p);
  s.q = q;
  return s;
}

std::pair<double, double> steady_profiles(const SteadyState& s,
                                          const ModelParams& p, double y) {
  const double vx = s.vw - 0.5 * s.grad_p * (1.0 - y * y);
  const double t1 = p.eta1() * s.grad_p * y;
  return {vx, t1};
}

std::vector<FlowCurveRow> flow_curve(const ModelParams& p, double vw_max,
                                     int n) {
  if (n < 2) throw std::invalid_argument("flow_curve: need n >= 2");
  if (!(vw_max > 0.0)) throw std::invalid_argument("flow_curve: vw_max <= 0");
  std::vector<FlowCurveRow> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double vw = vw_max * i / (n - 1);
    rows.push_back({vw, steady_flow_rate(vw, p), slip_stress(vw, p)});
  }
  return rows;
}

std::pair<SteadyState, SteadyState> flow_curve_extrema(const ModelParams& p) {
  // F'(vw) = 0  <=>  s^2 + (2 - A2) s + (1 + A2) = 0 with s = A3 vw^2.
  const double b = 2.0 - p.a2;
  const double c = 1.0 + p.a2;
  const double disc = b * b - 4.0 * c;
  if (disc < 0.0 || -b <= 0.0)
    throw NoExtrema("slip law is monotone: F' has no positive roots");
  const double root = std::sqrt(disc);
  const double s_lo = 0.5 * (-b - root);
  const double s_hi = 0.5 * (-b + root);
  if (s_lo <= 0.0) throw NoExtrema("slip law has a single extremum");
  auto polish = [&](double s) {
    double vw = std::sqrt(s / p.a3);
    // One Newton step on F' removes the rounding left by the closed form.
    const double h = 1e-7 * vw;
    const double d2 =
        (slip_stress_deriv(vw + h, p) - slip_stress_deriv(vw - h, p)) / (2 * h);
    if (d2 != 0.0) vw -= slip_stress_deriv(vw, p) / d2;
    return steady_from_slip(vw, p);
  };
  return {polish(s_lo), polish(s_hi)};
}

} // namespace spurt
