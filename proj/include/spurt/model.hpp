#pragma once

/**
 * @file model.hpp
 * @brief Closed-form physics of plane Poiseuille flow of an Oldroyd-B fluid
 *        with a nonmonotonic wall slip law.
 *
 * Everything here is dimensionless. Lengths are scaled by the channel
 * half-width, y = 0 is the symmetry plane and y = 1 the wall. The wall shear
 * stress sigma_w is taken positive for forward flow, so that
 * sigma_w = -grad_p = F(v_w) in steady state.
 */

#include <utility>
#include <vector>

namespace spurt {

struct ModelParams {
  double re = 0.01;  ///< Reynolds number
  double we = 0.1;   ///< Weissenberg number
  double eta2 = 0.1; ///< retardation (purely viscous) viscosity fraction
  double a1 = 1.0;
  double a2 = 15.0;
  double a3 = 100.0;
  double q = 0.0; ///< imposed flow rate through the half channel

  double eta1() const { return 1.0 - eta2; }
  double elasticity() const { return we / re; }

  /// Throws std::invalid_argument when a field is outside its physical range.
  void validate() const;
};

struct SteadyState {
  double vw = 0.0;      ///< slip velocity
  double grad_p = 0.0;  ///< pressure gradient, negative for forward flow
  double q = 0.0;       ///< flow rate
  double sigma_w = 0.0; ///< wall shear stress, equal to -grad_p
};

/// Slip law F(vw) = A1 (1 + A2 / (1 + A3 vw^2)) vw. Odd in vw.
double slip_stress(double vw, const ModelParams& p);

/// Analytic derivative F'(vw).
double slip_stress_deriv(double vw, const ModelParams& p);

/// Steady flow rate Q(vw) = vw + F(vw)/3.
double steady_flow_rate(double vw, const ModelParams& p);

/// Builds the steady state record for a given slip velocity.
SteadyState steady_from_slip(double vw, const ModelParams& p);

/// Inverts the steady flow-rate map on vw >= 0.
///
/// Bisection on [0, q] followed by a Newton polish. Throws
/// NonMonotoneFlowRateMap when dQ/dvw is not positive everywhere, since the
/// inverse is then ambiguous.
SteadyState solve_steady_for_q(double q, const ModelParams& p);

/// Analytic velocity and viscoelastic shear stress profiles at position y.
std::pair<double, double> steady_profiles(const SteadyState& s,
                                          const ModelParams& p, double y);

struct FlowCurveRow {
  double vw;
  double q;
  double sigma_w;
};

/// n equally spaced slip velocities on [0, vw_max].
std::vector<FlowCurveRow> flow_curve(const ModelParams& p, double vw_max,
                                     int n);

/// Local maximum and local minimum of the flow curve (roots of F').
/// Throws NoExtrema for a monotone slip law.
std::pair<SteadyState, SteadyState> flow_curve_extrema(const ModelParams& p);

/// Smallest value of F' over vw >= 0, attained at A3 vw^2 = 3.
double min_slip_stress_deriv(const ModelParams& p);

} // namespace spurt
