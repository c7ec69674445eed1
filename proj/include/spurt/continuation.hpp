#pragma once

/**
 * @file continuation.hpp
 * @brief Timestepper-based fixed points, periodic orbits and their branches.
 *
 * Steady states are fixed points of Phi_{T_h}; periodic orbits are fixed
 * points of Phi_T with the period as an extra unknown, pinned by a phase
 * condition against a reference orbit. Branches are traced by pseudo
 * arc-length continuation in the flow rate. All Jacobians are applied
 * matrix-free through finite differences of timestepper calls.
 */

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spurt/krylov.hpp"
#include "spurt/stepper.hpp"
#include "spurt/timestepper.hpp"

namespace spurt {

using Complex = std::complex<double>;

struct SolverConfig {
  double t_h = 1e-3;           ///< horizon of the steady-state map
  double newton_tol = 1e-8;    ///< max-norm tolerance on fixed-point residuals
  int newton_max = 12;
  /// Period column of the cycle Newton system from a difference of Phi_T in
  /// T (1e-3 dt apart) instead of one extra time step along the orbit.
  bool exact_period_column = false;
  KrylovConfig linear{1e-7, 60, 1e-6};  ///< GMRES for Newton corrections
  KrylovConfig eigen{1e-6, 40, 1e-6, true};  ///< Arnoldi for stability
  int eig_restarts = 3;
  int k_eigs = 6;

  // Arc-length continuation.
  double ds = 0.01;
  double ds_min = 0.01 / 64;
  double ds_max = 0.05;
  int n_steps = 60;
  /// Weight of the state block in the arc-length inner product; <= 0 means
  /// 1 / dim, so that ds is measured in root-mean-square state units.
  double state_weight = 0.0;
  double period_weight = 1.0;

  // Hopf refinement.
  double hopf_tol = 1e-4;
  int hopf_max_iter = 30;
};

/// Scalar observable along orbits (e.g. -grad_p for the Poiseuille problem).
using Monitor = std::function<double(const Vector&)>;

struct Tangent {
  Vector du;
  double dmu = 0.0;
  double dperiod = 0.0;
};

struct BranchPoint {
  Vector u;
  double mu = 0.0;
  std::optional<double> period;
  std::vector<Complex> lead_eigs; ///< lambdas (steady) or multipliers (cycles)
  bool stable = false;
  std::optional<Tangent> tangent;
  double residual = 0.0;
  int newton_iterations = 0;
};

struct HopfPoint {
  double q_c = 0.0;
  double omega = 0.0;
  double vw_star = 0.0;
  double fprime_star = 0.0;
  double re_lambda = 0.0; ///< max Re lambda at q_c
  int iterations = 0;
};

struct CyclePoint {
  Vector u0;
  double period = 0.0;
  double mu = 0.0;
  std::vector<Complex> floquet; ///< descending modulus
  int trivial_index = -1;       ///< position of the phase multiplier
  bool stable = false;
  double residual = 0.0;        ///< |u0 - Phi_T(u0)|_inf
  double phase_residual = 0.0;
  double monitor_max = 0.0;     ///< extremes of the monitor over one period
  double monitor_min = 0.0;
  int newton_iterations = 0;

  /// Largest modulus among the non-trivial multipliers.
  double lead_nontrivial_modulus() const;
};

struct FoldPoint {
  double q_fold = 0.0;
  CyclePoint cycle; ///< branch point nearest the fold
};

struct CycleBranch {
  std::vector<CyclePoint> points;
  std::vector<double> arclength; ///< cumulative, weighted
  std::optional<FoldPoint> fold;
  std::string stop_reason;
};

/// Newton-GMRES on u - Phi_{t_h}(u, mu) = 0.
BranchPoint newton_fixed_point(const Timestepper& ts, const Vector& u0,
                               double mu, double t_h, double tol,
                               const SolverConfig& cfg = {});

/// Leading continuous-time eigenvalues at a converged steady point; sets
/// point.lead_eigs and point.stable (max Re lambda < 0).
EigenReport steady_stability(BranchPoint& point, const Timestepper& ts,
                             double t_h, int k, const SolverConfig& cfg = {});

/// Steady branch by pseudo arc-length continuation from q_range.first to
/// q_range.second. `guess` supplies initial guesses for the two seed points.
std::vector<BranchPoint>
continue_steady(const Timestepper& ts, std::pair<double, double> q_range,
                double ds, const SolverConfig& cfg,
                const std::function<Vector(double)>& guess);

/// Bisection on the sign of max Re lambda of the steady state.
HopfPoint detect_hopf(const PoiseuilleStepper& stepper,
                      std::pair<double, double> bracket,
                      const SolverConfig& cfg = {});

struct TransientSample {
  double t;
  double grad_p;
  double vw;
  double q_check;
  double t1_mid;
};

struct TransientResult {
  std::vector<TransientSample> series;
  bool oscillating = false;
  FlowState seed;            ///< state at the last maximum of -grad_p
  double period_est = 0.0;   ///< mean peak-to-peak interval
  std::vector<double> peak_values;
  std::vector<double> trough_values;
  std::vector<double> peak_times;
};

struct OscillationSummary {
  bool sustained = false;
  std::vector<double> peaks, troughs, peak_times;
  std::vector<std::size_t> peak_index;
  double amplitude_spread = 0.0;
  double period = 0.0;
};

/// Splits a scalar signal into cycles at upward crossings of its mid level
/// and checks whether the last `cycles` amplitudes agree within `spread`.
OscillationSummary analyse_oscillation(const std::vector<double>& times,
                                       const std::vector<double>& values,
                                       int cycles = 3, double spread = 0.02);

/// Integrates from u0 under flow rate q for t_max and looks for a sustained
/// oscillation of -grad_p. When found, the seed state is recovered by
/// re-integrating up to the last maximum.
TransientResult transient_capture(const PoiseuilleStepper& stepper,
                                  const FlowState& u0, double q, double t_max,
                                  int sample_every = 1);

/// du_ref . (u - u_ref)
double phase_residual(const Vector& u, const Vector& u_ref,
                      const Vector& du_ref);

/// Newton-GMRES for a periodic orbit at fixed mu with unknown period.
CyclePoint solve_cycle(const Timestepper& ts, const Vector& u_guess,
                       double period_guess, double mu,
                       const SolverConfig& cfg = {},
                       const Monitor& monitor = {});

/// Floquet multipliers of a converged cycle; fills cycle.floquet,
/// cycle.trivial_index and cycle.stable. The trivial multiplier is the
/// Rayleigh quotient of the monodromy on du/dt; the returned report is the
/// Arnoldi run on the monodromy with that direction deflated.
EigenReport floquet(const Timestepper& ts, CyclePoint& cycle, int k,
                    const SolverConfig& cfg = {});

struct CycleContinuationLimits {
  double mu_min = -1e300;
  double mu_max = 1e300;
  double min_amplitude = 0.0; ///< stop once monitor_max - monitor_min drops below
  double seed_dmu = 1e-3;     ///< signed natural-parameter step for the second seed
  bool compute_floquet = true;
  bool stop_after_fold = false;
  std::function<void(const CyclePoint&)> on_point;
};

/// Pseudo arc-length continuation of periodic orbits in (u, mu, T).
CycleBranch continue_cycles(const Timestepper& ts, const CyclePoint& seed,
                            double ds, int n_steps, const SolverConfig& cfg,
                            const CycleContinuationLimits& limits = {},
                            const Monitor& monitor = {});

/// Small cycle born at a Hopf point: the steady state at q_c + offset plus
/// `amplitude` times the critical eigenvector (max-norm scaled), period
/// 2 pi / omega. A subcritical Hopf point has its cycles on the stable side,
/// a supercritical one on the unstable side. With offset = 0 the crossing is
/// first placed by linear interpolation of max Re lambda over q_c +- hopf_tol,
/// then both sides are tried at 2e-5 from it, the stable side first.
CyclePoint cycle_from_hopf(const PoiseuilleStepper& stepper, const HopfPoint& h,
                           const SolverConfig& cfg = {}, double offset = 0.0,
                           double amplitude = 1e-3);

/// Cycle at flow rate q grown from the steady state of q_start by a
/// transient of length t_max. Throws NoOscillation if none develops.
CyclePoint cycle_from_transient(const PoiseuilleStepper& stepper, double q,
                                double q_start, double t_max,
                                const SolverConfig& cfg = {});

/// Cycle at exactly mu, by a fixed-mu solve started from the interpolant of
/// two branch points bracketing mu, or else by natural-parameter steps from
/// the nearest point.
CyclePoint cycle_on_branch(const Timestepper& ts, const CycleBranch& branch,
                           double mu, const SolverConfig& cfg = {},
                           const Monitor& monitor = {});

enum class ProbeOutcome { SteadyState, StableCycle };

struct BistabilityResult {
  ProbeOutcome outcome = ProbeOutcome::SteadyState;
  std::vector<TransientSample> series;
  double settle_time = 0.0;
  double final_amplitude = 0.0;
  bool decided = true; ///< false only when undecided results are returned
};

/// Integrates from an (unstable) cycle under a perturbed flow rate until the
/// pressure-gradient oscillation dies out or locks onto a repeating cycle.
/// Throws Undecided after t_max unless `throw_if_undecided` is false, in
/// which case the trajectory is returned with decided = false.
BistabilityResult bistability_probe(const PoiseuilleStepper& stepper,
                                    const CyclePoint& unstable_cycle,
                                    double q_new, double t_max,
                                    int sample_every = 1,
                                    bool throw_if_undecided = true);

/// -grad_p as a function of the packed Poiseuille state.
Monitor pressure_monitor(const PoiseuilleStepper& stepper);

} // namespace spurt
