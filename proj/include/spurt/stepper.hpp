#pragma once

/**
 * @file stepper.hpp
 * @brief Implicit-Euler timestepper for the semi-discretized Poiseuille flow.
 *
 * Unknowns per step are the nodal velocities vx[0..n-1], the viscoelastic
 * shear stresses t1[1..n-1] (t1[0] = 0 by antisymmetry) and the pressure
 * gradient. Second-order central differences are used in the interior,
 * second-order one-sided stencils at y = 0 (symmetry) and y = 1 (wall), and
 * the pressure gradient is fixed by requiring the Simpson flow rate to equal
 * the imposed q. The only nonlinearity is the slip law at the wall.
 */

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "spurt/model.hpp"
#include "spurt/timestepper.hpp"

namespace spurt {

struct GridSpec {
  int n = 201;

  double h() const { return 1.0 / (n - 1); }
  double y(int i) const { return i * h(); }
  /// Requires n odd and n >= 5.
  void validate() const;
};

struct FlowState {
  Eigen::VectorXd vx;
  Eigen::VectorXd t1;
  double t = 0.0;

  int nodes() const { return static_cast<int>(vx.size()); }
};

struct StepperConfig {
  double dt = 1e-5;
  double newton_tol = 1e-11;
  int newton_max = 25;

  void validate() const;
};

struct StepResult {
  FlowState state;
  double grad_p = 0.0;
};

/// Called after every completed step with the new state and pressure gradient.
using StepObserver = std::function<void(const FlowState&, double grad_p)>;

/// Simpson weights on the grid; flow_rate(u) = weights . vx.
Eigen::VectorXd simpson_weights(const GridSpec& g);

FlowState init_from_steady(const SteadyState& s, const GridSpec& g,
                           const ModelParams& p);

double flow_rate(const FlowState& u, const GridSpec& g);

/// Pressure gradient implied by the wall velocity through the slip law.
double pressure_gradient(const FlowState& u, const ModelParams& p);

/// Viscoelastic stress at y = 0.5 (linear interpolation between nodes).
double stress_at_mid(const FlowState& u);

/// Factorized implicit-Euler operator for one (grid, params, dt) triple.
///
/// The banded matrix does not depend on the state or on q, so it is factored
/// once; each step then needs one banded solve and a scalar Newton iteration
/// on the wall slip stress.
class ImplicitEulerOperator {
public:
  ImplicitEulerOperator(const GridSpec& g, const ModelParams& p, double dt,
                        double newton_tol, int newton_max);

  /// Advances u by one step of size dt() under flow rate q.
  StepResult step(const FlowState& u, double q) const;

  double dt() const { return dt_; }

private:
  Eigen::VectorXd solve(Eigen::VectorXd rhs) const;

  GridSpec grid_;
  ModelParams params_;
  double dt_;
  double newton_tol_;
  int newton_max_;
  int kl_ = 5;
  int ku_ = 3;
  int ldab_;
  std::vector<double> band_;
  std::vector<int> pivots_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd grad_col_; // A^{-1} applied to the pressure-gradient column
  Eigen::VectorXd slip_col_; // A^{-1} applied to the slip-stress column
  double weights_dot_grad_ = 0.0;
  double weights_dot_slip_ = 0.0;
};

/// One implicit step under p.q.
StepResult step(const FlowState& u, const ModelParams& p,
                const StepperConfig& c);

/// Repeated stepping over `horizon`. A final partial step covers any
/// remainder larger than dt * 1e-9.
FlowState evolve(const FlowState& u, const ModelParams& p, double horizon,
                 const StepperConfig& c);

/// Reusable timestepper for the Poiseuille problem, with q as the parameter.
///
/// Analysis code sees the state as the flat vector [vx; t1] of length 2n.
class PoiseuilleStepper final : public Timestepper {
public:
  PoiseuilleStepper(GridSpec g, ModelParams p, StepperConfig c);

  Eigen::Index dimension() const override { return 2 * grid_.n; }
  Eigen::VectorXd advance(const Eigen::VectorXd& u, double q,
                          double horizon) const override;
  double time_step() const override { return config_.dt; }
  Eigen::VectorXd observe(const Eigen::VectorXd& u, double q, double horizon,
                          const OrbitObserver& observer) const override;

  /// Evolve with a callback after each step. The returned state has t
  /// advanced by horizon.
  FlowState evolve(const FlowState& u, double q, double horizon,
                   const StepObserver& observer = {}) const;

  StepResult step(const FlowState& u, double q) const {
    return op_.step(u, q);
  }

  FlowState unpack(const Eigen::VectorXd& u) const;
  Eigen::VectorXd pack(const FlowState& s) const;

  /// Analytic steady state at flow rate q, packed.
  Eigen::VectorXd steady_vector(double q) const;

  const GridSpec& grid() const { return grid_; }
  const ModelParams& params() const { return params_; }
  const StepperConfig& config() const { return config_; }

private:
  GridSpec grid_;
  ModelParams params_;
  StepperConfig config_;
  ImplicitEulerOperator op_;
};

} // namespace spurt
