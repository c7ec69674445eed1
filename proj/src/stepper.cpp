#include "spurt/stepper.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <lapacke.h>

#include "spurt/errors.hpp"

namespace spurt {

namespace {

// Position of each unknown in the banded system. vx and t1 are interleaved so
// that every stencil stays within a narrow band.
int vx_pos(int i) { return i == 0 ? 0 : 2 * i - 1; }
int t1_pos(int i) { return 2 * i; }

void check_finite(const FlowState& s) {
  if (!s.vx.allFinite() || !s.t1.allFinite())
    throw NonFiniteState("state left the finite range at t = " +
                         std::to_string(s.t));
}

} // namespace

void GridSpec::validate() const {
  if (n < 5 || n % 2 == 0)
    throw std::invalid_argument("GridSpec: node count must be odd and >= 5");
}

void StepperConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("StepperConfig: dt <= 0");
  if (!(newton_tol > 0.0))
    throw std::invalid_argument("StepperConfig: newton_tol <= 0");
  if (newton_max < 1)
    throw std::invalid_argument("StepperConfig: newton_max < 1");
}

Eigen::VectorXd simpson_weights(const GridSpec& g) {
  g.validate();
  Eigen::VectorXd w(g.n);
  for (int i = 0; i < g.n; ++i) {
    if (i == 0 || i == g.n - 1)
      w[i] = 1.0;
    else
      w[i] = (i % 2 == 1) ? 4.0 : 2.0;
  }
  return w * (g.h() / 3.0);
}

FlowState init_from_steady(const SteadyState& s, const GridSpec& g,
                           const ModelParams& p) {
  g.validate();
  FlowState u{Eigen::VectorXd(g.n), Eigen::VectorXd(g.n), 0.0};
  for (int i = 0; i < g.n; ++i) {
    auto [vx, t1] = steady_profiles(s, p, g.y(i));
    u.vx[i] = vx;
    u.t1[i] = t1;
  }
  u.t1[0] = 0.0;
  return u;
}

double flow_rate(const FlowState& u, const GridSpec& g) {
  return simpson_weights(g).dot(u.vx);
}

double pressure_gradient(const FlowState& u, const ModelParams& p) {
  return -slip_stress(u.vx[u.nodes() - 1], p);
}

double stress_at_mid(const FlowState& u) {
  const int n = u.nodes();
  const double x = 0.5 * (n - 1);
  const int i = static_cast<int>(std::floor(x));
  const double frac = x - i;
  if (i + 1 >= n) return u.t1[n - 1];
  return (1.0 - frac) * u.t1[i] + frac * u.t1[i + 1];
}

ImplicitEulerOperator::ImplicitEulerOperator(const GridSpec& g,
                                             const ModelParams& p, double dt,
                                             double newton_tol, int newton_max)
    : grid_(g), params_(p), dt_(dt), newton_tol_(newton_tol),
      newton_max_(newton_max) {
  g.validate();
  p.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("ImplicitEulerOperator: dt <= 0");

  const int n = g.n;
  const int m = 2 * n - 1;
  const double h = g.h();
  const double eta1 = p.eta1();
  const double eta2 = p.eta2;
  ldab_ = 2 * kl_ + ku_ + 1;
  band_.assign(static_cast<std::size_t>(ldab_) * m, 0.0);
  pivots_.assign(static_cast<std::size_t>(m), 0);

  auto at = [&](int row, int col) -> double& {
    return band_[static_cast<std::size_t>(kl_ + ku_ + row - col) +
                 static_cast<std::size_t>(col) * ldab_];
  };

  // Symmetry plane: one-sided derivative of vx vanishes.
  {
    const int r = vx_pos(0);
    at(r, vx_pos(0)) += -3.0 / (2 * h);
    at(r, vx_pos(1)) += 4.0 / (2 * h);
    at(r, vx_pos(2)) += -1.0 / (2 * h);
  }
  // Momentum at interior nodes.
  for (int i = 1; i <= n - 2; ++i) {
    const int r = vx_pos(i);
    at(r, vx_pos(i)) += p.re / dt + 2.0 * eta2 / (h * h);
    at(r, vx_pos(i - 1)) += -eta2 / (h * h);
    at(r, vx_pos(i + 1)) += -eta2 / (h * h);
    at(r, t1_pos(i + 1)) += -1.0 / (2 * h);
    if (i - 1 >= 1) at(r, t1_pos(i - 1)) += 1.0 / (2 * h);
  }
  // Constitutive equation, central in the interior and one-sided at the wall.
  for (int i = 1; i <= n - 1; ++i) {
    const int r = t1_pos(i);
    at(r, t1_pos(i)) += 1.0 + p.we / dt;
    if (i < n - 1) {
      at(r, vx_pos(i + 1)) += -eta1 / (2 * h);
      at(r, vx_pos(i - 1)) += eta1 / (2 * h);
    } else {
      at(r, vx_pos(n - 1)) += -3.0 * eta1 / (2 * h);
      at(r, vx_pos(n - 2)) += 4.0 * eta1 / (2 * h);
      at(r, vx_pos(n - 3)) += -eta1 / (2 * h);
    }
  }
  // Wall: total shear stress + F(vw) = 0; F(vw) enters as a separate column.
  {
    const int r = vx_pos(n - 1);
    at(r, t1_pos(n - 1)) += 1.0;
    at(r, vx_pos(n - 1)) += 3.0 * eta2 / (2 * h);
    at(r, vx_pos(n - 2)) += -4.0 * eta2 / (2 * h);
    at(r, vx_pos(n - 3)) += eta2 / (2 * h);
  }

  const lapack_int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, m, m, kl_, ku_,
                                         band_.data(), ldab_, pivots_.data());
  if (info != 0)
    throw std::runtime_error("ImplicitEulerOperator: singular step matrix");

  Eigen::VectorXd grad(m);
  grad.setZero();
  for (int i = 1; i <= n - 2; ++i) grad[vx_pos(i)] = 1.0;
  grad_col_ = solve(grad);
  Eigen::VectorXd slip = Eigen::VectorXd::Zero(m);
  slip[vx_pos(n - 1)] = 1.0;
  slip_col_ = solve(slip);

  weights_ = simpson_weights(g);
  for (int i = 0; i < n; ++i) {
    weights_dot_grad_ += weights_[i] * grad_col_[vx_pos(i)];
    weights_dot_slip_ += weights_[i] * slip_col_[vx_pos(i)];
  }
}

Eigen::VectorXd ImplicitEulerOperator::solve(Eigen::VectorXd rhs) const {
  const int m = static_cast<int>(rhs.size());
  const lapack_int info =
      LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', m, kl_, ku_, 1, band_.data(),
                     ldab_, pivots_.data(), rhs.data(), m);
  if (info != 0) throw std::runtime_error("ImplicitEulerOperator: solve failed");
  return rhs;
}

StepResult ImplicitEulerOperator::step(const FlowState& u, double q) const {
  const int n = grid_.n;
  if (u.nodes() != n || u.t1.size() != n)
    throw std::invalid_argument("step: state does not match the grid");

  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n - 1);
  for (int i = 1; i <= n - 2; ++i)
    rhs[vx_pos(i)] = params_.re / dt_ * u.vx[i];
  for (int i = 1; i <= n - 1; ++i)
    rhs[t1_pos(i)] = params_.we / dt_ * u.t1[i];
  const Eigen::VectorXd base = solve(std::move(rhs));

  // x = base - G * grad_col - phi * slip_col with phi = F(vw) and G fixed by
  // the flow-rate constraint. This leaves vw affine in phi.
  double w_base = 0.0;
  for (int i = 0; i < n; ++i) w_base += weights_[i] * base[vx_pos(i)];
  const int wall = vx_pos(n - 1);
  auto grad_of = [&](double phi) {
    return (w_base - q - phi * weights_dot_slip_) / weights_dot_grad_;
  };
  const double vw0 =
      base[wall] - (w_base - q) / weights_dot_grad_ * grad_col_[wall];
  const double dvw =
      -slip_col_[wall] + weights_dot_slip_ / weights_dot_grad_ * grad_col_[wall];

  // Newton on r(phi) = phi - F(vw0 + dvw * phi), started from the old wall
  // velocity.
  double phi = slip_stress(u.vx[n - 1], params_);
  bool converged = false;
  for (int it = 0; it < newton_max_; ++it) {
    const double vw = vw0 + dvw * phi;
    const double r = phi - slip_stress(vw, params_);
    if (!std::isfinite(r)) break;
    if (std::abs(r) < newton_tol_ && it > 0) {
      converged = true;
      break;
    }
    const double dr = 1.0 - dvw * slip_stress_deriv(vw, params_);
    phi -= r / dr;
  }
  if (!converged)
    throw NewtonStallError("implicit step did not converge at t = " +
                           std::to_string(u.t));

  const double grad_p = grad_of(phi);
  StepResult out;
  out.state.vx.resize(n);
  out.state.t1.resize(n);
  for (int i = 0; i < n; ++i)
    out.state.vx[i] = base[vx_pos(i)] - grad_p * grad_col_[vx_pos(i)] -
                      phi * slip_col_[vx_pos(i)];
  out.state.t1[0] = 0.0;
  for (int i = 1; i < n; ++i)
    out.state.t1[i] = base[t1_pos(i)] - grad_p * grad_col_[t1_pos(i)] -
                      phi * slip_col_[t1_pos(i)];
  out.state.t = u.t + dt_;
  out.grad_p = grad_p;
  check_finite(out.state);
  return out;
}

StepResult step(const FlowState& u, const ModelParams& p,
                const StepperConfig& c) {
  c.validate();
  GridSpec g{u.nodes()};
  ImplicitEulerOperator op(g, p, c.dt, c.newton_tol, c.newton_max);
  return op.step(u, p.q);
}

FlowState evolve(const FlowState& u, const ModelParams& p, double horizon,
                 const StepperConfig& c) {
  PoiseuilleStepper stepper(GridSpec{u.nodes()}, p, c);
  return stepper.evolve(u, p.q, horizon);
}

PoiseuilleStepper::PoiseuilleStepper(GridSpec g, ModelParams p,
                                     StepperConfig c)
    : grid_(g), params_(p), config_(c),
      op_((c.validate(), g), p, c.dt, c.newton_tol, c.newton_max) {}

FlowState PoiseuilleStepper::evolve(const FlowState& u, double q,
                                    double horizon,
                                    const StepObserver& observer) const {
  if (horizon < 0.0) throw std::invalid_argument("evolve: negative horizon");
  const double dt = config_.dt;
  const double ratio = horizon / dt;
  long full = static_cast<long>(std::floor(ratio));
  double remainder = horizon - full * dt;
  // Treat horizons within round-off of a whole number of steps as exact.
  if (std::abs(ratio - std::round(ratio)) < 1e-9) {
    full = std::lround(ratio);
    remainder = 0.0;
  }
  const double t0 = u.t;
  FlowState s = u;
  for (long k = 0; k < full; ++k) {
    StepResult r = op_.step(s, q);
    s = std::move(r.state);
    if (observer) observer(s, r.grad_p);
  }
  if (remainder > dt * 1e-9) {
    ImplicitEulerOperator tail(grid_, params_, remainder, config_.newton_tol,
                               config_.newton_max);
    StepResult r = tail.step(s, q);
    s = std::move(r.state);
    if (observer) observer(s, r.grad_p);
  }
  s.t = t0 + horizon;
  return s;
}

Eigen::VectorXd PoiseuilleStepper::advance(const Eigen::VectorXd& u, double q,
                                           double horizon) const {
  return pack(evolve(unpack(u), q, horizon));
}

Eigen::VectorXd PoiseuilleStepper::observe(const Eigen::VectorXd& u, double q,
                                           double horizon,
                                           const OrbitObserver& observer) const {
  const FlowState end =
      evolve(unpack(u), q, horizon, [&](const FlowState& s, double) {
        observer(s.t, pack(s));
      });
  return pack(end);
}

FlowState PoiseuilleStepper::unpack(const Eigen::VectorXd& u) const {
  const int n = grid_.n;
  if (u.size() != 2 * n)
    throw std::invalid_argument("PoiseuilleStepper: state size mismatch");
  return FlowState{u.head(n), u.tail(n), 0.0};
}

Eigen::VectorXd PoiseuilleStepper::pack(const FlowState& s) const {
  Eigen::VectorXd u(2 * grid_.n);
  u << s.vx, s.t1;
  return u;
}

Eigen::VectorXd PoiseuilleStepper::steady_vector(double q) const {
  return pack(init_from_steady(solve_steady_for_q(q, params_), grid_, params_));
}

} // namespace spurt
