#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "spurt/continuation.hpp"
#include "spurt/errors.hpp"

using namespace spurt;
using doctest::Approx;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Oscillator in the plane (x, y) with a decaying third coordinate z.
// Polar form: rho = r^2 obeys rho' = 2 rho g(rho, mu), theta' = omega, z' = -z.
// Cubic: g = mu - rho, cycle rho = mu, radial multiplier exp(-2 mu T).
// Quintic: g = mu + rho - rho^2, cycles rho = (1 +- sqrt(1 + 4 mu)) / 2 with
// a fold at mu = -1/4, radial multiplier exp(2 rho (1 - 2 rho) T).
class NormalForm final : public Timestepper {
public:
  explicit NormalForm(bool quintic) : quintic_(quintic) {}

  Eigen::Index dimension() const override { return 3; }
  double time_step() const override { return 1e-3; }

  Vector advance(const Vector& u, double mu, double horizon) const override {
    double rho = u[0] * u[0] + u[1] * u[1];
    const double theta = std::atan2(u[1], u[0]) + kOmega * horizon;
    if (!quintic_) {
      if (rho > 0.0) {
        const double e = std::exp(-2.0 * mu * horizon);
        rho = mu / (1.0 + (mu / rho - 1.0) * e);
      }
    } else {
      const int steps = std::max(1, static_cast<int>(std::ceil(horizon / 1e-3)));
      const double h = horizon / steps;
      auto f = [mu](double r) { return 2.0 * r * (mu + r - r * r); };
      for (int k = 0; k < steps; ++k) {
        const double k1 = f(rho), k2 = f(rho + 0.5 * h * k1);
        const double k3 = f(rho + 0.5 * h * k2), k4 = f(rho + h * k3);
        rho += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      }
    }
    const double r = std::sqrt(std::max(rho, 0.0));
    Vector out(3);
    out << r * std::cos(theta), r * std::sin(theta), u[2] * std::exp(-horizon);
    return out;
  }

  static constexpr double kOmega = kTwoPi;

private:
  bool quintic_;
};

Vector on_circle(double r, double z = 0.0) {
  Vector u(3);
  u << r, 0.0, z;
  return u;
}

// Linear relaxation u' = -d (u - mu c): fixed point mu c, eigenvalues -d.
class Relaxation final : public Timestepper {
public:
  Relaxation() : d_(4), c_(4) {
    d_ << 1.0, 2.0, 5.0, 10.0;
    c_ << 1.0, -1.0, 0.5, 2.0;
  }
  Eigen::Index dimension() const override { return 4; }
  double time_step() const override { return 1e-3; }
  Vector advance(const Vector& u, double mu, double horizon) const override {
    const Vector target = mu * c_;
    return target.array() + (u - target).array() * (-d_.array() * horizon).exp();
  }
  const Vector& rates() const { return d_; }
  const Vector& centre() const { return c_; }

private:
  Vector d_, c_;
};

} // namespace

TEST_CASE("phase residual") {
  Vector u(3), r(3), d(3);
  u << 1.0, 2.0, 3.0;
  r << 1.0, 1.0, 1.0;
  d << 0.0, 1.0, -1.0;
  CHECK(phase_residual(u, r, d) == Approx(1.0 - 2.0));
  CHECK(phase_residual(r, r, d) == 0.0);
  CHECK_THROWS(phase_residual(u, Vector::Zero(2), d));
}

TEST_CASE("oscillation analysis of a sampled sine") {
  std::vector<double> t, v;
  for (int k = 0; k <= 10000; ++k) {
    t.push_back(k * 1e-3);
    v.push_back(0.8 + 0.05 * std::sin(kTwoPi * t.back() / 0.7));
  }
  const OscillationSummary s = analyse_oscillation(t, v);
  CHECK(s.sustained);
  CHECK(s.period == Approx(0.7).epsilon(2e-3));
  CHECK(s.amplitude_spread < 1e-3);
  for (double p : s.peaks) CHECK(p == Approx(0.85).epsilon(1e-4));
  for (double p : s.troughs) CHECK(p == Approx(0.75).epsilon(1e-4));

  // Decaying oscillation is not sustained.
  for (std::size_t k = 0; k < v.size(); ++k)
    v[k] = 0.8 + 0.05 * std::exp(-t[k]) * std::sin(kTwoPi * t[k] / 0.7);
  CHECK_FALSE(analyse_oscillation(t, v).sustained);

  // Constant signal.
  std::fill(v.begin(), v.end(), 0.8);
  const OscillationSummary c = analyse_oscillation(t, v);
  CHECK_FALSE(c.sustained);
  CHECK(c.peaks.empty());
}

TEST_CASE("steady Newton and eigenvalues on a linear relaxation") {
  const Relaxation ts;
  const BranchPoint p = newton_fixed_point(ts, Vector::Zero(4), 0.7, 0.1, 1e-12);
  CHECK((p.u - 0.7 * ts.centre()).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(p.newton_iterations <= 2);

  BranchPoint q = p;
  SolverConfig cfg;
  cfg.eigen.tol = 1e-9;
  const EigenReport rep = steady_stability(q, ts, 0.1, 2, cfg);
  REQUIRE(q.lead_eigs.size() >= 2);
  CHECK(q.lead_eigs[0].real() == Approx(-1.0).epsilon(1e-6));
  CHECK(q.lead_eigs[1].real() == Approx(-2.0).epsilon(1e-6));
  CHECK(std::abs(q.lead_eigs[0].imag()) < 1e-9);
  CHECK(q.stable);
  CHECK(rep.converged);
}

TEST_CASE("steady continuation follows a linear branch") {
  const Relaxation ts;
  SolverConfig cfg;
  cfg.k_eigs = 2;
  cfg.ds_max = 0.5;
  const auto branch = continue_steady(ts, {0.0, 1.0}, 0.2, cfg,
                                      [&ts](double mu) { return Vector(mu * ts.centre()); });
  REQUIRE(branch.size() >= 3);
  CHECK(branch.front().mu == Approx(0.0));
  CHECK(branch.back().mu >= 1.0 - 1e-9);
  for (const auto& p : branch) {
    CHECK((p.u - p.mu * ts.centre()).lpNorm<Eigen::Infinity>() < 1e-7);
    CHECK(p.stable);
  }
}

TEST_CASE("periodic orbit of the cubic normal form") {
  const NormalForm ts(false);
  SolverConfig cfg;
  cfg.newton_tol = 1e-10;
  const double mu = 0.25;
  CyclePoint c = solve_cycle(ts, on_circle(0.45, 0.01), 0.95, mu, cfg);
  CHECK(c.period == Approx(1.0).epsilon(1e-7));
  CHECK(c.u0.head(2).norm() == Approx(0.5).epsilon(1e-7));
  CHECK(std::abs(c.u0[2]) < 1e-8);
  CHECK(c.residual < 1e-10);

  floquet(ts, c, 3, cfg);
  REQUIRE(c.floquet.size() == 3);
  REQUIRE(c.trivial_index >= 0);
  CHECK(std::abs(c.floquet[c.trivial_index] - Complex(1.0, 0.0)) < 1e-4);
  // Remaining multipliers exp(-T) and exp(-2 mu T), both real.
  std::vector<double> others;
  for (int i = 0; i < 3; ++i)
    if (i != c.trivial_index) others.push_back(c.floquet[i].real());
  CHECK(others[0] == Approx(std::exp(-0.5)).epsilon(1e-4));
  CHECK(others[1] == Approx(std::exp(-1.0)).epsilon(1e-4));
  CHECK(c.stable);
  CHECK(c.lead_nontrivial_modulus() == Approx(std::exp(-0.5)).epsilon(1e-4));
}

TEST_CASE("exact period column gives the same cycle") {
  const NormalForm ts(false);
  SolverConfig cfg;
  cfg.newton_tol = 1e-10;
  cfg.exact_period_column = true;
  const CyclePoint c = solve_cycle(ts, on_circle(0.45), 0.95, 0.25, cfg);
  CHECK(c.period == Approx(1.0).epsilon(1e-7));
  CHECK(c.u0.head(2).norm() == Approx(0.5).epsilon(1e-7));
}

TEST_CASE("cycle continuation on the cubic normal form") {
  const NormalForm ts(false);
  SolverConfig cfg;
  cfg.k_eigs = 3;
  CyclePoint seed = solve_cycle(ts, on_circle(0.5), 1.0, 0.25, cfg);
  CycleContinuationLimits lim;
  lim.mu_max = 0.6;
  lim.seed_dmu = 0.01;
  const CycleBranch b = continue_cycles(ts, seed, 0.05, 30, cfg, lim);
  REQUIRE(b.points.size() >= 4);
  CHECK_FALSE(b.fold.has_value());
  for (const auto& p : b.points) {
    CHECK(p.u0.head(2).norm() == Approx(std::sqrt(p.mu)).epsilon(1e-6));
    CHECK(p.period == Approx(1.0).epsilon(1e-6));
    CHECK(p.stable);
  }
  CHECK(b.points.back().mu <= 0.6 + 0.05);
  for (std::size_t k = 1; k < b.arclength.size(); ++k) CHECK(b.arclength[k] > b.arclength[k - 1]);

  const CyclePoint mid = cycle_on_branch(ts, b, 0.4, cfg);
  CHECK(mid.mu == 0.4);
  CHECK(mid.u0.head(2).norm() == Approx(std::sqrt(0.4)).epsilon(1e-6));
}

TEST_CASE("cycle fold of the quintic normal form") {
  const NormalForm ts(true);
  SolverConfig cfg;
  cfg.k_eigs = 3;
  cfg.ds_max = 0.02;
  // Large stable cycle at mu = 0: rho = 1.
  const CyclePoint seed = solve_cycle(ts, on_circle(1.0), 1.0, 0.0, cfg);
  CHECK(seed.u0.head(2).norm() == Approx(1.0).epsilon(1e-6));
  CycleContinuationLimits lim;
  lim.seed_dmu = -0.01;
  lim.min_amplitude = 0.4; // stop once r < 0.2 on the inner branch
  const Monitor x = [](const Vector& u) { return u[0]; };
  const CycleBranch b = continue_cycles(ts, seed, 0.02, 200, cfg, lim, x);
  CHECK(b.stop_reason.find("amplitude") != std::string::npos);
  REQUIRE(b.fold.has_value());
  CHECK(std::abs(b.fold->q_fold + 0.25) < 2e-4);

  bool saw_unstable = false;
  for (const auto& p : b.points) {
    const double rho = p.u0.head(2).squaredNorm();
    CHECK(p.mu == Approx(rho * rho - rho).epsilon(1e-6));
    REQUIRE(p.trivial_index >= 0);
    CHECK(std::abs(p.floquet[p.trivial_index] - Complex(1.0, 0.0)) < 1e-2);
    // Stable exactly on the outer branch.
    if (std::abs(rho - 0.5) > 0.02) CHECK(p.stable == (rho > 0.5));
    if (rho < 0.48) {
      saw_unstable = true;
      double lead = 0.0;
      for (int i = 0; i < static_cast<int>(p.floquet.size()); ++i)
        if (i != p.trivial_index) lead = std::max(lead, std::abs(p.floquet[i]));
      CHECK(lead == Approx(std::exp(2 * rho * (1 - 2 * rho))).epsilon(1e-3));
    }
  }
  CHECK(saw_unstable);
}

TEST_CASE("Poiseuille steady stability around the Hopf points") {
  ModelParams p;
  const PoiseuilleStepper st(GridSpec{201}, p, StepperConfig{1e-5});
  SolverConfig cfg;
  auto leading = [&](double q) {
    BranchPoint b = newton_fixed_point(st, st.steady_vector(q), q, cfg.t_h, 1e-10, cfg);
    steady_stability(b, st, cfg.t_h, 4, cfg);
    return b;
  };
  const BranchPoint a = leading(0.413);
  const BranchPoint b = leading(0.414);
  const BranchPoint c = leading(0.521);
  const BranchPoint d = leading(0.522);
  CHECK(a.stable);
  CHECK_FALSE(b.stable);
  CHECK_FALSE(c.stable);
  CHECK(d.stable);
  // Leading pair is complex with frequency near 112.
  CHECK(std::abs(b.lead_eigs[0].imag()) == Approx(111.7).epsilon(0.01));
  CHECK(std::abs(b.lead_eigs[0].imag() + b.lead_eigs[1].imag()) < 1e-6);
}

TEST_CASE("Poiseuille Newton reproduces the analytic steady state") {
  ModelParams p;
  const PoiseuilleStepper st(GridSpec{101}, p, StepperConfig{1e-5});
  const Vector exact = st.steady_vector(0.3);
  const Vector guess = st.steady_vector(0.31);
  const BranchPoint b = newton_fixed_point(st, guess, 0.3, 1e-3, 1e-10);
  CHECK((b.u - exact).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("solver failures are reported") {
  const NormalForm ts(false);
  SolverConfig cfg;
  cfg.newton_max = 1;
  cfg.newton_tol = 1e-14;
  CHECK_THROWS_AS(solve_cycle(ts, on_circle(0.1), 0.5, 0.25, cfg), NewtonDiverged);
}
