#include "spurt/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "spurt/errors.hpp"
#include "spurt/model.hpp"

namespace spurt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

struct Unknowns {
  Vector u;
  double mu = 0.0;
  double period = 0.0;
};

struct PhaseCondition {
  Vector u_ref;
  Vector direction; // unit time derivative of the reference orbit
};

/// Linearized pseudo arc-length hyperplane through `base`, normal to the
/// unit tangent in the weighted inner product.
struct ArcCondition {
  Unknowns base;
  Tangent tangent;
  double ds = 0.0;
  double state_weight = 1.0;
  double period_weight = 1.0;
};

struct NewtonOutcome {
  Unknowns z;
  double residual = kInf;
  double phase = 0.0;
  double arc = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string failure;
};

double weighted_dot(const Vector& du1, double dmu1, double dp1,
                    const Vector& du2, double dmu2, double dp2, double wu,
                    double wt) {
  return wu * du1.dot(du2) + dmu1 * dmu2 + wt * dp1 * dp2;
}

double state_weight_for(const SolverConfig& cfg, Eigen::Index dim) {
  return cfg.state_weight > 0.0 ? cfg.state_weight : 1.0 / double(dim);
}

Vector time_derivative(const Timestepper& ts, const Vector& u, double mu) {
  const double dt = ts.time_step();
  return (ts.advance(u, mu, dt) - u) / dt;
}

/// Newton-GMRES on the fixed-point system u = Phi_T(u, mu), optionally
/// bordered by a phase condition (T unknown) and an arc-length condition
/// (mu unknown).
NewtonOutcome augmented_newton(const Timestepper& ts, Unknowns z,
                               const PhaseCondition* phase,
                               const ArcCondition* arc, double tol,
                               const SolverConfig& cfg) {
  const Eigen::Index dim = ts.dimension();
  const double dt = ts.time_step();
  const Eigen::Index mu_slot = dim;
  const Eigen::Index period_slot = dim + (arc ? 1 : 0);
  const Eigen::Index m = dim + (arc ? 1 : 0) + (phase ? 1 : 0);

  NewtonOutcome out;
  for (int it = 0;; ++it) {
    if (phase && z.period < 10.0 * dt)
      throw PeriodCollapse("period " + std::to_string(z.period) +
                           " fell below 10 dt");

    const Vector phi = ts.advance(z.u, z.mu, z.period);
    const Vector r = z.u - phi;
    out.z = z;
    out.iterations = it;
    out.residual = r.lpNorm<Eigen::Infinity>();
    out.phase = phase ? phase_residual(z.u, phase->u_ref, phase->direction) : 0;
    out.arc = 0.0;
    if (arc) {
      const Unknowns& b = arc->base;
      out.arc = weighted_dot(arc->tangent.du, arc->tangent.dmu,
                             arc->tangent.dperiod, z.u - b.u, z.mu - b.mu,
                             z.period - b.period, arc->state_weight,
                             arc->period_weight) -
                arc->ds;
    }
    if (!std::isfinite(out.residual)) {
      out.failure = "non-finite residual";
      return out;
    }
    if (out.residual < tol && std::abs(out.phase) < tol &&
        std::abs(out.arc) < tol) {
      out.converged = true;
      return out;
    }
    if (it >= cfg.newton_max) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "iteration cap reached (residual %.3e)",
                    out.residual);
      out.failure = buf;
      return out;
    }

    Vector dphi_dmu, dphi_dt;
    if (arc) {
      const double h = 1e-6 * (1.0 + std::abs(z.mu));
      dphi_dmu = (ts.advance(z.u, z.mu + h, z.period) - phi) / h;
    }
    if (phase) {
      if (cfg.exact_period_column) {
        // Derivative of the discrete period map itself: only the length of
        // the final partial step depends on T.
        const double h = 1e-3 * dt;
        dphi_dt = (ts.advance(z.u, z.mu, z.period + h) - phi) / h;
      } else {
        dphi_dt = (ts.advance(phi, z.mu, dt) - phi) / dt;
      }
    }

    const double mu = z.mu, period = z.period;
    DirectionalDerivative jac(
        [&ts, mu, period](const Vector& v) { return ts.advance(v, mu, period); },
        z.u, phi, cfg.linear.eps0);
    if (cfg.linear.central)
      jac = DirectionalDerivative(
          [&ts, mu, period](const Vector& v) { return ts.advance(v, mu, period); },
          z.u, cfg.linear.eps0, true);

    LinearOperator op;
    op.dim = m;
    op.apply = [&](const Vector& x) {
      const Vector du = x.head(dim);
      Vector y(m);
      Vector top = du - jac(du);
      if (arc) top -= x[mu_slot] * dphi_dmu;
      if (phase) top -= x[period_slot] * dphi_dt;
      y.head(dim) = top;
      if (arc) {
        y[mu_slot] = weighted_dot(arc->tangent.du, arc->tangent.dmu,
                                  arc->tangent.dperiod, du, x[mu_slot],
                                  phase ? x[period_slot] : 0.0,
                                  arc->state_weight, arc->period_weight);
      }
      if (phase) y[period_slot] = phase->direction.dot(du);
      return y;
    };

    Vector rhs(m);
    rhs.head(dim) = -r;
    if (arc) rhs[mu_slot] = -out.arc;
    if (phase) rhs[period_slot] = -out.phase;

    Vector delta;
    try {
      delta = gmres(op, rhs, Vector::Zero(m), cfg.linear).x;
    } catch (const BreakdownError& e) {
      out.failure = e.what();
      return out;
    }
    z.u += delta.head(dim);
    if (arc) z.mu += delta[mu_slot];
    if (phase) z.period += delta[period_slot];
  }
}

std::pair<double, double> monitor_range(const Timestepper& ts, const Vector& u,
                                        double mu, double period,
                                        const Monitor& monitor) {
  double hi = monitor(u), lo = hi;
  ts.observe(u, mu, period, [&](double, const Vector& s) {
    const double v = monitor(s);
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  });
  return {hi, lo};
}

CyclePoint make_cycle(const Timestepper& ts, const NewtonOutcome& o,
                      const Monitor& monitor) {
  CyclePoint c;
  c.u0 = o.z.u;
  c.period = o.z.period;
  c.mu = o.z.mu;
  c.residual = o.residual;
  c.phase_residual = o.phase;
  c.newton_iterations = o.iterations;
  if (monitor) {
    auto [hi, lo] = monitor_range(ts, c.u0, c.mu, c.period, monitor);
    c.monitor_max = hi;
    c.monitor_min = lo;
  }
  return c;
}

} // namespace

double CyclePoint::lead_nontrivial_modulus() const {
  double best = 0.0;
  for (std::size_t i = 0; i < floquet.size(); ++i)
    if (static_cast<int>(i) != trivial_index)
      best = std::max(best, std::abs(floquet[i]));
  return best;
}

double phase_residual(const Vector& u, const Vector& u_ref,
                      const Vector& du_ref) {
  if (u.size() != u_ref.size() || u.size() != du_ref.size())
    throw std::invalid_argument("phase_residual: dimension mismatch");
  return du_ref.dot(u - u_ref);
}

BranchPoint newton_fixed_point(const Timestepper& ts, const Vector& u0,
                               double mu, double t_h, double tol,
                               const SolverConfig& cfg) {
  NewtonOutcome o =
      augmented_newton(ts, Unknowns{u0, mu, t_h}, nullptr, nullptr, tol, cfg);
  if (!o.converged)
    throw NewtonDiverged("steady Newton at mu = " + std::to_string(mu) + ": " +
                         o.failure);
  BranchPoint p;
  p.u = std::move(o.z.u);
  p.mu = mu;
  p.residual = o.residual;
  p.newton_iterations = o.iterations;
  return p;
}

EigenReport steady_stability(BranchPoint& point, const Timestepper& ts,
                             double t_h, int k, const SolverConfig& cfg) {
  const double mu = point.mu;
  DirectionalDerivative jac(
      [&ts, mu, t_h](const Vector& v) { return ts.advance(v, mu, t_h); },
      point.u, cfg.eigen.eps0);
  KrylovConfig kc = cfg.eigen;
  kc.max_dim = static_cast<int>(std::min<Eigen::Index>(
      std::max(kc.max_dim, default_arnoldi_steps(k)), ts.dimension()));
  EigenReport rep = arnoldi_eigs(jac.as_operator(), k, kc, cfg.eig_restarts, false);
  rep.lambdas = to_continuous(rep.kappas, t_h);
  point.lead_eigs = rep.lambdas;
  double max_re = -kInf;
  for (const auto& l : rep.lambdas) max_re = std::max(max_re, l.real());
  point.stable = max_re < 0.0;
  return rep;
}

std::vector<BranchPoint>
continue_steady(const Timestepper& ts, std::pair<double, double> q_range,
                double ds, const SolverConfig& cfg,
                const std::function<Vector(double)>& guess) {
  const auto [q_start, q_end] = q_range;
  const double dir = q_end >= q_start ? 1.0 : -1.0;
  const double wu = state_weight_for(cfg, ts.dimension());
  const double t_h = cfg.t_h;

  std::vector<BranchPoint> branch;
  auto finish = [&](BranchPoint p) {
    steady_stability(p, ts, t_h, cfg.k_eigs, cfg);
    branch.push_back(std::move(p));
  };
  finish(newton_fixed_point(ts, guess(q_start), q_start, t_h, cfg.newton_tol,
                            cfg));
  const double q1 = q_start + dir * std::min(0.25 * ds, std::abs(q_end - q_start));
  finish(newton_fixed_point(ts, guess(q1), q1, t_h, cfg.newton_tol, cfg));

  double step = ds;
  const double ds_min = std::min(cfg.ds_min, ds);
  for (int n = 0; n < cfg.n_steps; ++n) {
    const BranchPoint& p0 = branch[branch.size() - 2];
    const BranchPoint& p1 = branch.back();
    if ((p1.mu - q_end) * dir >= 0.0) break;

    Tangent t{p1.u - p0.u, p1.mu - p0.mu, 0.0};
    const double len = std::sqrt(weighted_dot(t.du, t.dmu, 0, t.du, t.dmu, 0, wu, 1));
    t.du /= len;
    t.dmu /= len;

    for (;;) {
      ArcCondition arc{Unknowns{p1.u, p1.mu, t_h}, t, step, wu, 1.0};
      Unknowns pred{p1.u + step * t.du, p1.mu + step * t.dmu, t_h};
      NewtonOutcome o =
          augmented_newton(ts, pred, nullptr, &arc, cfg.newton_tol, cfg);
      if (o.converged) {
        BranchPoint p;
        p.u = std::move(o.z.u);
        p.mu = o.z.mu;
        p.residual = o.residual;
        p.newton_iterations = o.iterations;
        p.tangent = t;
        const bool fast = o.iterations <= 3;
        finish(std::move(p));
        if (fast) step = std::min(step * 1.3, cfg.ds_max);
        break;
      }
      step *= 0.5;
      if (step < ds_min)
        throw StepFailure("steady continuation stalled at mu = " +
                          std::to_string(p1.mu) + ": " + o.failure);
    }
  }
  return branch;
}

HopfPoint detect_hopf(const PoiseuilleStepper& stepper,
                      std::pair<double, double> bracket,
                      const SolverConfig& cfg) {
  struct Eval {
    double max_re;
    double omega;
  };
  auto eval = [&](double q) {
    BranchPoint p = newton_fixed_point(stepper, stepper.steady_vector(q), q,
                                       cfg.t_h, cfg.newton_tol, cfg);
    steady_stability(p, stepper, cfg.t_h, cfg.k_eigs, cfg);
    Eval e{-kInf, 0.0};
    for (const auto& l : p.lead_eigs) {
      if (l.real() > e.max_re) {
        e.max_re = l.real();
        e.omega = std::abs(l.imag());
      }
    }
    return e;
  };

  double lo = bracket.first, hi = bracket.second;
  Eval flo = eval(lo), fhi = eval(hi);
  if ((flo.max_re < 0.0) == (fhi.max_re < 0.0))
    throw NoSignChange("detect_hopf: max Re lambda has the same sign at " +
                       std::to_string(lo) + " and " + std::to_string(hi));

  HopfPoint hp;
  double q = 0.5 * (lo + hi);
  Eval fq = eval(q);
  hp.iterations = 1;
  while (std::abs(fq.max_re) >= cfg.hopf_tol && hp.iterations < cfg.hopf_max_iter) {
    if ((fq.max_re < 0.0) == (flo.max_re < 0.0)) {
      lo = q;
      flo = fq;
    } else {
      hi = q;
      fhi = fq;
    }
    q = 0.5 * (lo + hi);
    fq = eval(q);
    ++hp.iterations;
  }
  hp.q_c = q;
  hp.omega = fq.omega;
  hp.re_lambda = fq.max_re;
  const ModelParams& p = stepper.params();
  hp.vw_star = solve_steady_for_q(q, p).vw;
  hp.fprime_star = slip_stress_deriv(hp.vw_star, p);
  return hp;
}

OscillationSummary analyse_oscillation(const std::vector<double>& times,
                                       const std::vector<double>& values,
                                       int cycles, double spread) {
  OscillationSummary s;
  const std::size_t n = values.size();
  if (n < 3 || times.size() != n) return s;
  const auto tail = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  const double hi = *std::max_element(tail, values.end());
  const double lo = *std::min_element(tail, values.end());
  if (hi - lo <= 1e-9 * std::max(1.0, std::abs(hi))) return s;
  const double mid = 0.5 * (hi + lo);

  std::vector<std::size_t> ups;
  for (std::size_t k = 1; k < n; ++k)
    if (values[k - 1] < mid && values[k] >= mid) ups.push_back(k);
  for (std::size_t c = 0; c + 1 < ups.size(); ++c) {
    std::size_t imax = ups[c];
    double vmin = values[ups[c]];
    for (std::size_t k = ups[c]; k < ups[c + 1]; ++k) {
      if (values[k] > values[imax]) imax = k;
      vmin = std::min(vmin, values[k]);
    }
    s.peaks.push_back(values[imax]);
    s.troughs.push_back(vmin);
    s.peak_times.push_back(times[imax]);
    s.peak_index.push_back(imax);
  }
  const std::size_t nc = s.peaks.size();
  if (nc < static_cast<std::size_t>(std::max(cycles, 2))) return s;

  double amax = -kInf, amin = kInf, asum = 0.0;
  for (std::size_t c = nc - cycles; c < nc; ++c) {
    const double a = s.peaks[c] - s.troughs[c];
    amax = std::max(amax, a);
    amin = std::min(amin, a);
    asum += a;
  }
  s.amplitude_spread = (amax - amin) / (asum / cycles);
  s.sustained = s.amplitude_spread < spread;
  const std::size_t first = nc > static_cast<std::size_t>(cycles) ? nc - cycles - 1 : 0;
  s.period = (s.peak_times[nc - 1] - s.peak_times[first]) / double(nc - 1 - first);
  return s;
}

TransientResult transient_capture(const PoiseuilleStepper& stepper,
                                  const FlowState& u0, double q, double t_max,
                                  int sample_every) {
  if (!(t_max > 0.0)) throw std::invalid_argument("transient_capture: t_max <= 0");
  sample_every = std::max(1, sample_every);
  const GridSpec& g = stepper.grid();
  const Eigen::VectorXd w = simpson_weights(g);
  const int n = g.n;

  TransientResult res;
  std::vector<double> times, values;
  auto record = [&](const FlowState& s, double grad_p) {
    res.series.push_back(
        {s.t, grad_p, s.vx[n - 1], w.dot(s.vx), stress_at_mid(s)});
  };
  record(u0, pressure_gradient(u0, stepper.params()));
  times.push_back(u0.t);
  values.push_back(-pressure_gradient(u0, stepper.params()));

  long count = 0;
  stepper.evolve(u0, q, t_max, [&](const FlowState& s, double grad_p) {
    ++count;
    times.push_back(s.t);
    values.push_back(-grad_p);
    if (count % sample_every == 0) record(s, grad_p);
  });

  OscillationSummary osc = analyse_oscillation(times, values);
  res.peak_values = osc.peaks;
  res.trough_values = osc.troughs;
  res.peak_times = osc.peak_times;
  res.oscillating = osc.sustained;
  if (osc.sustained) {
    res.period_est = osc.period;
    const long steps = static_cast<long>(osc.peak_index.back());
    res.seed = stepper.evolve(u0, q, steps * stepper.config().dt);
  } else {
    res.seed = stepper.evolve(u0, q, t_max);
  }
  return res;
}

CyclePoint solve_cycle(const Timestepper& ts, const Vector& u_guess,
                       double period_guess, double mu, const SolverConfig& cfg,
                       const Monitor& monitor) {
  Vector du = time_derivative(ts, u_guess, mu);
  const double norm = du.norm();
  if (!(norm > 0.0))
    throw std::invalid_argument("solve_cycle: guess is a fixed point");
  PhaseCondition phase{u_guess, du / norm};
  NewtonOutcome o = augmented_newton(ts, Unknowns{u_guess, mu, period_guess},
                                     &phase, nullptr, cfg.newton_tol, cfg);
  if (!o.converged)
    throw NewtonDiverged("cycle Newton at mu = " + std::to_string(mu) + ": " +
                         o.failure);
  return make_cycle(ts, o, monitor);
}

EigenReport floquet(const Timestepper& ts, CyclePoint& cycle, int k,
                    const SolverConfig& cfg) {
  const double mu = cycle.mu, period = cycle.period;
  DirectionalDerivative jac(
      [&ts, mu, period](const Vector& v) { return ts.advance(v, mu, period); },
      cycle.u0, cfg.eigen.eps0, cfg.eigen.central);

  // The flow direction du/dt (second-order one-sided difference along the
  // discrete orbit) is the eigenvector of the phase multiplier. Its
  // value is measured by a Rayleigh quotient and the pair is removed by
  // Wielandt deflation, M - f f^T, so it cannot merge with a real multiplier
  // crossing 1 at a fold.
  const double dt = ts.time_step();
  const Vector u1 = ts.advance(cycle.u0, mu, dt);
  Vector f = (4.0 * u1 - 3.0 * cycle.u0 - ts.advance(u1, mu, dt)) / (2.0 * dt);
  f /= f.norm();
  const Vector mf = jac(f);
  const double trivial = f.dot(mf);
  LinearOperator deflated{
      [&jac, &f](const Vector& v) {
        Vector w = jac(v);
        w.noalias() -= f * f.dot(w);
        return w;
      },
      ts.dimension()};

  KrylovConfig kc = cfg.eigen;
  kc.max_dim = static_cast<int>(std::min<Eigen::Index>(
      std::max(kc.max_dim, default_arnoldi_steps(k)), ts.dimension()));
  EigenReport rep = arnoldi_eigs(deflated, k, kc, cfg.eig_restarts, false);

  // Drop the deflated zero and insert the measured phase multiplier.
  std::vector<Complex> kappas;
  for (const Complex& z : rep.kappas)
    if (std::abs(z) > 1e-3) kappas.push_back(z);
  while (static_cast<int>(kappas.size()) >= k) kappas.pop_back();
  const Complex triv(trivial, 0.0);
  auto pos = std::find_if(kappas.begin(), kappas.end(), [&](const Complex& z) {
    return std::abs(z) < std::abs(triv);
  });
  cycle.trivial_index = static_cast<int>(pos - kappas.begin());
  kappas.insert(pos, triv);
  cycle.floquet = kappas;
  cycle.stable = cycle.lead_nontrivial_modulus() < 1.0;
  return rep;
}

CycleBranch continue_cycles(const Timestepper& ts, const CyclePoint& seed,
                            double ds, int n_steps, const SolverConfig& cfg,
                            const CycleContinuationLimits& limits,
                            const Monitor& monitor) {
  const double wu = state_weight_for(cfg, ts.dimension());
  const double wt = cfg.period_weight;
  auto dist = [&](const CyclePoint& a, const CyclePoint& b) {
    const Vector du = a.u0 - b.u0;
    return std::sqrt(weighted_dot(du, a.mu - b.mu, a.period - b.period, du,
                                  a.mu - b.mu, a.period - b.period, wu, wt));
  };
  auto finish = [&](CyclePoint c) {
    if (limits.compute_floquet) floquet(ts, c, cfg.k_eigs, cfg);
    if (limits.on_point) limits.on_point(c);
    return c;
  };

  CycleBranch branch;
  CyclePoint p0 = seed;
  if (limits.compute_floquet && p0.floquet.empty()) p0 = finish(p0);
  CyclePoint p1 = finish(solve_cycle(ts, seed.u0, seed.period,
                                     seed.mu + limits.seed_dmu, cfg, monitor));
  branch.points = {p0, p1};
  branch.arclength = {0.0, dist(p1, p0)};

  double step = ds;
  const double ds_min = std::min(cfg.ds_min, ds);
  for (int n = 0; n < n_steps; ++n) {
    const CyclePoint& a = branch.points[branch.points.size() - 2];
    const CyclePoint& b = branch.points.back();
    const double len = dist(b, a);
    Tangent t{(b.u0 - a.u0) / len, (b.mu - a.mu) / len,
              (b.period - a.period) / len};

    Vector du = time_derivative(ts, b.u0, b.mu);
    PhaseCondition phase{b.u0, du / du.norm()};

    std::optional<CyclePoint> next;
    std::string failure;
    while (!next) {
      ArcCondition arc{Unknowns{b.u0, b.mu, b.period}, t, step, wu, wt};
      Unknowns pred{b.u0 + step * t.du, b.mu + step * t.dmu,
                    b.period + step * t.dperiod};
      try {
        NewtonOutcome o =
            augmented_newton(ts, pred, &phase, &arc, cfg.newton_tol, cfg);
        if (o.converged) {
          CyclePoint c = make_cycle(ts, o, monitor);
          // A period far from the predicted one (a multiple of it) or a
          // sudden loss of amplitude means the corrector reached another
          // solution branch.
          const bool jumped =
              std::abs(c.period - pred.period) > 0.25 * b.period ||
              (monitor && c.monitor_max - c.monitor_min <
                              0.25 * (b.monitor_max - b.monitor_min));
          if (!jumped) {
            next = std::move(c);
            if (o.iterations <= 3) step = std::min(step * 1.3, cfg.ds_max);
            break;
          }
          failure = "corrector left the branch";
        } else {
          failure = o.failure;
        }
      } catch (const Error& e) {
        failure = e.what();
      }
      step *= 0.5;
      if (step < ds_min) break;
    }
    if (!next) {
      branch.stop_reason = "step failure: " + failure;
      return branch;
    }

    branch.points.push_back(finish(std::move(*next)));
    branch.arclength.push_back(branch.arclength.back() +
                               dist(branch.points.back(),
                                    branch.points[branch.points.size() - 2]));

    const std::size_t k = branch.points.size() - 1;
    const double m0 = branch.points[k - 2].mu, m1 = branch.points[k - 1].mu,
                 m2 = branch.points[k].mu;
    if (!branch.fold && (m1 - m0) * (m2 - m1) < 0.0) {
      // Quadratic Q(s) through the three points around the turning point.
      const double s0 = branch.arclength[k - 2], s1 = branch.arclength[k - 1],
                   s2 = branch.arclength[k];
      const double d01 = (m1 - m0) / (s1 - s0), d12 = (m2 - m1) / (s2 - s1);
      const double c2 = (d12 - d01) / (s2 - s0);
      const double c1 = d01 - c2 * (s0 + s1);
      const double c0 = m0 - c1 * s0 - c2 * s0 * s0;
      double q_fold = m1;
      if (c2 != 0.0) {
        const double s_star = -c1 / (2.0 * c2);
        q_fold = c0 + c1 * s_star + c2 * s_star * s_star;
      }
      branch.fold = FoldPoint{q_fold, branch.points[k - 1]};
    }

    const CyclePoint& last = branch.points.back();
    if (last.mu < limits.mu_min || last.mu > limits.mu_max) {
      branch.stop_reason = "left parameter window";
      return branch;
    }
    if (monitor && last.monitor_max - last.monitor_min < limits.min_amplitude) {
      branch.stop_reason = "amplitude collapsed";
      return branch;
    }
    if (limits.stop_after_fold && branch.fold) {
      branch.stop_reason = "fold passed";
      return branch;
    }
  }
  branch.stop_reason = "step budget exhausted";
  return branch;
}

CyclePoint cycle_from_hopf(const PoiseuilleStepper& stepper, const HopfPoint& h,
                           const SolverConfig& cfg, double offset,
                           double amplitude) {
  const Monitor monitor = pressure_monitor(stepper);
  auto attempt = [&](double q) {
    BranchPoint bp = newton_fixed_point(stepper, stepper.steady_vector(q), q,
                                        cfg.t_h, cfg.newton_tol, cfg);
    EigenReport rep = steady_stability(bp, stepper, cfg.t_h, cfg.k_eigs, cfg);
    std::size_t lead = 0;
    for (std::size_t i = 1; i < rep.lambdas.size(); ++i)
      if (rep.lambdas[i].real() > rep.lambdas[lead].real()) lead = i;
    Vector v = rep.vectors[lead].real();
    if (v.lpNorm<Eigen::Infinity>() < 1e-3 * rep.vectors[lead].norm())
      v = rep.vectors[lead].imag();
    v /= v.lpNorm<Eigen::Infinity>();
    return solve_cycle(stepper, bp.u + amplitude * v, 2.0 * kPi / h.omega, q,
                       cfg, monitor);
  };
  if (offset != 0.0) return attempt(h.q_c + offset);

  // q_c is only known to hopf_tol; place the crossing by interpolating
  // max Re lambda between two nearby steady states, then seed on the side
  // where the steady state is stable.
  auto growth = [&](double q) {
    BranchPoint bp = newton_fixed_point(stepper, stepper.steady_vector(q), q,
                                        cfg.t_h, cfg.newton_tol, cfg);
    steady_stability(bp, stepper, cfg.t_h, cfg.k_eigs, cfg);
    double m = -kInf;
    for (const auto& l : bp.lead_eigs) m = std::max(m, l.real());
    return m;
  };
  const double d = std::max(cfg.hopf_tol, 1e-5);
  const double g_lo = growth(h.q_c - d), g_hi = growth(h.q_c + d);
  double q_star = h.q_c;
  if (g_hi != g_lo) q_star = h.q_c - d - 2.0 * d * g_lo / (g_hi - g_lo);
  const double stable_side = g_hi < g_lo ? 2e-5 : -2e-5;
  try {
    return attempt(q_star + stable_side);
  } catch (const Error&) {
    return attempt(q_star - stable_side);
  }
}

CyclePoint cycle_from_transient(const PoiseuilleStepper& stepper, double q,
                                double q_start, double t_max,
                                const SolverConfig& cfg) {
  const FlowState u0 = init_from_steady(solve_steady_for_q(q_start, stepper.params()),
                                        stepper.grid(), stepper.params());
  TransientResult tr = transient_capture(stepper, u0, q, t_max, 1 << 30);
  if (!tr.oscillating)
    throw NoOscillation("no sustained oscillation at q = " + std::to_string(q));
  return solve_cycle(stepper, stepper.pack(tr.seed), tr.period_est, q, cfg,
                     pressure_monitor(stepper));
}

CyclePoint cycle_on_branch(const Timestepper& ts, const CycleBranch& branch,
                           double mu, const SolverConfig& cfg,
                           const Monitor& monitor) {
  if (branch.points.empty())
    throw std::invalid_argument("cycle_on_branch: empty branch");
  const auto& pts = branch.points;

  // Prefer the first pair of neighbours that brackets mu; start from the
  // linear interpolant of the two, which is second-order accurate in the
  // step and keeps Newton inside its basin on strongly unstable cycles.
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const CyclePoint& a = pts[i - 1];
    const CyclePoint& b = pts[i];
    if ((a.mu - mu) * (b.mu - mu) > 0.0 || a.mu == b.mu) continue;
    const double s = (mu - a.mu) / (b.mu - a.mu);
    const Vector u = (1.0 - s) * a.u0 + s * b.u0;
    const double period = (1.0 - s) * a.period + s * b.period;
    try {
      return solve_cycle(ts, u, period, mu, cfg, monitor);
    } catch (const Error&) {
      // Fall through to stepping from the nearest point.
    }
  }

  const CyclePoint* best = &pts.front();
  for (const CyclePoint& p : pts)
    if (std::abs(p.mu - mu) < std::abs(best->mu - mu)) best = &p;

  // Walk from the nearest point in natural-parameter steps, halving on
  // failure.
  CyclePoint cur = *best;
  double step = mu - cur.mu;
  while (cur.mu != mu) {
    const double target = std::abs(mu - cur.mu) <= std::abs(step) ? mu : cur.mu + step;
    try {
      cur = solve_cycle(ts, cur.u0, cur.period, target, cfg, monitor);
    } catch (const Error&) {
      step *= 0.5;
      if (std::abs(step) < 1e-7) throw;
    }
  }
  return cur;
}

BistabilityResult bistability_probe(const PoiseuilleStepper& stepper,
                                    const CyclePoint& unstable_cycle,
                                    double q_new, double t_max,
                                    int sample_every, bool throw_if_undecided) {
  sample_every = std::max(1, sample_every);
  const GridSpec& g = stepper.grid();
  const Eigen::VectorXd w = simpson_weights(g);
  const int n = g.n;
  const double period = unstable_cycle.period;

  BistabilityResult res;
  FlowState s = stepper.unpack(unstable_cycle.u0);
  std::vector<double> times{0.0};
  std::vector<double> values{-pressure_gradient(s, stepper.params())};
  res.series.push_back({0.0, pressure_gradient(s, stepper.params()), s.vx[n - 1],
                        w.dot(s.vx), stress_at_mid(s)});

  long count = 0;
  auto observer = [&](const FlowState& st, double grad_p) {
    ++count;
    times.push_back(st.t);
    values.push_back(-grad_p);
    if (count % sample_every == 0)
      res.series.push_back({st.t, grad_p, st.vx[n - 1], w.dot(st.vx),
                            stress_at_mid(st)});
  };

  const int lock_cycles = 6;
  while (s.t < t_max) {
    s = stepper.evolve(s, q_new, period, observer);
    if (s.t < 2.0 * period) continue;

    // Oscillation over the most recent period.
    double hi = -kInf, lo = kInf;
    for (std::size_t k = values.size(); k-- > 0 && times[k] >= s.t - period;) {
      hi = std::max(hi, values[k]);
      lo = std::min(lo, values[k]);
    }
    res.final_amplitude = hi - lo;
    if (hi - lo < 1e-4) {
      res.outcome = ProbeOutcome::SteadyState;
      res.settle_time = s.t;
      return res;
    }
    if (s.t >= (2 * lock_cycles + 2) * period) {
      // Look only at the second half of the record so the departure from the
      // unstable orbit is not mistaken for a locked cycle.
      const std::size_t half = values.size() / 2;
      std::vector<double> tt(times.begin() + static_cast<std::ptrdiff_t>(half), times.end());
      std::vector<double> vv(values.begin() + static_cast<std::ptrdiff_t>(half), values.end());
      OscillationSummary osc = analyse_oscillation(tt, vv, lock_cycles, 0.01);
      if (osc.sustained) {
        res.outcome = ProbeOutcome::StableCycle;
        res.settle_time = s.t;
        return res;
      }
    }
  }
  if (throw_if_undecided)
    throw Undecided("bistability_probe: no settled outcome by t = " +
                    std::to_string(t_max));
  res.decided = false;
  res.settle_time = s.t;
  return res;
}

Monitor pressure_monitor(const PoiseuilleStepper& stepper) {
  const ModelParams p = stepper.params();
  const Eigen::Index wall = stepper.grid().n - 1;
  return [p, wall](const Vector& u) { return slip_stress(u[wall], p); };
}

} // namespace spurt
