#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spurt/cli.hpp"
#include "spurt/errors.hpp"

namespace spurt::cli {
namespace {

namespace fs = std::filesystem;

fs::path out_path(const RunConfig& c, const std::string& name) {
  return fs::path(c.output_dir) / name;
}

double max_re(const BranchPoint& p) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& l : p.lead_eigs) m = std::max(m, l.real());
  return m;
}

// Rows kept in memory so a failed run can still be written, marked partial.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  bool complete = false;

  void add(const std::vector<double>& r) {
    std::vector<std::string> s;
    for (double x : r) s.push_back(fmt(x));
    rows.push_back(std::move(s));
  }
};

fs::path write_table(const RunConfig& c, const Table& t, bool with_status) {
  std::vector<std::string> header = t.header;
  if (with_status) header.push_back("status");
  CsvWriter w(out_path(c, t.name), header);
  for (auto r : t.rows) {
    if (with_status) r.push_back(t.complete ? "ok" : "partial");
    w.row(r);
  }
  return w.path();
}

std::vector<std::string> transient_header() {
  return {"t", "grad_p", "vw", "q_check", "t1_mid"};
}

void write_series(CsvWriter& w, const std::vector<TransientSample>& s) {
  for (const auto& r : s) w.row(std::vector<double>{r.t, r.grad_p, r.vw, r.q_check, r.t1_mid});
}

void say(const Log& log, const std::string& msg) {
  if (log) log(msg);
}

std::string describe_cycle(const CyclePoint& p) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "cycle q=%.6f T=%.6f max(-grad_p)=%.6f lead |kappa|=%.4f %s",
                p.mu, p.period, p.monitor_max, p.lead_nontrivial_modulus(),
                p.stable ? "stable" : "unstable");
  return buf;
}

} // namespace

SolverConfig solver_config(const RunConfig& c) {
  SolverConfig s;
  s.t_h = c.t_h;
  s.newton_tol = c.newton_tol;
  s.linear.tol = c.gmres_tol;
  s.linear.max_dim = c.max_dim;
  s.linear.eps0 = c.eps0;
  s.eigen.eps0 = c.eps0;
  s.k_eigs = c.k_eigs;
  s.ds = c.ds;
  s.ds_min = c.ds_min;
  s.ds_max = c.ds_max;
  s.n_steps = c.n_steps;
  return s;
}

PoiseuilleStepper eigen_stepper(const RunConfig& c) {
  const int n = c.is_set("n_nodes") ? c.n_nodes : 201;
  const double dt = c.is_set("dt") ? c.dt : 1e-5;
  return PoiseuilleStepper(GridSpec{n}, c.params(), StepperConfig{dt});
}

PoiseuilleStepper cycle_stepper(const RunConfig& c) {
  const int n = c.is_set("n_nodes") ? c.n_nodes : 201;
  return PoiseuilleStepper(GridSpec{n}, c.params(), StepperConfig{c.cycle_dt});
}

std::string eigs_file_name(double q) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "eigs_q%g.csv", q);
  return buf;
}

CommandResult cmd_flow_curve(const RunConfig& c) {
  c.validate();
  if (!(c.vw_max > 0.0) || c.n_points < 2)
    throw ConfigError("flow-curve: empty slip-velocity range (vw_max = " +
                      fmt(c.vw_max) + ", n_points = " + std::to_string(c.n_points) + ")");
  const ModelParams p = c.params();
  CommandResult res;
  {
    CsvWriter w(out_path(c, "flow_curve.csv"), {"vw", "q", "sigma_w"});
    for (const auto& r : flow_curve(p, c.vw_max, c.n_points))
      w.row(std::vector<double>{r.vw, r.q, r.sigma_w});
    res.files.push_back(w.path());
  }
  const auto [mx, mn] = flow_curve_extrema(p);
  CsvWriter w(out_path(c, "flow_curve_extrema.csv"), {"kind", "vw", "q", "sigma_w"});
  w.row(std::vector<std::string>{"max", fmt(mx.vw), fmt(mx.q), fmt(mx.sigma_w)});
  w.row(std::vector<std::string>{"min", fmt(mn.vw), fmt(mn.q), fmt(mn.sigma_w)});
  res.files.push_back(w.path());
  return res;
}

CommandResult cmd_stability(const RunConfig& c) {
  c.validate();
  const PoiseuilleStepper st(GridSpec{c.n_nodes}, c.params(), StepperConfig{c.dt});
  const SolverConfig cfg = solver_config(c);
  BranchPoint bp =
      newton_fixed_point(st, st.steady_vector(c.q), c.q, cfg.t_h, cfg.newton_tol, cfg);
  const EigenReport rep = steady_stability(bp, st, cfg.t_h, c.k_eigs, cfg);

  CommandResult res;
  CsvWriter w(out_path(c, eigs_file_name(c.q)), {"re_lambda", "im_lambda", "ritz_residual"});
  for (std::size_t i = 0; i < rep.lambdas.size(); ++i)
    w.row(std::vector<double>{rep.lambdas[i].real(), rep.lambdas[i].imag(), rep.residuals[i]});
  res.files.push_back(w.path());
  std::ostringstream msg;
  msg << "q = " << fmt(c.q) << ": max Re lambda = " << fmt(max_re(bp))
      << (bp.stable ? " (stable)" : " (unstable)");
  if (!rep.converged) {
    res.ok = false;
    msg << "; Arnoldi did not converge (worst Ritz residual "
        << fmt(rep.worst_residual()) << ")";
  }
  res.message = msg.str();
  return res;
}

CommandResult cmd_transient(const RunConfig& c) {
  c.validate();
  const PoiseuilleStepper st(GridSpec{c.n_nodes}, c.params(), StepperConfig{c.dt});
  const FlowState u0 = init_from_steady(solve_steady_for_q(c.q_init, c.params()),
                                        st.grid(), c.params());
  const TransientResult tr = transient_capture(st, u0, c.q_run, c.t_max, c.sample_every);

  CommandResult res;
  CsvWriter w(out_path(c, "transient.csv"), transient_header());
  write_series(w, tr.series);
  res.files.push_back(w.path());
  std::ostringstream msg;
  if (tr.oscillating) {
    msg << "sustained oscillation, period " << fmt(tr.period_est) << ", -grad_p in ["
        << fmt(*std::min_element(tr.trough_values.begin(), tr.trough_values.end()))
        << ", " << fmt(*std::max_element(tr.peak_values.begin(), tr.peak_values.end()))
        << "]";
  } else {
    msg << "no sustained oscillation";
  }
  res.message = msg.str();
  return res;
}

void run_bifurcation(const RunConfig& c, BifurcationData& out, const Log& log) {
  c.validate();
  const SolverConfig cfg = solver_config(c);
  const PoiseuilleStepper eig = eigen_stepper(c);
  const PoiseuilleStepper cyc = cycle_stepper(c);
  const Monitor monitor = pressure_monitor(cyc);

  say(log, "steady branch");
  out.steady = continue_steady(eig, {c.q_lo, c.q_hi}, c.ds, cfg,
                               [&eig](double q) { return eig.steady_vector(q); });

  for (std::size_t i = 1; i < out.steady.size(); ++i) {
    const BranchPoint &a = out.steady[i - 1], &b = out.steady[i];
    if (a.stable == b.stable) continue;
    say(log, "Hopf point in [" + fmt(a.mu) + ", " + fmt(b.mu) + "]");
    out.hopf.push_back(detect_hopf(eig, {a.mu, b.mu}, cfg));
    const HopfPoint& h = out.hopf.back();
    say(log, "  q_c = " + fmt(h.q_c) + ", omega = " + fmt(h.omega) +
                 ", F' = " + fmt(h.fprime_star));
  }
  if (out.hopf.size() < 2) return;

  // The cycle runs use a coarser time step, which shifts the Hopf points.
  for (const HopfPoint& h : out.hopf) {
    HopfPoint hc;
    try {
      hc = detect_hopf(cyc, {h.q_c - 0.002, h.q_c + 0.002}, cfg);
    } catch (const NoSignChange&) {
      hc = detect_hopf(cyc, {h.q_c - 0.01, h.q_c + 0.01}, cfg);
    }
    out.hopf_cycle.push_back(hc);
  }
  const HopfPoint& left = out.hopf_cycle.front();
  const HopfPoint& right = out.hopf_cycle.back();

  CycleContinuationLimits lim;
  lim.mu_min = c.q_lo;
  lim.mu_max = c.q_hi;
  lim.min_amplitude = 1e-3;
  lim.on_point = [&](const CyclePoint& p) { say(log, "  " + describe_cycle(p)); };

  say(log, "cycles born at the left Hopf point");
  {
    const CyclePoint seed = cycle_from_hopf(cyc, left, cfg);
    CycleContinuationLimits l = lim;
    l.seed_dmu = 0.5 * (seed.mu - left.q_c);
    l.min_amplitude = 0.0;
    out.segments.emplace_back("left_hopf",
                              continue_cycles(cyc, seed, 0.002, 8, cfg, l, monitor));
  }

  say(log, "large-amplitude branch");
  {
    const double q_seed = left.q_c + 0.0065;
    const CyclePoint seed = cycle_from_transient(cyc, q_seed, q_seed - 0.001, c.t_max, cfg);
    CycleBranch b = continue_cycles(cyc, seed, c.ds, c.n_steps, cfg, lim, monitor);
    if (b.fold) out.fold_q = b.fold->q_fold;
    out.segments.emplace_back("main", std::move(b));
  }

  say(log, "cycles born at the right Hopf point");
  {
    const CyclePoint seed = cycle_from_hopf(cyc, right, cfg);
    CycleContinuationLimits l = lim;
    l.seed_dmu = 0.5 * (seed.mu - right.q_c);
    l.min_amplitude = 0.0;
    if (out.fold_q) l.mu_max = *out.fold_q;
    out.segments.emplace_back("right_hopf",
                              continue_cycles(cyc, seed, 0.002, c.n_steps, cfg, l, monitor));
  }
}

CommandResult cmd_bifurcation(const RunConfig& c, const Log& log) {
  BifurcationData d;
  CommandResult res;
  std::string failure;
  try {
    run_bifurcation(c, d, log);
    if (d.hopf.size() < 2) failure = "fewer than two Hopf points in [q_lo, q_hi]";
    else if (!d.fold_q) failure = "no cycle fold found";
  } catch (const std::exception& e) {
    failure = e.what();
  }

  Table steady{"steady_branch.csv", {"q", "vw", "grad_p", "max_re_lambda", "stable"}, {}, true};
  const ModelParams p = c.params();
  const Eigen::Index wall = eigen_stepper(c).grid().n - 1;
  for (const auto& b : d.steady) {
    const double vw = b.u[wall];
    steady.add({b.mu, vw, -slip_stress(vw, p), max_re(b), b.stable ? 1.0 : 0.0});
  }
  steady.complete = !d.steady.empty() && (failure.empty() || !d.hopf.empty());

  Table cycles{"cycle_branch.csv", {"q", "period", "max_neg_grad_p", "lead_floquet_mod", "stable"}, {}, false};
  Table segments{"cycle_segments.csv", {"segment", "first_row", "last_row", "stop_reason"}, {}, false};
  for (const auto& [name, branch] : d.segments) {
    const std::size_t first = cycles.rows.size();
    for (const auto& cp : branch.points)
      cycles.add({cp.mu, cp.period, cp.monitor_max, cp.lead_nontrivial_modulus(),
                  cp.stable ? 1.0 : 0.0});
    if (branch.points.empty()) continue;
    std::string reason = branch.stop_reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    segments.rows.push_back({name, std::to_string(first),
                             std::to_string(cycles.rows.size() - 1), reason});
  }
  cycles.complete = segments.complete = failure.empty();

  Table crit{"critical_points.csv", {"kind", "q", "omega", "fprime"}, {}, failure.empty()};
  for (const auto& h : d.hopf)
    crit.rows.push_back({"hopf", fmt(h.q_c), fmt(h.omega), fmt(h.fprime_star)});
  if (d.fold_q) crit.rows.push_back({"fold", fmt(*d.fold_q), "", ""});

  const bool partial = !failure.empty();
  for (const Table* t : {&steady, &cycles, &segments, &crit})
    res.files.push_back(write_table(c, *t, partial));
  res.ok = !partial;
  res.message = partial ? "bifurcation incomplete: " + failure : "bifurcation complete";
  return res;
}

void run_bistability(const RunConfig& c, BistabilityData& out, const Log& log) {
  c.validate();
  const SolverConfig cfg = solver_config(c);
  const PoiseuilleStepper cyc = cycle_stepper(c);
  const Monitor monitor = pressure_monitor(cyc);

  // The unstable cycle is reached from the Hopf point below q_probe where the
  // steady state regains stability.
  auto stable_at = [&](double q) {
    BranchPoint bp =
        newton_fixed_point(cyc, cyc.steady_vector(q), q, cfg.t_h, cfg.newton_tol, cfg);
    steady_stability(bp, cyc, cfg.t_h, cfg.k_eigs, cfg);
    return bp.stable;
  };
  if (!stable_at(c.q_probe))
    throw NoSignChange("bistability: steady state at q_probe = " + fmt(c.q_probe) +
                       " is unstable");
  double lo = c.q_probe;
  for (int i = 0;; ++i) {
    if (i == 20)
      throw NoSignChange("bistability: no unstable steady state within 0.1 below q_probe");
    lo -= 0.005;
    if (!stable_at(lo)) break;
  }
  say(log, "Hopf point in [" + fmt(lo) + ", " + fmt(lo + 0.005) + "]");
  out.hopf = detect_hopf(cyc, {lo, lo + 0.005}, cfg);

  const CyclePoint seed = cycle_from_hopf(cyc, out.hopf, cfg);
  CycleContinuationLimits lim;
  lim.seed_dmu = 0.5 * (seed.mu - out.hopf.q_c);
  lim.mu_max = c.q_probe;
  lim.compute_floquet = false;
  lim.on_point = [&](const CyclePoint& p) { say(log, "  " + describe_cycle(p)); };
  out.approach = continue_cycles(cyc, seed, 0.002, c.n_steps, cfg, lim, monitor);

  CyclePoint u = cycle_on_branch(cyc, out.approach, c.q_probe, cfg, monitor);
  floquet(cyc, u, cfg.k_eigs, cfg);
  say(log, "unstable " + describe_cycle(u));
  out.unstable = u;

  const double period = u.period;
  const double t_max = std::max(c.t_max, 40.0 * period);
  say(log, "probe q = " + fmt(c.q_probe + c.dq_probe));
  out.up = bistability_probe(cyc, u, c.q_probe + c.dq_probe, t_max, c.sample_every, false);
  say(log, "probe q = " + fmt(c.q_probe - c.dq_probe));
  out.down = bistability_probe(cyc, u, c.q_probe - c.dq_probe, t_max, c.sample_every, false);
}

CommandResult cmd_bistability(const RunConfig& c, const Log& log) {
  BistabilityData d;
  CommandResult res;
  std::string failure;
  try {
    run_bistability(c, d, log);
  } catch (const std::exception& e) {
    failure = e.what();
  }

  auto tag = [](const std::optional<BistabilityResult>& r) -> std::string {
    if (!r) return "NotRun";
    if (!r->decided) return "Undecided";
    return r->outcome == ProbeOutcome::SteadyState ? "SteadyState" : "StableCycle";
  };
  struct Case {
    const char* file;
    const char* name;
    double q_new;
    const std::optional<BistabilityResult>* r;
  };
  const Case cases[] = {{"bistability_a.csv", "a", c.q_probe + c.dq_probe, &d.up},
                        {"bistability_b.csv", "b", c.q_probe - c.dq_probe, &d.down}};
  CsvWriter summary(out_path(c, "bistability_summary.csv"),
                    {"case", "q_new", "outcome", "settle_time", "final_amplitude"});
  for (const Case& k : cases) {
    if (*k.r) {
      CsvWriter w(out_path(c, k.file), transient_header());
      write_series(w, (*k.r)->series);
      res.files.push_back(w.path());
      summary.row(std::vector<std::string>{k.name, fmt(k.q_new), tag(*k.r),
                                           fmt((*k.r)->settle_time),
                                           fmt((*k.r)->final_amplitude)});
      if (!(*k.r)->decided && failure.empty())
        failure = std::string("case ") + k.name + " undecided";
    } else {
      summary.row(std::vector<std::string>{k.name, fmt(k.q_new), tag(*k.r), "", ""});
    }
  }
  res.files.push_back(summary.path());
  res.ok = failure.empty();
  res.message = res.ok ? "a: " + tag(d.up) + ", b: " + tag(d.down)
                       : "bistability incomplete: " + failure;
  return res;
}

} // namespace spurt::cli
