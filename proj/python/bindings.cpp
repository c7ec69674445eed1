#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spurt/cli.hpp"
#include "spurt/continuation.hpp"
#include "spurt/errors.hpp"
#include "spurt/krylov.hpp"
#include "spurt/model.hpp"
#include "spurt/stepper.hpp"

namespace py = pybind11;
using namespace spurt;

namespace {

Eigen::MatrixXd flow_curve_array(const ModelParams& p, double vw_max, int n) {
  const auto rows = flow_curve(p, vw_max, n);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) << rows[i].vw, rows[i].q, rows[i].sigma_w;
  return out;
}

py::dict series_dict(const std::vector<TransientSample>& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::VectorXd t(n), gp(n), vw(n), q(n), mid(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = s[static_cast<std::size_t>(i)];
    t[i] = r.t;
    gp[i] = r.grad_p;
    vw[i] = r.vw;
    q[i] = r.q_check;
    mid[i] = r.t1_mid;
  }
  py::dict d;
  d["t"] = t;
  d["grad_p"] = gp;
  d["vw"] = vw;
  d["q_check"] = q;
  d["t1_mid"] = mid;
  return d;
}

cli::RunConfig make_config(const std::optional<std::string>& path, const py::dict& overrides) {
  cli::RunConfig c;
  if (path) cli::load_config_file(c, *path);
  for (const auto& [k, v] : overrides)
    cli::set_value(c, py::str(k), py::str(v));
  c.validate();
  return c;
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bifurcation analysis of Oldroyd-B Poiseuille flow with nonmonotonic slip";

  auto base = py::register_exception<Error>(m, "SpurtError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<NewtonDiverged>(m, "NewtonDiverged", base.ptr());
  py::register_exception<NotConverged>(m, "NotConverged", base.ptr());
  py::register_exception<NoSignChange>(m, "NoSignChange", base.ptr());
  py::register_exception<NoOscillation>(m, "NoOscillation", base.ptr());

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("re", &ModelParams::re)
      .def_readwrite("we", &ModelParams::we)
      .def_readwrite("eta2", &ModelParams::eta2)
      .def_readwrite("a1", &ModelParams::a1)
      .def_readwrite("a2", &ModelParams::a2)
      .def_readwrite("a3", &ModelParams::a3)
      .def_readwrite("q", &ModelParams::q)
      .def("validate", &ModelParams::validate);

  py::class_<SteadyState>(m, "SteadyState")
      .def_readonly("vw", &SteadyState::vw)
      .def_readonly("grad_p", &SteadyState::grad_p)
      .def_readonly("q", &SteadyState::q)
      .def_readonly("sigma_w", &SteadyState::sigma_w)
      .def("__repr__", [](const SteadyState& s) {
        return "SteadyState(vw=" + cli::fmt(s.vw) + ", q=" + cli::fmt(s.q) +
               ", sigma_w=" + cli::fmt(s.sigma_w) + ")";
      });

  m.def("slip_stress", &slip_stress, py::arg("vw"), py::arg("params") = ModelParams{});
  m.def("slip_stress_deriv", &slip_stress_deriv, py::arg("vw"), py::arg("params") = ModelParams{});
  m.def("steady_flow_rate", &steady_flow_rate, py::arg("vw"), py::arg("params") = ModelParams{});
  m.def("solve_steady_for_q", &solve_steady_for_q, py::arg("q"), py::arg("params") = ModelParams{});
  m.def("flow_curve", &flow_curve_array, py::arg("params") = ModelParams{},
        py::arg("vw_max") = 0.5, py::arg("n") = 2001,
        "Rows (vw, q, sigma_w) for n slip velocities on [0, vw_max].");
  m.def("flow_curve_extrema", &flow_curve_extrema, py::arg("params") = ModelParams{});

  py::class_<PoiseuilleStepper>(m, "Stepper")
      .def(py::init([](int n, const ModelParams& p, double dt) {
             return PoiseuilleStepper(GridSpec{n}, p, StepperConfig{dt});
           }),
           py::arg("n") = 201, py::arg("params") = ModelParams{}, py::arg("dt") = 1e-5)
      .def_property_readonly("dimension", &PoiseuilleStepper::dimension)
      .def_property_readonly("dt", &PoiseuilleStepper::time_step)
      .def("advance", &PoiseuilleStepper::advance, py::arg("u"), py::arg("q"), py::arg("horizon"),
           py::call_guard<py::gil_scoped_release>())
      .def("steady_vector", &PoiseuilleStepper::steady_vector, py::arg("q"))
      .def("flow_rate",
           [](const PoiseuilleStepper& st, const Eigen::VectorXd& u) {
             return flow_rate(st.unpack(u), st.grid());
           })
      .def("pressure_gradient", [](const PoiseuilleStepper& st, const Eigen::VectorXd& u) {
        return pressure_gradient(st.unpack(u), st.params());
      });

  m.def(
      "transient",
      [](const PoiseuilleStepper& st, double q_init, double q_run, double t_max,
         int sample_every) {
        TransientResult r;
        {
          py::gil_scoped_release release;
          const FlowState u0 = init_from_steady(solve_steady_for_q(q_init, st.params()),
                                                st.grid(), st.params());
          r = transient_capture(st, u0, q_run, t_max, sample_every);
        }
        py::dict d = series_dict(r.series);
        d["oscillating"] = r.oscillating;
        d["period"] = r.period_est;
        return d;
      },
      py::arg("stepper"), py::arg("q_init"), py::arg("q_run"), py::arg("t_max"),
      py::arg("sample_every") = 1);

  m.def(
      "steady_eigenvalues",
      [](const PoiseuilleStepper& st, double q, double t_h, int k) {
        py::gil_scoped_release release;
        SolverConfig cfg;
        cfg.t_h = t_h;
        BranchPoint bp = newton_fixed_point(st, st.steady_vector(q), q, t_h, cfg.newton_tol, cfg);
        steady_stability(bp, st, t_h, k, cfg);
        return bp.lead_eigs;
      },
      py::arg("stepper"), py::arg("q"), py::arg("t_h") = 1e-3, py::arg("k") = 6,
      "Leading continuous-time eigenvalues of the steady state at q.");

  py::class_<HopfPoint>(m, "HopfPoint")
      .def_readonly("q_c", &HopfPoint::q_c)
      .def_readonly("omega", &HopfPoint::omega)
      .def_readonly("vw_star", &HopfPoint::vw_star)
      .def_readonly("fprime_star", &HopfPoint::fprime_star);

  m.def(
      "detect_hopf",
      [](const PoiseuilleStepper& st, double q_lo, double q_hi) {
        py::gil_scoped_release release;
        return detect_hopf(st, {q_lo, q_hi});
      },
      py::arg("stepper"), py::arg("q_lo"), py::arg("q_hi"));

  py::class_<CyclePoint>(m, "Cycle")
      .def_readonly("u0", &CyclePoint::u0)
      .def_readonly("period", &CyclePoint::period)
      .def_readonly("q", &CyclePoint::mu)
      .def_readonly("floquet", &CyclePoint::floquet)
      .def_readonly("stable", &CyclePoint::stable)
      .def_readonly("residual", &CyclePoint::residual)
      .def_readonly("max_neg_grad_p", &CyclePoint::monitor_max);

  m.def(
      "solve_cycle",
      [](const PoiseuilleStepper& st, const Eigen::VectorXd& u, double period, double q,
         bool with_floquet) {
        py::gil_scoped_release release;
        SolverConfig cfg;
        CyclePoint c = solve_cycle(st, u, period, q, cfg, pressure_monitor(st));
        if (with_floquet) floquet(st, c, cfg.k_eigs, cfg);
        return c;
      },
      py::arg("stepper"), py::arg("u"), py::arg("period"), py::arg("q"),
      py::arg("floquet") = true);

  m.def(
      "cycle_from_transient",
      [](const PoiseuilleStepper& st, double q, double q_start, double t_max) {
        py::gil_scoped_release release;
        SolverConfig cfg;
        CyclePoint c = cycle_from_transient(st, q, q_start, t_max, cfg);
        floquet(st, c, cfg.k_eigs, cfg);
        return c;
      },
      py::arg("stepper"), py::arg("q"), py::arg("q_start"), py::arg("t_max") = 2.0);

  m.def(
      "arnoldi_eigs",
      [](const Eigen::MatrixXd& a, int k, double tol) {
        KrylovConfig c;
        c.tol = tol;
        c.max_dim = static_cast<int>(a.rows());
        const LinearOperator op{[&a](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x); },
                                a.rows()};
        return arnoldi_eigs(op, k, c).kappas;
      },
      py::arg("matrix"), py::arg("k"), py::arg("tol") = 1e-10);

  m.def(
      "gmres",
      [](const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double tol) {
        KrylovConfig c;
        c.tol = tol;
        c.max_dim = static_cast<int>(a.rows());
        const LinearOperator op{[&a](const Eigen::VectorXd& x) { return Eigen::VectorXd(a * x); },
                                a.rows()};
        const GmresResult r = gmres(op, b, Eigen::VectorXd::Zero(b.size()), c);
        return py::make_tuple(r.x, r.residuals);
      },
      py::arg("matrix"), py::arg("b"), py::arg("tol") = 1e-10);

  m.def(
      "run_command",
      [](const std::string& command, std::optional<std::string> config, py::kwargs kw) {
        const cli::RunConfig c = make_config(config, kw);
        cli::CommandResult r;
        {
          py::gil_scoped_release release;
          if (command == "flow-curve") r = cli::cmd_flow_curve(c);
          else if (command == "stability") r = cli::cmd_stability(c);
          else if (command == "transient") r = cli::cmd_transient(c);
          else if (command == "bifurcation") r = cli::cmd_bifurcation(c);
          else if (command == "bistability") r = cli::cmd_bistability(c);
          else throw ConfigError("unknown command '" + command + "'");
        }
        py::dict d;
        d["files"] = r.files;
        d["ok"] = r.ok;
        d["message"] = r.message;
        return d;
      },
      py::arg("command"), py::arg("config") = py::none(),
      "Run a command-line analysis; keyword arguments override config keys.");

  m.def("config_keys", [] {
    std::vector<std::string> names;
    for (const auto& k : cli::config_keys()) names.push_back(k.name);
    return names;
  });
}
