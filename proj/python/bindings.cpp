#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "etsim/app.hpp"
#include "etsim/config.hpp"
#include "etsim/errors.hpp"
#include "etsim/experiment.hpp"
#include "etsim/gain_design.hpp"
#include "etsim/matrix.hpp"
#include "etsim/triggering.hpp"

namespace py = pybind11;
using namespace etsim;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw InvalidInputError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array from_matrix(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) v(i, j) = m(i, j);
  return out;
}

Array from_vector(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict gain_summary(const std::vector<double>& observer, const std::vector<double>& controller, double l1,
                      double l2) {
  const auto g = make_gains({HurwitzCoeffs(observer), HurwitzCoeffs(controller), l1, l2});
  py::dict d;
  d["p"] = from_matrix(g.p);
  d["q"] = from_matrix(g.q);
  d["p_norm"] = g.p_norm;
  d["q_norm"] = g.q_norm;
  d["eps_x"] = g.bounds.eps_x;
  d["sigma_x"] = g.bounds.sigma_x;
  d["kappa"] = g.design.kappa();
  return d;
}

py::dict margin(const std::vector<double>& controller, double q_norm, double theta_bar) {
  const auto m = sensitivity_margin(HurwitzCoeffs(controller), q_norm, theta_bar);
  py::dict d;
  d["theta_star"] = m.theta_star;
  d["lambda"] = m.lambda;
  d["ok"] = m.ok;
  return d;
}

py::dict simulate_config(const std::string& path, const std::vector<std::string>& overrides,
                         std::uint64_t replica) {
  const auto m = parse_config(path, overrides);
  const auto setup = build_setup(m);
  auto cfg = setup.sim;
  cfg.replica = replica;
  RunRecord rec;
  {
    py::gil_scoped_release release;
    rec = simulate(setup.scenario, setup.gains, setup.trigger, cfg);
  }
  const std::size_t width = rec.snapshots.empty() ? 0 : rec.snapshots.front().x.size();
  Array times(static_cast<py::ssize_t>(rec.snapshots.size()));
  Array x({rec.snapshots.size(), width});
  Array xhat({rec.snapshots.size(), width});
  auto tv = times.mutable_unchecked<1>();
  auto xv = x.mutable_unchecked<2>();
  auto hv = xhat.mutable_unchecked<2>();
  for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
    const auto& s = rec.snapshots[k];
    tv(k) = s.t;
    for (std::size_t j = 0; j < width; ++j) {
      xv(k, j) = s.x[j];
      hv(k, j) = s.xhat[j];
    }
  }
  py::list events;
  for (std::size_t i = 0; i < rec.events.size(); ++i) {
    py::dict e;
    e["output"] = from_vector(rec.event_times(i, Channel::Output));
    e["input"] = from_vector(rec.event_times(i, Channel::Input));
    events.append(e);
  }
  py::dict d;
  d["times"] = times;
  d["x"] = x;
  d["xhat"] = xhat;
  d["events"] = events;
  d["diverged"] = rec.diverged;
  d["divergence_time"] = rec.divergence_time;
  return d;
}

py::dict ensemble_config(const std::string& path, const std::vector<std::string>& overrides,
                         std::optional<std::size_t> replicas, std::size_t workers) {
  const auto m = parse_config(path, overrides);
  const auto setup = build_setup(m);
  EnsembleResult r;
  {
    py::gil_scoped_release release;
    r = run_ensemble(setup, replicas.value_or(m.replicas), workers);
  }
  AnalysisOptions opts;
  opts.eta = m.eta;
  opts.q = m.q;
  opts.fit_start = m.fit_start;
  opts.window = m.monotonicity_window;
  py::dict d;
  d["summary"] = summary_json(r, opts);
  d["times"] = from_vector(r.times);
  d["mean_v"] = from_vector(r.mean_v);
  d["mean_v_quadratic"] = from_vector(r.mean_v_quadratic);
  d["var_x_sq"] = from_vector(r.var_x_sq);
  std::ostringstream csv;
  write_ensemble_csv(csv, r);
  d["csv"] = csv.str();
  return d;
}

std::string feasibility(const std::string& path, const std::vector<std::string>& overrides) {
  const auto m = parse_config(path, overrides);
  const auto sc = make_scenario(m.scenario, m.scenario_options);
  const auto designs = manifest_designs(m, sc.subsystems.size());
  const auto bounds = DeclaredBounds::from_scenario(sc);
  const auto budget = TriggerBudget::from(TriggerParams(m.output, m.input));
  std::ostringstream out;
  out << "{\"margins_continuous\": " << to_json(margins_continuous(make_gain_set(designs), bounds), -1)
      << ", \"margins_triggered\": " << to_json(margins_triggered(make_gain_set(designs), bounds, budget), -1)
      << ", \"recipe_continuous\": "
      << to_json(recipe_gains(DesignMode::Continuous, designs, bounds).report, -1)
      << ", \"recipe_triggered\": "
      << to_json(recipe_gains(DesignMode::Triggered, designs, bounds, budget).report, -1) << "}";
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Event-triggered output feedback simulator";

  auto base = py::register_exception<Error>(m, "EtsimError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<InvalidInputError>(m, "InvalidInputError", base.ptr());
  py::register_exception<NoSolutionError>(m, "NoSolutionError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<ExperimentFailure>(m, "ExperimentFailure", base.ptr());

  m.def("solve_lyapunov", [](const Array& a) { return from_matrix(solve_lyapunov(to_matrix(a))); },
        py::arg("a"), "Solve A^T X + X A = -I.");
  m.def("spectral_norm", [](const Array& a) { return spectral_norm(to_matrix(a)); }, py::arg("a"));
  m.def("is_hurwitz", [](const std::vector<double>& c) { return is_hurwitz_polynomial(c); },
        py::arg("coeffs"), "Routh-Hurwitz test for s^n + c_1 s^{n-1} + ... + c_n.");
  m.def("gain_summary", &gain_summary, py::arg("observer"), py::arg("controller"), py::arg("l1"),
        py::arg("l2"));
  m.def("sensitivity_margin", &margin, py::arg("controller"), py::arg("q_norm"), py::arg("theta_bar"));
  m.def(
      "time_regulation_dwell",
      [](double delta, double pi_bar, double pi_low) {
        ChannelParams p;
        p.delta = delta;
        p.pi_bar = pi_bar;
        p.pi_low = pi_low;
        return time_regulation_dwell(p);
      },
      py::arg("delta"), py::arg("pi_bar"), py::arg("pi_low"));

  m.def(
      "render_config",
      [](const std::string& path, const std::vector<std::string>& overrides) {
        return render_manifest(parse_config(path, overrides));
      },
      py::arg("path"), py::arg("overrides") = std::vector<std::string>{});
  m.def("simulate", &simulate_config, py::arg("path"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("replica") = 0);
  m.def("run_ensemble", &ensemble_config, py::arg("path"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("replicas") = py::none(), py::arg("workers") = 0);
  m.def("feasibility_json", &feasibility, py::arg("path"), py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "main",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "etsim");
        py::gil_scoped_release release;
        return run_cli(args);
      },
      py::arg("args"));
}
