#include "cqa/case_io.hpp"
#include "cqa/cases.hpp"
#include "cqa/errors.hpp"
#include "cqa/report_io.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace cqa;

namespace {

SystemState state_of(const Case& c, const Vec& x) {
  if (x.size() != 4 * c.network.size()) {
    throw DimensionError("state must have 4N = " + std::to_string(4 * c.network.size()) + " entries");
  }
  return SystemState::from_flat(x, mask_from_bus_types(c.network));
}

Tolerances make_tol(double act_tol, double stat_tol, double pf_tol, double rank_tol_scale) {
  Tolerances t;
  t.act_tol = act_tol;
  t.stat_tol = stat_tol;
  t.pf_tol = pf_tol;
  t.rank_tol_scale = rank_tol_scale;
  t.validate();
  return t;
}

PerturbationModel make_model(const Case& c, const std::string& kind) {
  switch (perturbation_kind_from_string(kind)) {
    case PerturbationKind::Load: return PerturbationModel::load(c.network);
    case PerturbationKind::Shunt: return PerturbationModel::shunt(c.network);
    case PerturbationKind::Line: return PerturbationModel::line(c.network);
    case PerturbationKind::Mixed: break;
  }
  throw InvariantError("mixed models need an explicit coverage; use load, shunt or line");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LICQ and KKT multiplier diagnostics for AC optimal power flow";

  // Translators run most-recent first, so the base class goes in first.
  const auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", base.ptr());
  py::register_exception<InfeasibleError>(m, "InfeasibleError", base.ptr());
  py::register_exception<PowerFlowError>(m, "PowerFlowError", base.ptr());

  py::class_<Case>(m, "Case")
      .def_readonly("name", &Case::name)
      .def_property_readonly("n_buses", [](const Case& c) { return c.network.size(); })
      .def_property_readonly("n_lines", [](const Case& c) { return c.network.line_count(); })
      .def("to_json", [](const Case& c) { return case_to_json(c).dump(); });

  m.def("load_case", &load_case_text, py::arg("text"), "Parse a JSON case document.");
  m.def("load_case_file", &load_case_file, py::arg("path"));
  m.def("builtin_case", &builtin_case, py::arg("name"), py::arg("alpha") = 1.0);
  m.def(
      "builtin_point", [](const std::string& name, double alpha) { return builtin_point(name, alpha).flatten(); },
      py::arg("name"), py::arg("alpha") = 1.0, "Reference state of a built-in case, flat (pg, qg, v, theta).");

  m.def(
      "build_ybus",
      [](const Case& c) {
        const AdmittanceMatrix y = build_ybus(c.network);
        return py::make_tuple(y.g, y.b);
      },
      py::arg("case"), "Return (G, B) with Y = G + jB.");

  m.def(
      "pf_residual",
      [](const Case& c, const Vec& x) { return pf_residual(c.network, build_ybus(c.network), state_of(c, x)); },
      py::arg("case"), py::arg("x"));
  m.def(
      "pf_jacobian",
      [](const Case& c, const Vec& x) { return pf_jacobian(c.network, build_ybus(c.network), state_of(c, x)); },
      py::arg("case"), py::arg("x"));
  m.def(
      "newton_pf",
      [](const Case& c, double tol, int max_iter) {
        NewtonOptions opts;
        opts.tol = tol;
        opts.max_iter = max_iter;
        const NewtonResult r = newton_pf(c.network, build_ybus(c.network), Setpoints::from_network(c.network), opts);
        return py::make_tuple(r.state.flatten(), r.iterations);
      },
      py::arg("case"), py::arg("tol") = 1e-10, py::arg("max_iter") = 50,
      "Solve the power flow from the case setpoints; returns (x, iterations).");

  m.def(
      "licq_check",
      [](const Case& c, const Vec& x, double act_tol, double stat_tol, double pf_tol, double rank_tol_scale) {
        const ConstraintSystem cs = c.system(make_tol(act_tol, stat_tol, pf_tol, rank_tol_scale));
        return to_json(licq_check(cs, state_of(c, x))).dump();
      },
      py::arg("case"), py::arg("x"), py::arg("act_tol") = 1e-6, py::arg("stat_tol") = 1e-8, py::arg("pf_tol") = 1e-10,
      py::arg("rank_tol_scale") = kDefaultUlpScale);

  m.def(
      "kkt_solve",
      [](const Case& c, const Vec& x, double act_tol, double stat_tol, double pf_tol, double rank_tol_scale) {
        const ConstraintSystem cs = c.system(make_tol(act_tol, stat_tol, pf_tol, rank_tol_scale));
        return to_json(kkt_solve(cs, state_of(c, x), c.cost)).dump();
      },
      py::arg("case"), py::arg("x"), py::arg("act_tol") = 1e-6, py::arg("stat_tol") = 1e-8, py::arg("pf_tol") = 1e-10,
      py::arg("rank_tol_scale") = kDefaultUlpScale);

  m.def(
      "kkt_residual",
      [](const Case& c, const Vec& x, const Vec& y) {
        return kkt_residual(c.system(), state_of(c, x), c.cost, y);
      },
      py::arg("case"), py::arg("x"), py::arg("y"));

  m.def(
      "param_jacobian",
      [](const Case& c, const std::string& model, const Vec& x) {
        return param_jacobian(make_model(c, model), c.network, state_of(c, x));
      },
      py::arg("case"), py::arg("model"), py::arg("x"));

  m.def(
      "check_rank_hypothesis",
      [](const Case& c, const std::string& model, const Vec& x) {
        return to_json(check_rank_hypothesis(make_model(c, model), c.network, state_of(c, x))).dump();
      },
      py::arg("case"), py::arg("model"), py::arg("x"));

  m.def(
      "run_genericity_experiment",
      [](const Case& c, const std::string& model, int trials, std::uint64_t seed, int threads) {
        ExperimentOptions opts;
        opts.threads = threads;
        GenericityReport rep;
        {
          py::gil_scoped_release release;
          rep = run_genericity_experiment(c, make_model(c, model), trials, seed, opts);
        }
        return to_json(rep).dump();
      },
      py::arg("case"), py::arg("model") = "load", py::arg("trials") = 100, py::arg("seed") = 0,
      py::arg("threads") = 1);

  m.def(
      "tangency_escape_probe",
      [](double alpha, const std::vector<double>& deltas, int param_index) {
        const Example1 ex = example1(alpha);
        const auto rows = tangency_escape_probe(ex.c, ex.x_star, deltas, param_index);
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : rows) j.push_back(to_json(r));
        return j.dump();
      },
      py::arg("alpha"), py::arg("deltas"), py::arg("param_index") = 1,
      "Perturb one load entry of the tangency example and report the LICQ margin per delta.");
}
