#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "khess/analysis.hpp"
#include "khess/barriers.hpp"
#include "khess/config.hpp"
#include "khess/pipeline.hpp"
#include "khess/solver.hpp"
#include "khess/symfunc.hpp"

namespace py = pybind11;
using namespace khess;

namespace {

SymMatrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1) || a.shape(0) < 1 || a.shape(0) > kMaxDim)
    throw py::value_error("expected a square matrix of size 1.." + std::to_string(kMaxDim));
  const int n = static_cast<int>(a.shape(0));
  return SymMatrix(n, std::span<const double>(a.data(), static_cast<size_t>(n * n)));
}

py::array_t<double> to_array(const SymMatrix& m) {
  const int n = m.dim();
  py::array_t<double> out({n, n});
  auto w = out.mutable_unchecked<2>();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) w(i, j) = m(i, j);
  return out;
}

// Runs with the log captured and returned next to the exit code.
py::tuple run(const std::string& config_json, const std::string& out) {
  const ExperimentConfig cfg = parse_config(config_json);
  std::ostringstream log;
  int code;
  {
    py::gil_scoped_release release;
    code = run_experiment(cfg, out, log);
  }
  return py::make_tuple(code, log.str());
}

py::tuple check(const std::string& out) {
  std::ostringstream log;
  int code;
  {
    py::gil_scoped_release release;
    code = check_artifacts(out, log);
  }
  return py::make_tuple(code, log.str());
}

}  // namespace

PYBIND11_MODULE(_khess, m) {
  m.doc() = "k-Hessian solver core";
  m.attr("SCHEMA_VERSION") = kSchemaVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<SolveError>(m, "SolveError", PyExc_RuntimeError);

  m.def("sk", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& h, int k) {
    return sk(to_matrix(h), k);
  }, py::arg("hessian"), py::arg("k"));
  m.def("sk_jacobian", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& h, int k) {
    return to_array(sk_jacobian(to_matrix(h), k));
  }, py::arg("hessian"), py::arg("k"));
  m.def("elem_sym", [](std::vector<double> lambda, int k) { return elem_sym(std::span<const double>(lambda), k); },
        py::arg("eigenvalues"), py::arg("k"));

  m.def("regime", [](int n, int k) { return std::string(to_string(classify_regime(n, k))); }, py::arg("n"), py::arg("k"));
  m.def("c_nk", &c_nk, py::arg("n"), py::arg("k"));
  m.def("inequality_factor", &inequality_factor, py::arg("n"), py::arg("k"));

  py::class_<AlgebraCheck>(m, "AlgebraCheck")
      .def_readonly("sk_error", &AlgebraCheck::sk_error)
      .def_readonly("jacobian_error", &AlgebraCheck::jacobian_error)
      .def_readonly("samples", &AlgebraCheck::samples);
  m.def("algebra_check", &algebra_check, py::arg("seed"), py::arg("samples") = 1000);

  py::class_<RadialProfileSolution>(m, "RadialProfile")
      .def_readonly("n", &RadialProfileSolution::n)
      .def_readonly("k", &RadialProfileSolution::k)
      .def_readonly("epsilon", &RadialProfileSolution::epsilon)
      .def_readonly("r", &RadialProfileSolution::r)
      .def_readonly("R", &RadialProfileSolution::R)
      .def("phi", &RadialProfileSolution::phi)
      .def("dphi", &RadialProfileSolution::dphi)
      .def("d2phi", &RadialProfileSolution::d2phi)
      .def("residual", &RadialProfileSolution::residual);
  m.def("radial_profile", &radial_oracle, py::arg("n"), py::arg("k"), py::arg("epsilon"), py::arg("r"), py::arg("R"),
        py::arg("inner_value"), py::arg("outer_value"));
  m.def("radial_report", &radial_report, py::arg("n"), py::arg("k"), py::arg("epsilon"), py::arg("r"), py::arg("R"),
        py::arg("inner_value"), py::arg("outer_value"), py::arg("rows"));

  m.def("preset_names", [] {
    std::vector<std::string> names;
    for (const PresetInfo& p : preset_list()) names.push_back(p.name);
    return names;
  });
  m.def("preset", [](const std::string& name) { return serialize_config(preset(name)); }, py::arg("name"),
        "Canonical JSON text of a shipped preset.");
  m.def("normalize_config", [](const std::string& text) {
    const ExperimentConfig c = parse_config(text);
    validate(c);
    return serialize_config(c);
  }, py::arg("config_json"), "Parses, validates and re-serializes a config; raises ConfigError.");
  m.def("run", &run, py::arg("config_json"), py::arg("out"), "Returns (exit_code, log).");
  m.def("check", &check, py::arg("out"), "Returns (exit_code, log).");
}
