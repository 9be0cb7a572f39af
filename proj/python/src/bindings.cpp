#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <sstream>

#include "vy/cli.hpp"
#include "vy/combinatorics.hpp"
#include "vy/error.hpp"
#include "vy/oracle.hpp"
#include "vy/picard.hpp"
#include "vy/screened_field.hpp"
#include "vy/transport.hpp"
#include "vy/weights.hpp"

namespace py = pybind11;
using namespace vy;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict suite_dict(const SuiteResult& s) {
  py::dict metrics;
  for (const auto& [k, v] : s.metrics) metrics[py::str(k)] = v;
  py::dict d;
  d["name"] = s.name;
  d["passed"] = s.passed;
  d["seconds"] = s.seconds;
  d["metrics"] = metrics;
  d["failures"] = s.failures;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Screened Vlasov-Poisson simulator and inequality certification";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
  py::register_exception<TruncationError>(m, "TruncationError", PyExc_RuntimeError);
  py::register_exception<OverflowError>(m, "OverflowError", PyExc_OverflowError);

  m.def("gamma", [](double t) { return gamma_value(TimePoint(t).value()); }, py::arg("t"));
  m.def("damping_bound", [](double t) { return damping_bound(TimePoint(t).value()); }, py::arg("t"));
  m.def("phi", [](int n, double t) { return phi_eval(n, TimePoint(t)); }, py::arg("n"), py::arg("t"));
  m.def("partition_count", [](int n) { return enumerate_partitions(n).size(); }, py::arg("n"));
  m.def("binom_phi_sums", [](int n, double t) {
    auto s = binom_phi_sums(n, TimePoint(t));
    return py::make_tuple(s.sum_from_1, s.sum_from_0);
  }, py::arg("n"), py::arg("t"));
  m.def("t1_margin", [](int n, double t, double tol) {
    auto r = time_integral_margin(n, TimePoint(t), tol);
    return py::dict(py::arg("lhs") = r.lhs, py::arg("rhs") = r.rhs, py::arg("margin") = r.margin,
                    py::arg("quad_error") = r.quad_error);
  }, py::arg("n"), py::arg("t"), py::arg("quad_tol") = 1e-8);

  m.def("grid", [](double half_width, std::size_t nodes) {
    const GridFunction g = GridFunction::zeros(half_width, nodes);
    std::vector<double> x(nodes);
    for (std::size_t i = 0; i < nodes; ++i) x[i] = g.x(i);
    return to_array(x);
  }, py::arg("half_width"), py::arg("nodes"), "x nodes of the uniform grid on [-L, L]");
  m.def("solve_potential", [](py::array_t<double, py::array::c_style | py::array::forcecast> rho, double half_width) {
    std::vector<double> v(rho.data(), rho.data() + rho.size());
    return to_array(solve_potential(GridFunction(half_width, std::move(v))).values());
  }, py::arg("rho"), py::arg("half_width"), "phi = (1/2) e^{-|x|} * rho on the grid of rho");

  py::class_<InitialData>(m, "InitialData")
      .def_static("gaussian", &InitialData::gaussian, py::arg("amplitude"), py::arg("a") = 1.0)
      .def_static("mixture", [](const std::vector<std::tuple<double, double, double, double>>& terms) {
        std::vector<GaussianTerm> t;
        for (auto [w, cx, cv, a] : terms) t.push_back({w, cx, cv, a});
        return InitialData::mixture(t);
      }, py::arg("terms"), "terms: (weight, cx, cv, a) tuples")
      .def("f0", &InitialData::f0, py::arg("x"), py::arg("v"))
      .def("mass", &InitialData::mass)
      .def("scaled", &InitialData::scaled, py::arg("factor"))
      .def_property_readonly("terms", [](const InitialData& d) {
        py::list out;
        for (const auto& g : d.terms()) out.append(py::make_tuple(g.weight, g.cx, g.cv, g.a));
        return out;
      });

  m.def("certify_initial_data", [](const InitialData& d, int n_max, double safety) {
    auto c = certify_initial_data(d, n_max, safety);
    return py::dict(py::arg("norms") = c.norms, py::arg("margins") = c.margins, py::arg("errors") = c.errors,
                    py::arg("passed") = c.passed, py::arg("failing_order") = c.failing_order);
  }, py::arg("data"), py::arg("n_max") = 8, py::arg("safety") = 1.0);
  m.def("auto_tune_amplitude", &auto_tune_amplitude, py::arg("shape"), py::arg("n_max") = 8, py::arg("safety") = 2.0,
        py::arg("slack") = 1e-3);
  m.def("free_streaming_density", [](const InitialData& d, double t, int n, double L, std::size_t N) {
    return to_array(free_streaming_density(d, TimePoint(t), n, L, N).values());
  }, py::arg("data"), py::arg("t"), py::arg("n"), py::arg("half_width"), py::arg("nodes"));
  m.def("free_streaming_exact", [](const InitialData& d, double t, int n, double x) {
    return free_streaming_exact(d, TimePoint(t), n, x);
  }, py::arg("data"), py::arg("t"), py::arg("n"), py::arg("x"));

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("parse", [](const std::string& text) {
        std::istringstream in(text);
        return RunConfig::parse(in);
      }, py::arg("text"))
      .def_static("load", &RunConfig::load, py::arg("path"))
      .def("set", [](RunConfig& c, const std::string& key, py::object value) {
        c.set(key, py::str(value).cast<std::string>());
      }, py::arg("key"), py::arg("value"))
      .def("validate", &RunConfig::validate)
      .def("dump", &RunConfig::dump);

  py::class_<RunResult>(m, "RunResult")
      .def_property_readonly("times", [](const RunResult& r) { return r.final.times(); })
      .def_property_readonly("half_width", [](const RunResult& r) { return r.report.half_width; })
      .def_property_readonly("nodes", [](const RunResult& r) { return r.report.nodes; })
      .def_property_readonly("densities", [](const RunResult& r) {
        py::list out;
        for (const auto& s : r.final.slices) out.append(to_array(s.rho().values()));
        return out;
      })
      .def_property_readonly("passed", [](const RunResult& r) { return r.report.passed(); })
      .def("report_json", [](const RunResult& r) { return r.report.to_json(); });

  m.def("make_initial_data", &make_initial_data, py::arg("config"));
  m.def("run", [](const RunConfig& cfg) {
    py::gil_scoped_release release;
    return run(cfg);
  }, py::arg("config"));
  m.def("oracle_compare", [](const RunConfig& cfg, const RunResult& r) {
    OracleComparison c;
    {
      py::gil_scoped_release release;
      c = run_and_compare(cfg, make_initial_data(cfg), r.final);
    }
    return py::dict(py::arg("times") = c.times, py::arg("sup_error") = c.sup_error,
                    py::arg("relative_error") = c.relative_error, py::arg("max_sup_error") = c.max_sup_error,
                    py::arg("mass_drift") = c.mass_drift, py::arg("undershoot") = c.undershoot);
  }, py::arg("config"), py::arg("result"));

  m.def("tuple_bounds_suite", [](int n_max, int power_sum_max) { return suite_dict(tuple_bounds_suite(n_max, power_sum_max)); },
        py::arg("n_max") = 16, py::arg("power_sum_max") = 200);
  m.def("binomial_sums_suite", [](int n_max) { return suite_dict(binomial_sums_suite(n_max)); }, py::arg("n_max") = 50);
  m.def("time_integral_suite", [](int n_max) { return suite_dict(time_integral_suite(n_max)); }, py::arg("n_max") = 20);
  m.def("comparison_suite", [](int paths, std::uint64_t seed) { return suite_dict(comparison_suite(paths, seed)); },
        py::arg("random_paths") = 100, py::arg("seed") = 0);
  m.def("screened_field_suite", [](int inputs, std::uint64_t seed) { return suite_dict(screened_field_suite(inputs, seed)); },
        py::arg("random_inputs") = 100, py::arg("seed") = 0);
  m.def("free_stream_suite", [](const InitialData& d, int n_max) { return suite_dict(free_stream_suite(d, n_max)); },
        py::arg("data"), py::arg("n_max") = 8);
}
