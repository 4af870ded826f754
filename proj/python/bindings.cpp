#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nakano/curvature.hpp"
#include "nakano/direct_image.hpp"
#include "nakano/errors.hpp"
#include "nakano/l2.hpp"
#include "nakano/parallel.hpp"
#include "nakano/report.hpp"

namespace py = pybind11;
using namespace nakano;

namespace {

Coordinates coordinates(const std::vector<std::string>& names, bool complex) {
  return complex ? Coordinates::complex(names) : Coordinates::real(names);
}

MetricPtr metric_from(const std::string& spec, const Coordinates& coords, std::size_t base_dim) {
  const Json j = parse_json(spec, "metric");
  return parse_metric(j.is_string() ? Json{{"kind", "entrywise"}, {"entries", Json::array({j})}} : j,
                      MetricContext{coords, {}, 0, base_dim}, "metric");
}

std::string run_suite_json(const std::string& config, bool normalize) {
  return serialize(to_json(run_suite(parse_suite(parse_json(config, "config"))), normalize));
}

py::dict curvature_at(const std::string& metric, const std::vector<std::string>& names,
                      const std::vector<double>& point, bool complex) {
  const Coordinates c = coordinates(names, complex);
  const MetricPtr m = metric_from(metric, c, 0);
  const CurvatureTensor th = curvature(*m, point);
  py::list blocks;
  for (std::size_t j = 0; j < th.n; ++j) {
    py::list row;
    for (std::size_t k = 0; k < th.n; ++k) row.append(th(j, k));
    blocks.append(row);
  }
  py::dict out;
  out["metric"] = th.metric;
  out["curvature"] = blocks;
  out["nakano_lambda_min"] = generalized_lambda_min(nakano_matrix(th, th.metric), th.metric, th.n);
  return out;
}

py::dict pushforward_at(const std::string& metric, const std::vector<std::string>& base_axes,
                        const std::vector<std::string>& fiber_axes, const std::string& fiber,
                        const std::vector<double>& t, int order, const std::string& scheme) {
  const Coordinates total = coordinates(base_axes, false) + coordinates(fiber_axes, false);
  const MetricPtr m = metric_from(metric, total, base_axes.size());
  QuadratureRule rule;
  rule.order = order;
  const Fibered d{make_domain(Box{std::vector<double>(t.size(), -1e300), std::vector<double>(t.size(), 1e300)}),
                  Fibered::Rule::Product,
                  std::make_shared<const Domain>(parse_domain(parse_json(fiber, "fiber"), "fiber"))};
  const PushforwardMetric h(m, d, rule, parse_scheme(scheme, "scheme"));
  const Integral v = h.value_with_error(t);
  const CurvatureTensor th = real_curvature(h, t);
  py::dict out;
  out["value"] = v.value;
  out["error_estimate"] = v.error_estimate;
  out["nakano_lambda_min"] = generalized_lambda_min(nakano_matrix(th, th.metric), th.metric, th.n);
  return out;
}

py::dict l2_estimate(const std::string& metric, const std::string& psi, const std::vector<std::string>& f, int n,
                     const std::string& shape) {
  const Coordinates z = Coordinates::complex({"z"});
  std::vector<ScalarPtr> fr;
  for (const auto& s : f) fr.push_back(expression_field(z, s));
  if (shape != "disc" && shape != "square") throw ConfigError("shape must be 'disc' or 'square'");
  const DbarGrid g = make_dbar_grid(shape == "disc" ? DbarGrid::Shape::Disc : DbarGrid::Shape::Square, n);
  const L2Report r = check_estimate({metric_from(metric, z, 0), expression_field(z, psi), fr, {}}, g);
  py::dict out;
  out["lhs"] = r.lhs;
  out["rhs"] = r.rhs;
  out["ratio"] = r.ratio;
  out["residual"] = r.residual;
  out["iterations"] = r.iterations;
  out["n"] = r.n;
  out["delta"] = r.delta;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Nakano positivity numerical laboratory";
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("run_suite_json", &run_suite_json, py::arg("config"), py::arg("normalize") = false,
        py::call_guard<py::gil_scoped_release>());
  m.def("curvature", &curvature_at, py::arg("metric"), py::arg("axes"), py::arg("point"),
        py::arg("complex") = false);
  m.def("pushforward", &pushforward_at, py::arg("metric"), py::arg("base_axes"), py::arg("fiber_axes"),
        py::arg("fiber"), py::arg("t"), py::arg("order") = 32, py::arg("scheme") = "auto");
  m.def("l2_estimate", &l2_estimate, py::arg("metric"), py::arg("psi"), py::arg("f"), py::arg("n") = 64,
        py::arg("shape") = "disc");
  m.def("evaluate", [](const std::string& text, const Env& env) { return evaluate(parse(text), env); },
        py::arg("expression"), py::arg("env"));
  m.def("workers", &workers);
  m.def("set_workers", &set_workers, py::arg("n"));
  m.attr("config_version") = std::string(kConfigVersion);
}
