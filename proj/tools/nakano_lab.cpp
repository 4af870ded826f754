#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "nakano/config.hpp"
#include "nakano/curvature.hpp"
#include "nakano/direct_image.hpp"
#include "nakano/errors.hpp"
#include "nakano/l2.hpp"
#include "nakano/parallel.hpp"
#include "nakano/report.hpp"

namespace fs = std::filesystem;
using namespace nakano;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

Json complex_matrix(const Eigen::MatrixXcd& m) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json a = Json::array(), b = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      a.push_back(m(i, j).real());
      b.push_back(m(i, j).imag());
    }
    re.push_back(a);
    im.push_back(b);
  }
  return {{"re", re}, {"im", im}};
}

struct PointArg {
  std::vector<std::string> names;
  std::vector<double> slots;
};

PointArg parse_point(const std::vector<std::string>& items, bool complex) {
  PointArg p;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--at: expected name=value, got '" + item + "'");
    p.names.push_back(item.substr(0, eq));
    std::string rest = item.substr(eq + 1);
    std::vector<double> parts;
    std::size_t start = 0;
    while (true) {
      const auto comma = rest.find(',', start);
      const std::string tok = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      try {
        std::size_t used = 0;
        parts.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError("--at: cannot read a number from '" + tok + "'");
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!complex && parts.size() != 1) throw ConfigError("--at " + item + ": real axes take one value");
    if (complex && parts.size() > 2) throw ConfigError("--at " + item + ": complex axes take re[,im]");
    if (complex && parts.size() == 1) parts.push_back(0.0);
    p.slots.insert(p.slots.end(), parts.begin(), parts.end());
  }
  return p;
}

int cmd_curvature(const std::string& metric_arg, const std::vector<std::string>& at, bool complex) {
  const PointArg p = parse_point(at, complex);
  const Coordinates coords = complex ? Coordinates::complex(p.names) : Coordinates::real(p.names);
  MetricPtr m;
  if (fs::is_regular_file(metric_arg)) {
    MetricContext ctx{coords, {}, 0, 0};
    m = parse_metric(load_json_file(metric_arg), ctx, "metric");
  } else {
    MetricContext ctx{coords, {}, 0, 0};
    m = parse_metric(Json{{"kind", "entrywise"}, {"entries", Json::array({metric_arg})}}, ctx, "--metric");
  }
  const CurvatureTensor th = curvature(*m, p.slots);
  const Eigen::MatrixXcd n = nakano_matrix(th, th.metric);
  Json blocks = Json::array();
  for (std::size_t j = 0; j < th.n; ++j)
    for (std::size_t k = 0; k < th.n; ++k)
      blocks.push_back({{"j", p.names[j]}, {"k", p.names[k]}, {"theta", complex_matrix(th(j, k))}});
  const Json out = {{"flavor", complex ? "chern" : "real"},
                    {"point", p.slots},
                    {"metric", complex_matrix(th.metric)},
                    {"curvature", blocks},
                    {"nakano_lambda_min", generalized_lambda_min(n, th.metric, th.n)}};
  std::cout << serialize(out);
  return 0;
}

std::vector<double> parse_t_grid(const std::string& spec) {
  std::vector<double> parts;
  std::size_t start = 0;
  for (int i = 0; i < 3; ++i) {
    const auto colon = spec.find(':', start);
    if ((i < 2) == (colon == std::string::npos)) throw ConfigError("--t-grid: expected lo:hi:count");
    const std::string tok = spec.substr(start, colon == std::string::npos ? std::string::npos : colon - start);
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("--t-grid: cannot read a number from '" + tok + "'");
    }
    start = colon + 1;
  }
  const int count = static_cast<int>(parts[2]);
  if (count < 1 || parts[2] != count) throw ConfigError("--t-grid: count must be a positive integer");
  if (count > 1 && !(parts[0] < parts[1])) throw ConfigError("--t-grid: need lo < hi");
  std::vector<double> out;
  for (int i = 0; i < count; ++i)
    out.push_back(count == 1 ? parts[0] : parts[0] + (parts[1] - parts[0]) * i / (count - 1));
  return out;
}

int cmd_pushforward(const fs::path& config_path, const std::string& t_grid, const std::optional<fs::path>& out,
                    const std::optional<fs::path>& csv) {
  const Json j = load_json_file(config_path);
  ObjectReader r(j, "pushforward");
  const bool complex = r.boolean_or("complex", false);
  const auto base_names = r.strings("base_axes");
  const auto fiber_names = r.strings("fiber_axes");
  const Coordinates base = complex ? Coordinates::complex(base_names) : Coordinates::real(base_names);
  const Coordinates fiber = complex ? Coordinates::complex(fiber_names) : Coordinates::real(fiber_names);
  const Coordinates total = base + fiber;
  const Domain fiber_dom = parse_domain(r.at("fiber"), r.child("fiber"));
  const QuadratureRule rule = r.has("rule") ? parse_rule(r.at("rule"), r.child("rule")) : QuadratureRule{};
  const DerivativeScheme scheme = parse_scheme(r.string_or("scheme", "auto"), r.child("scheme"));

  const std::vector<double> ts = parse_t_grid(t_grid);
  const std::size_t bd = base.real_dim();
  SampleGrid grid;
  std::vector<std::size_t> idx(bd, 0);
  while (true) {
    std::vector<double> p;
    for (std::size_t a = 0; a < bd; ++a) p.push_back(ts[idx[a]]);
    grid.points.push_back(std::move(p));
    std::size_t a = bd;
    while (a > 0 && ++idx[a - 1] == ts.size()) idx[--a] = 0;
    if (a == 0) break;
  }
  grid.resolution.assign(bd, static_cast<int>(ts.size()));
  const double pad = 1.0;
  auto base_dom = std::make_shared<const Domain>(
      Box{std::vector<double>(bd, ts.front() - pad), std::vector<double>(bd, ts.back() + pad)});
  const Fibered dom{base_dom, Fibered::Rule::Product, std::make_shared<const Domain>(fiber_dom)};

  Json rows = Json::array();
  Check table;
  table.columns = base.slot_names();
  if (r.has("metric")) {
    MetricContext ctx{total, {}, 0, bd};
    const MetricPtr m = parse_metric(r.at("metric"), ctx, r.child("metric"));
    r.finish();
    const PushforwardMetric h(m, dom, rule, scheme);
    const PositivityReport rep = certify_nakano(h, grid);
    for (std::size_t i = 0; i < grid.points.size(); ++i) {
      const Integral v = h.value_with_error(grid.points[i]);
      rows.push_back({{"t", grid.points[i]},
                      {"value", complex_matrix(v.value)},
                      {"error_estimate", v.error_estimate},
                      {"nakano_lambda_min", rep.table[i].value}});
    }
    table.table = rep.table;
  } else {
    const ScalarPtr phi = parse_scalar(r.at("phi"), total, r.child("phi"));
    r.finish();
    const PushforwardScalar f(phi, dom, rule, scheme);
    const PositivityReport rep = complex ? psh_hessian_test(f, grid) : convexity_test(f, grid);
    for (std::size_t i = 0; i < grid.points.size(); ++i)
      rows.push_back({{"t", grid.points[i]},
                      {"value", f.value(grid.points[i])},
                      {"error_estimate", f.error_estimate(grid.points[i])},
                      {"hessian_lambda_min", rep.table[i].value}});
    table.table = rep.table;
  }
  const std::string text = serialize({{"points", rows}});
  if (out) {
    write_text(*out, text);
  } else {
    std::cout << text;
  }
  if (csv) write_text(*csv, table_csv(table));
  return 0;
}

int cmd_l2(const fs::path& config_path, const std::optional<fs::path>& out) {
  const Json j = load_json_file(config_path);
  ObjectReader r(j, "l2");
  const Coordinates coords = Coordinates::complex({r.string_or("axis", "z")});
  MetricContext ctx{coords, {0}, 0, 0};
  const MetricPtr h = parse_metric(r.at("metric"), ctx, r.child("metric"));
  const ScalarPtr psi = parse_scalar(r.at("psi"), coords, r.child("psi"));
  const Json& f = r.at("f");
  if (!f.is_array() || f.size() != h->rank()) throw ConfigError("l2.f: expected one expression per bundle index");
  std::vector<ScalarPtr> fr;
  for (std::size_t i = 0; i < f.size(); ++i) fr.push_back(parse_scalar(f[i], coords, "l2.f"));
  const std::string shape = r.string_or("domain", "disc");
  if (shape != "disc" && shape != "square") throw ConfigError("l2.domain: expected 'disc' or 'square'");
  const int n = r.integer_or("n", 64);
  const double half_width = r.number_or("half_width", 1.0);
  r.finish();
  if (n < 2 || !(half_width > 0.0)) throw ConfigError("l2: n must be >= 2 and half_width positive");
  const DbarGrid g = make_dbar_grid(shape == "disc" ? DbarGrid::Shape::Disc : DbarGrid::Shape::Square, n, half_width);
  const L2Report rep = check_estimate({h, psi, fr, {}}, g);
  const std::string text = serialize({{"n", rep.n},
                                      {"delta", rep.delta},
                                      {"cells", rep.cells},
                                      {"unknowns", rep.unknowns},
                                      {"lhs", rep.lhs},
                                      {"rhs", rep.rhs},
                                      {"ratio", rep.ratio},
                                      {"residual", rep.residual},
                                      {"iterations", rep.iterations}});
  if (out) {
    write_text(*out, text);
  } else {
    std::cout << text;
  }
  return 0;
}

int cmd_run(const fs::path& config_path, std::optional<fs::path> out, std::optional<fs::path> csv, bool normalize) {
  const Json j = load_json_file(config_path);
  const Suite suite = parse_suite(j, fs::current_path());
  if (!out) out = suite.report_path;
  if (!csv) csv = suite.csv_dir;
  const SuiteReport rep = run_suite(suite);
  const std::string text = serialize(to_json(rep, normalize));
  if (out) {
    write_text(*out, text);
  } else {
    std::cout << text;
  }
  if (csv) write_csv(rep, *csv);
  for (const auto& s : rep.scenarios)
    std::cerr << s.name << ": " << status_name(s.status) << (s.error.empty() ? "" : " (" + s.error + ")") << '\n';
  return rep.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for Nakano positivity of direct images"};
  app.require_subcommand(1);
  int worker_flag = 0;
  app.add_option("--workers", worker_flag, "Worker threads (NAKANO_LAB_WORKERS takes precedence)")
      ->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "Run a scenario suite");
  std::string run_config;
  std::string run_out, run_csv;
  bool normalize = false;
  run->add_option("config", run_config, "Suite JSON")->required();
  run->add_option("--out", run_out, "Report path (default: output.report or stdout)");
  run->add_option("--csv", run_csv, "Directory for per-check CSV tables");
  run->add_flag("--normalize", normalize, "Omit timings and worker count");

  auto* curv = app.add_subcommand("curvature", "Curvature of a metric at one point");
  std::string metric_arg;
  std::vector<std::string> at;
  bool complex = false;
  curv->add_option("--metric", metric_arg, "Expression for a rank-1 metric, or a metric JSON file")->required();
  curv->add_option("--at", at, "Coordinates as name=value (complex: name=re,im)")->required();
  curv->add_flag("--complex", complex, "Treat axes as complex and compute Chern curvature");

  auto* push = app.add_subcommand("pushforward", "Direct image values and curvature on a base grid");
  std::string push_config, t_grid, push_out, push_csv;
  push->add_option("--config", push_config, "Pushforward JSON")->required();
  push->add_option("--t-grid", t_grid, "lo:hi:count per base slot")->required();
  push->add_option("--out", push_out, "Report path (default stdout)");
  push->add_option("--csv", push_csv, "CSV of base point and minimum eigenvalue");

  auto* l2 = app.add_subcommand("l2", "Minimal solution of the discrete dbar problem");
  std::string l2_config, l2_out;
  l2->add_option("--config", l2_config, "L2 problem JSON")->required();
  l2->add_option("--out", l2_out, "Report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  if (worker_flag > 0 && !std::getenv("NAKANO_LAB_WORKERS")) set_workers(worker_flag);

  auto opt = [](const std::string& s) { return s.empty() ? std::optional<fs::path>{} : std::optional<fs::path>{s}; };
  try {
    if (*run) return cmd_run(run_config, opt(run_out), opt(run_csv), normalize);
    if (*curv) return cmd_curvature(metric_arg, at, complex);
    if (*push) return cmd_pushforward(push_config, t_grid, opt(push_out), opt(push_csv));
    if (*l2) return cmd_l2(l2_config, opt(l2_out));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
