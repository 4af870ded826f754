#include "nakano/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "nakano/errors.hpp"
#include "nakano/scenarios.hpp"

namespace nakano {

namespace {

std::string line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

const char* type_name(const Json& j) { return j.type_name(); }

Expr parse_expr_at(const std::string& text, const std::string& path) {
  try {
    return parse(text);
  } catch (const ParseError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Expr entry_part(const Json& j, const std::string& path) {
  if (j.is_string()) return parse_expr_at(j.get<std::string>(), path);
  if (j.is_number()) return Expr::number(j.get<double>());
  throw ConfigError(path + ": expected an expression string or a number");
}

ComplexEntry parse_entry(const Json& j, const std::string& path) {
  if (!j.is_object()) {
    if (!j.is_string() && !j.is_number()) throw ConfigError(path + ": matrix entry must be an expression or {re, im}");
    return {entry_part(j, path), std::nullopt};
  }
  ObjectReader r(j, path);
  ComplexEntry e{entry_part(r.at("re"), r.child("re")), std::nullopt};
  if (r.has("im")) e.im = entry_part(r.at("im"), r.child("im"));
  r.finish();
  return e;
}

std::vector<ComplexEntry> parse_entries(ObjectReader& r, const std::string& key, std::size_t& rank) {
  const Json& list = r.at(key);
  if (!list.is_array() || list.empty()) throw ConfigError(r.child(key) + ": expected a nonempty array");
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(list.size()))));
  rank = static_cast<std::size_t>(r.integer_or("rank", static_cast<int>(side)));
  if (rank * rank != list.size())
    throw ConfigError(r.child(key) + ": expected rank² = " + std::to_string(rank * rank) + " entries, got " +
                      std::to_string(list.size()));
  std::vector<ComplexEntry> out;
  for (std::size_t i = 0; i < list.size(); ++i) out.push_back(parse_entry(list[i], r.child(key) + "[" + std::to_string(i) + "]"));
  return out;
}

template <class F>
auto rethrow_as_config(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + what);
  } catch (const DomainError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

Json parse_json(std::string_view text, std::string_view origin) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    std::string msg = e.what();
    if (const auto pos = msg.find("syntax error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ConfigError(std::string(origin) + ": malformed JSON at " + line_column(text, e.byte == 0 ? 0 : e.byte - 1) +
                      ": " + msg);
  }
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json(ss.str(), path.string());
}

ObjectReader::ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw ConfigError(path_ + ": expected an object, got " + type_name(j_));
}

bool ObjectReader::has(const std::string& key) const { return j_.contains(key); }

const Json* ObjectReader::find(const std::string& key) {
  const auto it = j_.find(key);
  if (it == j_.end()) return nullptr;
  used_.insert(key);
  return &*it;
}

const Json& ObjectReader::at(const std::string& key) {
  const Json* v = find(key);
  if (!v) throw ConfigError(path_ + ": missing required key '" + key + "'");
  return *v;
}

std::string ObjectReader::string(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_string()) throw ConfigError(child(key) + ": expected a string, got " + type_name(v));
  return v.get<std::string>();
}

std::string ObjectReader::string_or(const std::string& key, std::string fallback) {
  return has(key) ? string(key) : std::move(fallback);
}

double ObjectReader::number(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_number()) throw ConfigError(child(key) + ": expected a number, got " + type_name(v));
  return v.get<double>();
}

double ObjectReader::number_or(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

int ObjectReader::integer(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_number_integer()) throw ConfigError(child(key) + ": expected an integer, got " + type_name(v));
  return v.get<int>();
}

int ObjectReader::integer_or(const std::string& key, int fallback) { return has(key) ? integer(key) : fallback; }

bool ObjectReader::boolean_or(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const Json& v = at(key);
  if (!v.is_boolean()) throw ConfigError(child(key) + ": expected a boolean, got " + type_name(v));
  return v.get<bool>();
}

std::vector<double> ObjectReader::numbers(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_array()) throw ConfigError(child(key) + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ConfigError(child(key) + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::string> ObjectReader::strings(const std::string& key) {
  const Json& v = at(key);
  if (!v.is_array()) throw ConfigError(child(key) + ": expected an array of strings");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) throw ConfigError(child(key) + ": expected an array of strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

void ObjectReader::finish() const {
  for (auto it = j_.begin(); it != j_.end(); ++it)
    if (!used_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
}

Domain parse_domain(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  const std::string kind = r.string("kind");
  auto build = [&]() -> Domain {
    if (kind == "box") return Box{r.numbers("lo"), r.numbers("hi")};
    if (kind == "annulus") return ReinhardtAnnulus{r.numbers("inner"), r.numbers("outer")};
    if (kind == "tube") return TubeOverBase{std::make_shared<const Domain>(parse_domain(r.at("base"), r.child("base")))};
    if (kind == "halfspace") {
      HalfspaceConvex h;
      const Json& a = r.at("a");
      if (!a.is_array()) throw ConfigError(r.child("a") + ": expected an array of rows");
      for (const auto& row : a) h.a.push_back(row.get<std::vector<double>>());
      h.b = r.numbers("b");
      h.bounds = Box{r.numbers("lo"), r.numbers("hi")};
      h.interior = r.numbers("interior");
      return h;
    }
    throw ConfigError(r.child("kind") + ": unknown domain kind '" + kind + "'");
  };
  Domain d = rethrow_as_config(path, build);
  r.finish();
  return d;
}

QuadratureRule parse_rule(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  QuadratureRule rule;
  const std::string kind = r.string_or("kind", "gauss_legendre");
  if (kind == "gauss_legendre") {
    rule.kind = RuleKind::GaussLegendre;
  } else if (kind == "box_indicator") {
    rule.kind = RuleKind::BoxIndicator;
  } else if (kind == "qmc") {
    rule.kind = RuleKind::QuasiMonteCarlo;
  } else {
    throw ConfigError(r.child("kind") + ": unknown rule kind '" + kind + "'");
  }
  rule.order = r.integer_or("order", rule.order);
  if (rule.order < 2) throw ConfigError(r.child("order") + ": must be at least 2");
  rule.max_relative_error = r.number_or("max_relative_error", rule.max_relative_error);
  rule.allow_inaccurate = r.boolean_or("allow_inaccurate", rule.allow_inaccurate);
  r.finish();
  return rule;
}

DerivativeScheme parse_scheme(const std::string& text, const std::string& path) {
  if (text == "auto") return DerivativeScheme::Auto;
  if (text == "under_integral") return DerivativeScheme::UnderIntegral;
  if (text == "fixed_node_fd") return DerivativeScheme::FixedNodeFD;
  throw ConfigError(path + ": unknown derivative scheme '" + text + "'");
}

ScalarPtr parse_scalar(const Json& j, const Coordinates& coords, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected an expression string");
  const Expr e = parse_expr_at(j.get<std::string>(), path);
  return rethrow_as_config(path, [&] { return expression_field(coords, e); });
}

MetricPtr parse_metric(const Json& j, const MetricContext& ctx, const std::string& path) {
  ObjectReader r(j, path);
  const std::string kind = r.string("kind");
  MetricPtr out;
  if (kind == "entrywise" || kind == "mexp") {
    std::size_t rank = 0;
    const auto entries = parse_entries(r, kind == "mexp" ? "q" : "entries", rank);
    out = rethrow_as_config(path, [&] {
      return kind == "mexp" ? mexp_metric(ctx.coords, rank, entries) : entrywise_metric(ctx.coords, rank, entries);
    });
  } else if (kind == "scale") {
    ScalarPtr factor = parse_scalar(r.at("factor"), ctx.coords, r.child("factor"));
    out = scaled_metric(std::move(factor), parse_metric(r.at("metric"), ctx, r.child("metric")));
  } else if (kind == "average") {
    if (ctx.rotating_axes.empty()) throw ConfigError(path + ": torus average needs complex fiber axes");
    const int points = r.integer_or("points", 64);
    if (points < 1) throw ConfigError(r.child("points") + ": must be positive");
    out = averaged_metric(parse_metric(r.at("metric"), ctx, r.child("metric")), ctx.rotating_axes, points);
  } else if (kind == "random") {
    if (!ctx.coords.all_real()) throw ConfigError(path + ": random metrics live on real axes");
    const int rank = r.integer("rank");
    if (rank < 1) throw ConfigError(r.child("rank") + ": must be positive");
    const double coupling = r.number_or("coupling", 0.0);
    const std::uint64_t seed = r.has("seed") ? static_cast<std::uint64_t>(r.integer("seed")) : ctx.seed;
    out = random_metric(seed, static_cast<std::size_t>(rank), ctx.coords, ctx.base_dim, coupling);
  } else if (kind == "pushforward") {
    const auto names = r.strings("fiber_axes");
    const Coordinates fiber_coords =
        ctx.coords.all_complex() ? Coordinates::complex(names) : Coordinates::real(names);
    MetricContext inner{ctx.coords + fiber_coords, {}, ctx.seed, ctx.coords.real_dim()};
    for (std::size_t a = ctx.coords.size(); a < inner.coords.size(); ++a)
      if (inner.coords.axes()[a].kind == AxisKind::Complex) inner.rotating_axes.push_back(a);
    const Domain fiber = parse_domain(r.at("fiber"), r.child("fiber"));
    const QuadratureRule rule = r.has("rule") ? parse_rule(r.at("rule"), r.child("rule")) : QuadratureRule{};
    const DerivativeScheme scheme = parse_scheme(r.string_or("scheme", "auto"), r.child("scheme"));
    MetricPtr total = parse_metric(r.at("metric"), inner, r.child("metric"));
    Fibered dom{std::make_shared<const Domain>(Box{std::vector<double>(ctx.coords.real_dim(), -1e300),
                                                   std::vector<double>(ctx.coords.real_dim(), 1e300)}),
                Fibered::Rule::Product, std::make_shared<const Domain>(fiber)};
    out = rethrow_as_config(path, [&] {
      return std::make_shared<const PushforwardMetric>(std::move(total), std::move(dom), rule, scheme);
    });
  } else {
    throw ConfigError(r.child("kind") + ": unknown metric kind '" + kind + "'");
  }
  r.finish();
  return out;
}

}  // namespace nakano
