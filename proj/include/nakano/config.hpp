#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nakano/direct_image.hpp"
#include "nakano/fields.hpp"
#include "nakano/geometry.hpp"
#include "nakano/quadrature.hpp"

namespace nakano {

using Json = nlohmann::json;

inline constexpr std::string_view kConfigVersion = "nakano-lab/1";

/// Parses JSON text; syntax errors become ConfigError with "line L, column C".
Json parse_json(std::string_view text, std::string_view origin = "<input>");
Json load_json_file(const std::filesystem::path& path);

/// Read-only view of a JSON object that records which keys were consumed.
/// finish() rejects any key that was never read.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path);
  const std::string& path() const { return path_; }
  bool has(const std::string& key) const;
  const Json& at(const std::string& key);
  const Json* find(const std::string& key);
  std::string string(const std::string& key);
  std::string string_or(const std::string& key, std::string fallback);
  double number(const std::string& key);
  double number_or(const std::string& key, double fallback);
  int integer(const std::string& key);
  int integer_or(const std::string& key, int fallback);
  bool boolean_or(const std::string& key, bool fallback);
  std::vector<double> numbers(const std::string& key);
  std::vector<std::string> strings(const std::string& key);
  std::string child(const std::string& key) const { return path_ + "." + key; }
  void finish() const;

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

Domain parse_domain(const Json& j, const std::string& path);
QuadratureRule parse_rule(const Json& j, const std::string& path);
DerivativeScheme parse_scheme(const std::string& text, const std::string& path);

/// Scalar literal: an expression string.
ScalarPtr parse_scalar(const Json& j, const Coordinates& coords, const std::string& path);

/// Context for metric literals. `rotating_axes` are the axes a torus average
/// acts on; `seed` feeds random families.
struct MetricContext {
  Coordinates coords;
  std::vector<std::size_t> rotating_axes;
  std::uint64_t seed = 0;
  std::size_t base_dim = 0;
};

/// Metric literal: {"kind": "entrywise" | "mexp" | "scale" | "average" |
/// "random" | "pushforward", ...}.
MetricPtr parse_metric(const Json& j, const MetricContext& ctx, const std::string& path);

}  // namespace nakano
