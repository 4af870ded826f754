#include "nakano/report.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nakano/errors.hpp"
#include "nakano/parallel.hpp"

namespace nakano {

Suite parse_suite(const Json& config, const std::filesystem::path& base_dir) {
  ObjectReader r(config, "config");
  const std::string version = r.string("version");
  if (version != kConfigVersion)
    throw ConfigError("config.version: expected '" + std::string(kConfigVersion) + "', got '" + version + "'");
  Suite s;
  if (r.has("seed")) {
    const int seed = r.integer("seed");
    if (seed < 0) throw ConfigError("config.seed: must be nonnegative");
    s.seed = static_cast<std::uint64_t>(seed);
  }
  s.defaults.seed = s.seed;
  s.defaults.grid = r.integer_or("grid", s.defaults.grid);
  if (s.defaults.grid < 2) throw ConfigError("config.grid: must be at least 2");
  if (const Json* t = r.find("tolerances")) {
    ObjectReader tr(*t, "config.tolerances");
    s.defaults.tolerances.conclusion_relative = tr.number_or("conclusion_relative", 1e-6);
    if (!(s.defaults.tolerances.conclusion_relative >= 0.0))
      throw ConfigError("config.tolerances.conclusion_relative: must be nonnegative");
    if (tr.has("hypothesis_min")) s.defaults.tolerances.hypothesis_min = tr.number("hypothesis_min");
    tr.finish();
  }
  if (const Json* o = r.find("output")) {
    ObjectReader orr(*o, "config.output");
    if (orr.has("report")) s.report_path = base_dir / orr.string("report");
    if (orr.has("csv")) s.csv_dir = base_dir / orr.string("csv");
    orr.finish();
  }
  const Json& list = r.at("scenarios");
  if (!list.is_array() || list.empty()) throw ConfigError("config.scenarios: expected a nonempty array");
  for (std::size_t i = 0; i < list.size(); ++i)
    s.scenarios.push_back(Scenario::parse(list[i], s.defaults, "config.scenarios[" + std::to_string(i) + "]"));
  r.finish();
  for (std::size_t i = 0; i < s.scenarios.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (s.scenarios[i].name() == s.scenarios[j].name())
        throw ConfigError("config.scenarios[" + std::to_string(i) + "]: duplicate name '" + s.scenarios[i].name() + "'");
  return s;
}

int aggregate_exit_code(const std::vector<ScenarioReport>& reports) {
  for (int wanted : {1, 3, 4})
    for (const auto& r : reports)
      if (exit_code(r.status) == wanted) return wanted;
  return 0;
}

SuiteReport run_suite(const Suite& suite) {
  const auto start = std::chrono::steady_clock::now();
  SuiteReport out;
  out.seed = suite.seed;
  out.workers = workers();
  for (const auto& s : suite.scenarios) out.scenarios.push_back(s.run());
  out.exit_code = aggregate_exit_code(out.scenarios);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

namespace {

Json check_json(const Check& c) {
  Json j = {{"name", c.name}, {"role", role_name(c.role)}, {"pass", c.pass}, {"summary", c.summary}};
  if (!c.table.empty()) j["table_rows"] = c.table.size();
  if (!c.dump.is_null()) j["dump"] = c.dump;
  return j;
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string file_stem(const std::string& s) {
  std::string out;
  for (char ch : s) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
                    ch == '_';
    out += ok ? ch : '_';
  }
  return out;
}

}  // namespace

Json to_json(const ScenarioReport& r, bool normalize) {
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back(check_json(c));
  Json j = {{"name", r.name},
            {"kind", r.kind},
            {"seed", r.seed},
            {"status", status_name(r.status)},
            {"exit_code", exit_code(r.status)},
            {"checks", std::move(checks)},
            {"skipped_conclusions", r.skipped},
            {"quadrature", r.quadrature}};
  if (!r.failure_dump.is_null()) j["failure_dump"] = r.failure_dump;
  if (!r.error.empty()) j["error"] = r.error;
  if (!normalize) j["seconds"] = r.seconds;
  return j;
}

Json to_json(const SuiteReport& r, bool normalize) {
  Json list = Json::array();
  for (const auto& s : r.scenarios) list.push_back(to_json(s, normalize));
  Json j = {{"version", r.version}, {"seed", r.seed}, {"exit_code", r.exit_code}, {"scenarios", std::move(list)}};
  if (!normalize) {
    j["workers"] = r.workers;
    j["seconds"] = r.seconds;
  }
  return j;
}

std::string serialize(const Json& j) { return j.dump(2) + "\n"; }

std::string table_csv(const Check& c) {
  std::ostringstream out;
  for (const auto& col : c.columns) out << col << ',';
  out << "value,norm\n";
  for (const auto& row : c.table) {
    for (double x : row.point) out << csv_number(x) << ',';
    out << csv_number(row.value) << ',' << csv_number(row.norm) << '\n';
  }
  return out.str();
}

std::vector<std::filesystem::path> write_csv(const SuiteReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& s : r.scenarios)
    for (const auto& c : s.checks) {
      if (c.table.empty()) continue;
      const auto path = dir / (file_stem(s.name) + "." + file_stem(c.name) + ".csv");
      std::ofstream f(path, std::ios::binary);
      if (!f) throw ConfigError("cannot write " + path.string());
      f << table_csv(c);
      written.push_back(path);
    }
  return written;
}

}  // namespace nakano
