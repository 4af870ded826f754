#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nakano/scenarios.hpp"

namespace nakano {

/// A validated suite: every scenario is parsed before any runs.
struct Suite {
  std::uint64_t seed = 0;
  SuiteDefaults defaults;
  std::vector<Scenario> scenarios;
  std::optional<std::filesystem::path> report_path;
  std::optional<std::filesystem::path> csv_dir;
};

/// Top-level keys: version (required, "nakano-lab/1"), seed, grid,
/// tolerances {conclusion_relative, hypothesis_min}, output {report, csv},
/// scenarios (nonempty array). Relative output paths resolve against `base_dir`.
Suite parse_suite(const Json& config, const std::filesystem::path& base_dir = {});

struct SuiteReport {
  std::string version = std::string(kConfigVersion);
  std::uint64_t seed = 0;
  std::vector<ScenarioReport> scenarios;
  int exit_code = 0;
  int workers = 1;
  double seconds = 0.0;
};

SuiteReport run_suite(const Suite& suite);

/// 1 if any conclusion failed, else 3 if any numerical failure, else 4 if any
/// hypotheses were not met, else 0.
int aggregate_exit_code(const std::vector<ScenarioReport>& reports);

/// `normalize` drops timings and the worker count so reports compare byte-for-byte.
Json to_json(const ScenarioReport& r, bool normalize);
Json to_json(const SuiteReport& r, bool normalize);
std::string serialize(const Json& j);

/// One CSV per check with a table, named <scenario>.<check>.csv. Returns the
/// files written in order.
std::vector<std::filesystem::path> write_csv(const SuiteReport& r, const std::filesystem::path& dir);
std::string table_csv(const Check& c);

}  // namespace nakano
