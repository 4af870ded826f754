#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nakano/config.hpp"
#include "nakano/curvature.hpp"

namespace nakano {

enum class Status { Pass, ConclusionFailed, HypothesesNotMet, NumericalFailure };

std::string_view status_name(Status s);
/// 0 pass, 1 conclusion failed with hypotheses passing, 3 numerical failure,
/// 4 hypotheses not met.
int exit_code(Status s);

enum class CheckRole { Hypothesis, Conclusion, Diagnostic };

std::string_view role_name(CheckRole r);

struct Check {
  std::string name;
  CheckRole role = CheckRole::Diagnostic;
  bool pass = false;
  Json summary = Json::object();
  /// Slot names labelling the coordinates of `table` points.
  std::vector<std::string> columns;
  std::vector<PointValue> table;
  /// Offending point and matrices when the check fails.
  Json dump;
};

struct ScenarioReport {
  std::string name;
  std::string kind;
  std::uint64_t seed = 0;
  Status status = Status::Pass;
  std::vector<Check> checks;
  /// Conclusion checks not run because a hypothesis failed.
  std::vector<std::string> skipped;
  Json quadrature = Json::object();
  Json failure_dump;
  std::string error;
  double seconds = 0.0;
};

struct Tolerances {
  /// Conclusions pass when λ_min >= -conclusion_relative · scale.
  double conclusion_relative = 1e-6;
  /// When set, hypotheses pass only when λ_min >= hypothesis_min; otherwise
  /// semi-positivity within the default certificate tolerance suffices.
  std::optional<double> hypothesis_min;
};

struct SuiteDefaults {
  std::uint64_t seed = 0;
  int grid = 17;
  Tolerances tolerances;
};

inline constexpr std::array<std::string_view, 9> kScenarioKinds{
    "prekopa_scalar",   "prekopa_matrix", "berndtsson_reinhardt", "berndtsson_tube",     "invariant_direct_image_torus",
    "kiselman",         "exp_reduction",  "l2_flat_benchmark",    "l2_violation_search",
};

/// A validated scenario. Parsing builds every field and domain but performs no
/// numerical work.
class Scenario {
 public:
  struct Impl;
  static Scenario parse(const Json& j, const SuiteDefaults& defaults, const std::string& path);
  const std::string& name() const;
  const std::string& kind() const;
  ScenarioReport run() const;

 private:
  std::shared_ptr<const Impl> impl_;
};

/// g̃ = exp(-Q) with Q = A(Σt² + Σx²) + s(B(Σt)(Σx) + C Σx); A Hermitian
/// positive definite and B, C Hermitian drawn from a generator seeded by
/// `seed`. The first `base_dim` real axes are t, the rest x.
MetricPtr random_metric(std::uint64_t seed, std::size_t rank, const Coordinates& coords, std::size_t base_dim,
                        double coupling);

}  // namespace nakano
