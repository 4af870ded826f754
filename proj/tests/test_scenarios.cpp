#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nakano/errors.hpp"
#include "nakano/parallel.hpp"
#include "nakano/report.hpp"

using namespace nakano;

namespace {

Json gaussian_matrix() {
  return {{"name", "g"},
          {"kind", "prekopa_matrix"},
          {"base_axes", {"t1"}},
          {"fiber_axes", {"x1"}},
          {"base", {{"kind", "box"}, {"lo", {-1}}, {"hi", {1}}}},
          {"fiber", {{"kind", "box"}, {"lo", {-6}}, {"hi", {6}}}},
          {"metric", {{"kind", "entrywise"}, {"entries", {"exp(-(t1^2 + x1^2))"}}}},
          {"rule", {{"order", 48}}}};
}

Json suite(Json scenarios) {
  return {{"version", "nakano-lab/1"}, {"seed", 3}, {"grid", 9}, {"scenarios", std::move(scenarios)}};
}

SuiteReport run(const Json& config) { return run_suite(parse_suite(config)); }

std::string config_error(const Json& config) {
  try {
    parse_suite(config);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const Check& find_check(const ScenarioReport& r, const std::string& name) {
  for (const auto& c : r.checks)
    if (c.name == name) return c;
  FAIL("missing check " << name);
  return r.checks.front();
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(exit_code(Status::Pass) == 0);
  CHECK(exit_code(Status::ConclusionFailed) == 1);
  CHECK(exit_code(Status::NumericalFailure) == 3);
  CHECK(exit_code(Status::HypothesesNotMet) == 4);
  std::vector<ScenarioReport> rs(3);
  CHECK(aggregate_exit_code(rs) == 0);
  rs[0].status = Status::HypothesesNotMet;
  CHECK(aggregate_exit_code(rs) == 4);
  rs[1].status = Status::NumericalFailure;
  CHECK(aggregate_exit_code(rs) == 3);
  rs[2].status = Status::ConclusionFailed;
  CHECK(aggregate_exit_code(rs) == 1);
}

TEST_CASE("config validation") {
  CHECK(config_error(suite(Json::array({gaussian_matrix()}))).empty());

  Json no_version = suite(Json::array({gaussian_matrix()}));
  no_version.erase("version");
  CHECK(config_error(no_version).find("config: missing required key 'version'") != std::string::npos);

  Json bad_version = suite(Json::array({gaussian_matrix()}));
  bad_version["version"] = "other/2";
  CHECK(config_error(bad_version).find("config.version") != std::string::npos);

  Json extra = suite(Json::array({gaussian_matrix()}));
  extra["colour"] = "blue";
  CHECK(config_error(extra).find("unknown key 'colour'") != std::string::npos);

  CHECK(config_error(suite(Json::array())).find("nonempty") != std::string::npos);

  Json s = gaussian_matrix();
  s["kind"] = "prekopa_tensor";
  CHECK(config_error(suite(Json::array({s}))).find("config.scenarios[0].kind") != std::string::npos);

  s = gaussian_matrix();
  s["fiber"]["lo"] = {-1, -1};
  s["fiber"]["hi"] = {1, 1};
  CHECK(config_error(suite(Json::array({s}))).find("config.scenarios[0].fiber") != std::string::npos);

  s = gaussian_matrix();
  s["metric"]["entries"] = {"exp(-y^2)"};
  CHECK(config_error(suite(Json::array({s}))).find("unbound variable 'y'") != std::string::npos);

  s = gaussian_matrix();
  s["metric"]["entries"] = {"exp(-(t1^2 + "};
  CHECK(config_error(suite(Json::array({s}))).find("config.scenarios[0].metric.entries[0]") != std::string::npos);

  s = gaussian_matrix();
  s["metric"]["tolerance"] = 1;
  CHECK(config_error(suite(Json::array({s}))).find("unknown key 'tolerance'") != std::string::npos);

  CHECK(config_error(suite(Json::array({gaussian_matrix(), gaussian_matrix()}))).find("duplicate name") !=
        std::string::npos);

  s = gaussian_matrix();
  s["total"] = s["fiber"];
  CHECK(config_error(suite(Json::array({s}))).find("exactly one of 'fiber' or 'total'") != std::string::npos);

  s = gaussian_matrix();
  s["kind"] = "berndtsson_reinhardt";
  CHECK_FALSE(config_error(suite(Json::array({s}))).empty());
}

TEST_CASE("malformed JSON reports line and column") {
  try {
    parse_json("{\n  \"version\": \"nakano-lab/1\",\n  \"seed\": ]\n}", "bad.json");
    FAIL("no error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bad.json: malformed JSON at line 3, column") != std::string::npos);
  }
}

TEST_CASE("gaussian prekopa_matrix closed form") {
  const SuiteReport r = run(suite(Json::array({gaussian_matrix()})));
  REQUIRE(r.scenarios.size() == 1);
  const auto& s = r.scenarios[0];
  CHECK(s.status == Status::Pass);
  CHECK(r.exit_code == 0);
  CHECK(find_check(s, "input_nakano").summary["lambda_min"].get<double>() == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(find_check(s, "direct_image_nakano").summary["lambda_min"].get<double>() ==
        doctest::Approx(2.0).epsilon(1e-8));
  CHECK(find_check(s, "direct_image_nakano").table.size() == 9);
  CHECK(s.quadrature["max_relative_error_estimate"].get<double>() < 1e-4);
}

TEST_CASE("vacuous run skips conclusions") {
  Json s = gaussian_matrix();
  s["metric"]["entries"] = {"exp(t1^2 - x1^2)"};
  const SuiteReport r = run(suite(Json::array({s})));
  const auto& sr = r.scenarios[0];
  CHECK(sr.status == Status::HypothesesNotMet);
  CHECK(r.exit_code == 4);
  CHECK(sr.checks.size() == 1);
  CHECK_FALSE(sr.checks[0].pass);
  CHECK(sr.skipped == std::vector<std::string>{"direct_image_nakano"});
  const Json j = to_json(r, true);
  CHECK(j["scenarios"][0]["status"] == "hypotheses_not_met");
  CHECK(j["scenarios"][0]["skipped_conclusions"][0] == "direct_image_nakano");
}

TEST_CASE("hypothesis_min tightens hypotheses") {
  Json s = gaussian_matrix();
  s["metric"]["entries"] = {"exp(-x1^2)"};
  CHECK(run(suite(Json::array({s}))).scenarios[0].status == Status::Pass);
  s["tolerances"] = {{"hypothesis_min", 1e-8}};
  CHECK(run(suite(Json::array({s}))).scenarios[0].status == Status::HypothesesNotMet);
}

TEST_CASE("conclusion failure dumps the offending data") {
  const Json s = {{"name", "tight"},
                  {"kind", "l2_flat_benchmark"},
                  {"metric", {{"kind", "entrywise"}, {"entries", {1}}}},
                  {"psi", "abs2(z_re, z_im)"},
                  {"f", {"1"}},
                  {"grids", {16}},
                  {"ratio_bound", 0.1}};
  const SuiteReport r = run(suite(Json::array({s})));
  CHECK(r.scenarios[0].status == Status::ConclusionFailed);
  CHECK(r.exit_code == 1);
  CHECK(r.scenarios[0].failure_dump["check"] == "estimate_ratio");
  CHECK(r.scenarios[0].failure_dump["detail"]["runs"][0]["ratio"].get<double>() > 0.1);
}

TEST_CASE("quadrature refusal is a numerical failure") {
  Json s = gaussian_matrix();
  s["rule"] = {{"order", 4}};
  const SuiteReport r = run(suite(Json::array({s})));
  CHECK(r.scenarios[0].status == Status::NumericalFailure);
  CHECK(r.scenarios[0].error.find("quadrature did not converge") != std::string::npos);
  CHECK(r.exit_code == 3);
}

TEST_CASE("random_metric") {
  const Coordinates tx = Coordinates::real({"t1", "x1"});
  const auto a = random_metric(9, 2, tx, 1, 0.3);
  const auto b = random_metric(9, 2, tx, 1, 0.3);
  const auto c = random_metric(10, 2, tx, 1, 0.3);
  const std::vector<double> p{0.3, -0.7};
  CHECK((metric_eval(*a, p) - metric_eval(*b, p)).norm() == 0.0);
  CHECK((metric_eval(*a, p) - metric_eval(*c, p)).norm() > 1e-6);

  // Decoupled: Θ = 2A·δ, so λ_min is the same everywhere and at least 2.
  const auto d = random_metric(9, 2, tx, 1, 0.0);
  const SampleGrid g = sample_grid(Box{{-1, -1}, {1, 1}}, 5);
  const PositivityReport rep = certify_nakano(*d, g);
  CHECK(rep.lambda_min >= 2.0 - 1e-10);
  for (const auto& row : rep.table) CHECK(row.value == doctest::Approx(rep.lambda_min).epsilon(1e-8));

  CHECK_THROWS_AS(random_metric(1, 2, Coordinates::complex({"t", "z"}), 2, 0.1), ConfigError);
}

TEST_CASE("normalized reports omit timings") {
  const SuiteReport r = run(suite(Json::array({gaussian_matrix()})));
  const Json raw = to_json(r, false);
  const Json norm = to_json(r, true);
  CHECK(raw.contains("seconds"));
  CHECK(raw.contains("workers"));
  CHECK(raw["scenarios"][0].contains("seconds"));
  CHECK_FALSE(norm.contains("seconds"));
  CHECK_FALSE(norm.contains("workers"));
  CHECK_FALSE(norm["scenarios"][0].contains("seconds"));
}

TEST_CASE("csv tables") {
  const SuiteReport r = run(suite(Json::array({gaussian_matrix()})));
  const auto dir = std::filesystem::temp_directory_path() / "nakano_csv_test";
  std::filesystem::remove_all(dir);
  const auto files = write_csv(r, dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "g.input_nakano.csv");
  CHECK(files[1].filename() == "g.direct_image_nakano.csv");
  std::ifstream f(files[1]);
  std::string header, first;
  std::getline(f, header);
  std::getline(f, first);
  CHECK(header == "t1,value,norm");
  CHECK(first.rfind("-1,", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("identical reports across worker counts") {
  Json rnd = gaussian_matrix();
  rnd["name"] = "random";
  rnd["metric"] = {{"kind", "random"}, {"rank", 2}, {"coupling", 0.2}};
  rnd["fiber"] = {{"kind", "box"}, {"lo", {-2}}, {"hi", {2}}};
  const Json l2 = {{"name", "l2"},
                   {"kind", "l2_flat_benchmark"},
                   {"metric", {{"kind", "entrywise"}, {"entries", {"exp(-abs2(z_re, z_im))"}}}},
                   {"psi", "abs2(z_re, z_im)"},
                   {"f", {"1"}},
                   {"grids", {16, 24}}};
  const Json config = suite(Json::array({gaussian_matrix(), rnd, l2}));
  const int before = workers();
  std::vector<std::string> out;
  for (int w : {1, 2, 8}) {
    set_workers(w);
    out.push_back(serialize(to_json(run(config), true)));
  }
  set_workers(before);
  CHECK(out[0] == out[1]);
  CHECK(out[0] == out[2]);
}
