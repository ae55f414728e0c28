#include <doctest.h>

#include <string>

#include "test_support.hpp"
#include "weaksqz/serialization.hpp"
#include "weaksqz/tag_io.hpp"

using namespace weaksqz;
using doctest::Approx;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(WEAKSQZ_SOURCE_DIR) / "configs";

Json minimal_pipeline() {
  return Json::parse(R"({
    "source": {"tags": {"path": "run.sqzt"}},
    "calibration": {"k_MHz_per_mW": 104.5}
  })");
}

std::string config_error(const Json& j) {
  try {
    pipeline_config_from_json(j);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigInvalid);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("demo pipeline config") {
  const auto path = kConfigs / "demo_pipeline.json";
  const auto c = pipeline_config_from_json(parse_json_file(path), kConfigs);
  const auto& sim = std::get<SimConfig>(c.source);
  CHECK(sim.pump_power == Approx(30e-6).epsilon(1e-14));
  CHECK(sim.k == Approx(1.045e11).epsilon(1e-14));
  CHECK(sim.pair_rate() == Approx(3.135e6).epsilon(1e-12));
  CHECK(sim.cavity.gamma1 == 82.1e6);
  CHECK(sim.detector_a.jitter_fwhm == matched_jitter_fwhm(sim.cavity));
  CHECK(sim.detector_b.dark_rate == 100.0);
  CHECK(sim.channel_b_delay == Approx(-0.98e-9).epsilon(1e-14));
  CHECK(sim.seed == 20240611);
  CHECK(c.window.num_bins == 4000);
  CHECK(c.window.center_ps == -980);
  CHECK(std::get<double>(c.calibration) == Approx(1.045e11).epsilon(1e-14));
  CHECK(c.estimation.mode == FormulaMode::ComposedChain);
  CHECK_FALSE(c.estimation.escape_efficiency.has_value());
  CHECK_FALSE(c.estimation.threshold_power.has_value());
  CHECK(c.uncertainty_samples == 2000);
  CHECK(c.uncertainty_seed == 7);

  const auto sim_only = sim_config_from_json(parse_json_file(kConfigs / "demo_sim.json"));
  CHECK(sim_only.pair_rate() == sim.pair_rate());
}

TEST_CASE("simulation config round trip") {
  auto j = parse_json_file(kConfigs / "demo_sim.json");
  const auto c = sim_config_from_json(j);
  const auto once = to_json(c);
  const auto again = to_json(sim_config_from_json(once));
  CHECK(once.dump() == again.dump());
  CHECK(sim_config_from_json(once).detector_a.jitter_fwhm == c.detector_a.jitter_fwhm);
}

TEST_CASE("unknown and malformed keys are rejected") {
  auto j = minimal_pipeline();
  CHECK_NOTHROW(pipeline_config_from_json(j));
  j["corelator"] = Json::object();
  CHECK(config_error(j).find("corelator") != std::string::npos);

  j = minimal_pipeline();
  j["calibration"]["k_MHz_per_mw"] = 1.0;
  CHECK(config_error(j).find("k_MHz_per_mw") != std::string::npos);

  j = minimal_pipeline();
  j["source"]["simulate"] = Json::object();
  CHECK_FALSE(config_error(j).empty());

  j = minimal_pipeline();
  j["normalization"] = "peak";
  CHECK_FALSE(config_error(j).empty());

  j = minimal_pipeline();
  j["correlator"] = {{"bin_ps", "35"}};
  CHECK_FALSE(config_error(j).empty());

  j = minimal_pipeline();
  j["estimation"] = {{"eta_esc", "rates"}};
  CHECK_FALSE(config_error(j).empty());

  j = minimal_pipeline();
  j["uncertainty"] = {{"samples", 10}};
  CHECK_FALSE(config_error(j).empty());
}

TEST_CASE("paths resolve against the config directory") {
  auto j = minimal_pipeline();
  const auto c = pipeline_config_from_json(j, "/data/runs");
  CHECK(std::get<TagSource>(c.source).path == std::filesystem::path("/data/runs/run.sqzt"));
  j["source"]["tags"]["path"] = "/abs/run.sqzt";
  CHECK(std::get<TagSource>(pipeline_config_from_json(j, "/data").source).path == "/abs/run.sqzt");

  j = minimal_pipeline();
  j["calibration"] = {{"rate_csv", "scan.csv"}, {"eta", 0.5}, {"model", "offset"}};
  const auto scan = std::get<RateScan>(pipeline_config_from_json(j, "/data").calibration);
  CHECK(scan.path == "/data/scan.csv");
  CHECK(scan.counting_efficiency == 0.5);
  CHECK(scan.model == RateModel::WithOffset);
}

TEST_CASE("estimation settings") {
  const auto c = estimation_from_json(Json::parse(R"({"mode": "eq5", "eta_esc": 0.7, "pth_W": 0.1653, "freq_hz": 1e6})"));
  CHECK(c.mode == FormulaMode::LiteralEq5);
  CHECK(c.escape_efficiency == 0.7);
  CHECK(c.threshold_power == 0.1653);
  CHECK(c.analysis_frequency == 1e6);
  const auto back = estimation_from_json(to_json(c));
  CHECK(back.escape_efficiency == c.escape_efficiency);
  CHECK(to_json(back).dump() == to_json(c).dump());
  CHECK(to_json(EstimationConfig{})["eta_esc"] == "gammas");
}

TEST_CASE("truth record round trip") {
  SimConfig c;
  c.cavity = test::reference_cavity();
  c.pump_power = 30e-6;
  c.k = 1.045e11;
  c.duration = 1e-3;
  c.detector_a.jitter_fwhm = 200e-12;
  const auto truth = simulate(c).truth;
  const auto j = to_json(truth);
  const auto back = truth_from_json(Json::parse(j.dump()));
  CHECK(to_json(back).dump() == j.dump());
  CHECK(back.expected_peak_g2 == truth.expected_peak_g2);
  CHECK(back.seed == truth.seed);
}

TEST_CASE("comb fit report round trip") {
  const auto fit = fit_comb(test::comb_histogram(test::reference_comb(), 0.01, 4));
  const auto j = to_json(fit);
  CHECK(j["model"] == "comb");
  const auto back = comb_fit_from_json(Json::parse(j.dump()));
  CHECK(to_array(back.params) == to_array(fit.params));
  CHECK(back.fit.covariance == fit.fit.covariance);
  CHECK(back.fit.iterations == fit.fit.iterations);
  CHECK(to_json(back).dump() == j.dump());

  const auto text = fit_text(fit.fit);
  CHECK(text.find("Omega_c ") != std::string::npos);
  CHECK(text.find(" s^-1\n") != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);

  Json other = j;
  other["model"] = "rate";
  CHECK(test::error_code_of([&] { comb_fit_from_json(other); }) == ErrorCode::ConfigInvalid);
  other = j;
  other.erase("covariance");
  CHECK(test::error_code_of([&] { comb_fit_from_json(other); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("report fields and validation") {
  EstimationConfig c;
  c.escape_efficiency = 0.7;
  c.threshold_power = 0.1653;
  const auto est = estimate_squeezing(80.56, test::reference_cavity(), 1.045e11, c);
  const auto j = to_json(est);
  CHECK(validate_report(j).empty());
  CHECK(j["eta_esc_source"] == "explicit");
  CHECK(j["p_th_source"] == "measured");
  CHECK(j["formula_mode"] == "chain");

  auto broken = j;
  broken.erase("sigma_db");
  CHECK(validate_report(broken).size() == 1);
  broken = j;
  broken["g2_zero"] = 1.5;
  CHECK_FALSE(validate_report(broken).empty());
  broken = j;
  broken["formula_mode"] = "other";
  CHECK_FALSE(validate_report(broken).empty());
  broken = j;
  broken["stages"] = {{"correlate", Json::object()}};
  CHECK(validate_report(broken).size() == 5);
  CHECK_FALSE(validate_report(Json::array()).empty());

  const auto text = report_text(j);
  CHECK(text.rfind("r 0.0076", 0) == 0);
  CHECK(text.find("formula_mode chain") != std::string::npos);
}

TEST_CASE("json files") {
  test::TempDir dir;
  write_text_file(dir / "bad.json", "{\"a\": ");
  CHECK(test::error_code_of([&] { parse_json_file(dir / "bad.json"); }) == ErrorCode::ConfigInvalid);
  CHECK(test::error_code_of([&] { parse_json_file(dir / "missing.json"); }) == ErrorCode::IoFailure);
  write_json_file(dir / "x.json", Json{{"b", 1}, {"a", 2}});
  CHECK(read_text_file(dir / "x.json") == "{\n  \"b\": 1,\n  \"a\": 2\n}\n");
}
