#include "weaksqz/serialization.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "weaksqz/error.hpp"
#include "weaksqz/tag_io.hpp"
#include "weaksqz/units.hpp"

namespace weaksqz {

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ConfigInvalid, where + ": " + what);
}

// Typed access to one JSON object; remembers which keys were read so that
// misspelled keys are reported instead of silently ignored.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) bad(where_, "expected an object");
  }

  void mark(const std::string& key) { used_.insert(key); }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) bad(where_, "missing key '" + key + "'");
    return j_.at(key);
  }

  double number(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number()) bad(where_, "'" + key + "' must be a number");
    return v.get<double>();
  }

  double number(const std::string& key, double fallback) { return has(key) ? number(key) : (used_.insert(key), fallback); }

  std::uint64_t integer(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      bad(where_, "'" + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
    return has(key) ? integer(key) : (used_.insert(key), fallback);
  }

  std::int64_t signed_integer(const std::string& key, std::int64_t fallback) {
    used_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) bad(where_, "'" + key + "' must be an integer");
    return v.get<std::int64_t>();
  }

  std::string text(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_string()) bad(where_, "'" + key + "' must be a string");
    return v.get<std::string>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    return has(key) ? text(key) : (used_.insert(key), fallback);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) bad(where_, "unknown key '" + key + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

DetectorModel detector_from_json(const Json& j, const std::string& where, const CavityParams& cavity) {
  Fields f(j, where);
  DetectorModel d;
  d.efficiency = f.number("efficiency", 1.0);
  d.dark_rate = f.number("dark_rate_per_s", 0.0);
  d.dead_time = f.number("dead_time_ns", 0.0) * units::ns;
  if (f.has("jitter_ps") && f.raw("jitter_ps").is_string()) {
    if (f.text("jitter_ps") != "matched") bad(where, "jitter_ps must be a number or \"matched\"");
    d.jitter_fwhm = matched_jitter_fwhm(cavity);
  } else {
    d.jitter_fwhm = f.number("jitter_ps", 0.0) * units::ps;
  }
  f.finish();
  return d;
}

Json to_json(const DetectorModel& d) {
  Json j;
  j["efficiency"] = d.efficiency;
  j["dark_rate_per_s"] = d.dark_rate;
  j["dead_time_ns"] = d.dead_time / units::ns;
  j["jitter_ps"] = d.jitter_fwhm / units::ps;
  return j;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

CavityParams cavity_from_json(const Json& j) {
  Fields f(j, "cavity");
  const double g1 = f.number("gamma1_per_s");
  const double g2 = f.number("gamma2_per_s");
  const double l = f.number("length_m");
  const double enl = f.number("conversion_per_W");
  f.finish();
  return CavityParams::from_rates(g1, g2, l, enl);
}

Json to_json(const CavityParams& c) {
  Json j;
  j["gamma1_per_s"] = c.gamma1;
  j["gamma2_per_s"] = c.gamma2;
  j["length_m"] = c.length;
  j["conversion_per_W"] = c.conversion;
  return j;
}

SimConfig sim_config_from_json(const Json& j) {
  Fields f(j, "simulation");
  SimConfig c;
  c.cavity = cavity_from_json(f.raw("cavity"));
  c.pump_power = f.number("pump_uW") * units::uW;
  c.k = units::k_from_MHz_per_mW(f.number("k_MHz_per_mW"));
  if (f.has("pair_rate_per_s")) c.explicit_pair_rate = f.number("pair_rate_per_s");
  f.mark("pair_rate_per_s");
  c.duration = f.number("duration_s", c.duration);
  c.splitter_ratio = f.number("splitter_ratio", c.splitter_ratio);
  c.detector_a = detector_from_json(f.raw("detector_a"), "detector_a", c.cavity);
  c.detector_b = detector_from_json(f.raw("detector_b"), "detector_b", c.cavity);
  c.channel_b_delay = f.number("channel_b_delay_ns", c.channel_b_delay / units::ns) * units::ns;
  c.seed = f.integer("seed", c.seed);
  c.threads = static_cast<unsigned>(f.integer("threads", c.threads));
  f.finish();
  c.validate();
  return c;
}

Json to_json(const SimConfig& c) {
  Json j;
  j["cavity"] = to_json(c.cavity);
  j["pump_uW"] = c.pump_power / units::uW;
  j["k_MHz_per_mW"] = units::k_to_MHz_per_mW(c.k);
  if (c.explicit_pair_rate) j["pair_rate_per_s"] = *c.explicit_pair_rate;
  j["duration_s"] = c.duration;
  j["splitter_ratio"] = c.splitter_ratio;
  j["detector_a"] = to_json(c.detector_a);
  j["detector_b"] = to_json(c.detector_b);
  j["channel_b_delay_ns"] = c.channel_b_delay / units::ns;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

TruthRecord truth_from_json(const Json& j) {
  Fields f(j, "truth");
  TruthRecord t;
  t.pair_rate = f.number("pair_rate_per_s");
  t.pump_power = f.number("pump_W");
  t.k = f.number("k_per_s_per_W");
  t.mode_ratio = f.number("mode_ratio");
  t.linewidth = f.number("linewidth_per_s");
  t.round_trip_time = f.number("round_trip_time_s");
  t.delay = f.number("delay_s");
  t.gamma1 = f.number("gamma1_per_s");
  t.gamma2 = f.number("gamma2_per_s");
  t.transmission = f.number("transmission");
  t.expected_g2zero = f.number("expected_g2zero");
  if (f.has("expected_peak_g2")) t.expected_peak_g2 = f.number("expected_peak_g2");
  f.mark("expected_peak_g2");
  t.efficiency_a = f.number("efficiency_a");
  t.efficiency_b = f.number("efficiency_b");
  t.duration = f.number("duration_s");
  t.seed = f.integer("seed");
  f.finish();
  return t;
}

Json to_json(const TruthRecord& t) {
  Json j;
  j["pair_rate_per_s"] = t.pair_rate;
  j["pump_W"] = t.pump_power;
  j["k_per_s_per_W"] = t.k;
  j["mode_ratio"] = t.mode_ratio;
  j["linewidth_per_s"] = t.linewidth;
  j["round_trip_time_s"] = t.round_trip_time;
  j["delay_s"] = t.delay;
  j["gamma1_per_s"] = t.gamma1;
  j["gamma2_per_s"] = t.gamma2;
  j["transmission"] = t.transmission;
  j["expected_g2zero"] = t.expected_g2zero;
  j["expected_peak_g2"] = optional_number(t.expected_peak_g2);
  j["efficiency_a"] = t.efficiency_a;
  j["efficiency_b"] = t.efficiency_b;
  j["duration_s"] = t.duration;
  j["seed"] = t.seed;
  return j;
}

EstimationConfig estimation_from_json(const Json& j) {
  Fields f(j, "estimation");
  EstimationConfig c;
  c.mode = formula_mode_from_string(f.text("mode", "chain"));
  if (f.has("eta_esc")) {
    const auto& v = f.raw("eta_esc");
    if (v.is_string()) {
      if (v.get<std::string>() != "gammas") bad("estimation", "eta_esc must be a number or \"gammas\"");
    } else {
      c.escape_efficiency = f.number("eta_esc");
    }
  }
  f.mark("eta_esc");
  if (f.has("pth_W")) {
    const auto& v = f.raw("pth_W");
    if (v.is_string()) {
      if (v.get<std::string>() != "losses") bad("estimation", "pth_W must be a number or \"losses\"");
    } else {
      c.threshold_power = f.number("pth_W");
    }
  }
  f.mark("pth_W");
  c.analysis_frequency = f.number("freq_hz", c.analysis_frequency);
  f.finish();
  c.validate();
  return c;
}

Json to_json(const EstimationConfig& c) {
  Json j;
  j["mode"] = to_string(c.mode);
  j["eta_esc"] = c.escape_efficiency ? Json(*c.escape_efficiency) : Json("gammas");
  j["pth_W"] = c.threshold_power ? Json(*c.threshold_power) : Json("losses");
  j["freq_hz"] = c.analysis_frequency;
  return j;
}

PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  Fields f(j, "pipeline");
  PipelineConfig c;
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  {
    Fields s(f.raw("source"), "source");
    if (s.has("simulate") == s.has("tags")) bad("source", "give exactly one of 'simulate' and 'tags'");
    if (s.has("simulate")) {
      c.source = sim_config_from_json(s.raw("simulate"));
    } else {
      Fields t(s.raw("tags"), "tags");
      TagSource src;
      src.path = resolve(t.text("path"));
      src.channel_a = static_cast<std::uint8_t>(t.integer("channel_a", 0));
      src.channel_b = static_cast<std::uint8_t>(t.integer("channel_b", 1));
      t.finish();
      c.source = src;
    }
    s.finish();
  }
  if (f.has("correlator")) {
    Fields w(f.raw("correlator"), "correlator");
    c.window.bin_width_ps = w.signed_integer("bin_ps", c.window.bin_width_ps);
    c.window.num_bins = w.integer("bins", c.window.num_bins);
    c.window.center_ps = w.signed_integer("center_ps", c.window.center_ps);
    w.finish();
  }
  f.mark("correlator");
  const auto norm = f.text("normalization", "singles");
  if (norm == "singles") {
    c.normalization = NormalizationMode::Singles;
  } else if (norm == "tail") {
    c.normalization = NormalizationMode::TailBaseline;
  } else {
    bad("pipeline", "normalization must be \"singles\" or \"tail\"");
  }
  c.threads = static_cast<unsigned>(f.integer("threads", c.threads));
  if (f.has("cavity")) {
    Fields cav(f.raw("cavity"), "cavity");
    c.transmission = cav.number("transmission", c.transmission);
    c.conversion = cav.number("conversion_per_W", c.conversion);
    c.sigma_conversion = cav.number("sigma_conversion_per_W", c.sigma_conversion);
    cav.finish();
  }
  f.mark("cavity");
  if (f.has("calibration")) {
    Fields cal(f.raw("calibration"), "calibration");
    if (cal.has("rate_csv")) {
      RateScan scan;
      scan.path = resolve(cal.text("rate_csv"));
      scan.counting_efficiency = cal.number("eta", scan.counting_efficiency);
      const auto model = cal.text("model", "origin");
      if (model == "origin") {
        scan.model = RateModel::ThroughOrigin;
      } else if (model == "offset") {
        scan.model = RateModel::WithOffset;
      } else {
        bad("calibration", "model must be \"origin\" or \"offset\"");
      }
      c.calibration = scan;
    } else {
      c.calibration = units::k_from_MHz_per_mW(cal.number("k_MHz_per_mW"));
      c.sigma_k = units::k_from_MHz_per_mW(cal.number("sigma_k_MHz_per_mW", 0.0));
    }
    cal.finish();
  }
  f.mark("calibration");
  if (f.has("estimation")) {
    Json est = f.raw("estimation");
    if (est.is_object() && est.contains("sigma_freq_hz")) {
      const auto& v = est["sigma_freq_hz"];
      if (!v.is_number()) bad("estimation", "'sigma_freq_hz' must be a number");
      c.sigma_frequency = v.get<double>();
      est.erase("sigma_freq_hz");
    }
    c.estimation = estimation_from_json(est);
  }
  f.mark("estimation");
  if (f.has("uncertainty")) {
    Fields u(f.raw("uncertainty"), "uncertainty");
    c.uncertainty_samples = u.integer("samples", c.uncertainty_samples);
    c.uncertainty_seed = u.integer("seed", c.uncertainty_seed);
    u.finish();
  }
  f.mark("uncertainty");
  f.finish();
  c.validate();
  return c;
}

Json to_json(const FitResult& fit) {
  Json j;
  Json params = Json::array();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    Json p;
    p["name"] = fit.names[i];
    p["value"] = fit.value(i);
    p["sigma"] = fit.sigma(i);
    p["unit"] = i < fit.units.size() ? fit.units[i] : "";
    params.push_back(p);
  }
  j["parameters"] = params;
  Json cov = Json::array();
  for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) row.push_back(fit.covariance(r, c));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  j["chi2"] = fit.residual_norm;
  j["reduced_chi2"] = fit.reduced_chi2();
  j["gradient_norm"] = fit.gradient_norm;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["num_points"] = fit.num_points;
  return j;
}

Json to_json(const CombFit& fit) {
  Json j;
  j["model"] = "comb";
  const Json base = to_json(fit.fit);
  for (const auto& [key, value] : base.items()) j[key] = value;
  const auto& p = fit.params;
  Json readable;
  readable["N1"] = p.N1;
  readable["N2"] = p.N2;
  readable["linewidth_MHz"] = p.linewidth / units::two_pi / units::MHz;
  readable["tau0_ns"] = p.delay / units::ns;
  readable["tau_R_ps"] = p.resolution / units::ps;
  readable["tau_F_ns"] = p.spacing / units::ns;
  readable["peak_g2"] = p.peak_value();
  j["summary"] = readable;
  return j;
}

Json to_json(const RateFit& fit) {
  Json j;
  j["model"] = "rate";
  const Json base = to_json(fit.fit);
  for (const auto& [key, value] : base.items()) j[key] = value;
  j["k_MHz_per_mW"] = units::k_to_MHz_per_mW(fit.k);
  j["sigma_k_MHz_per_mW"] = units::k_to_MHz_per_mW(fit.sigma_k);
  j["offset_per_s"] = fit.offset;
  j["sigma_offset_per_s"] = fit.sigma_offset;
  return j;
}

FitResult fit_result_from_json(const Json& j) {
  try {
    FitResult fit;
    const auto& params = j.at("parameters");
    const auto n = static_cast<Eigen::Index>(params.size());
    fit.values.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = params.at(static_cast<std::size_t>(i));
      fit.names.push_back(p.at("name").get<std::string>());
      fit.units.push_back(p.value("unit", ""));
      fit.values[i] = p.at("value").get<double>();
    }
    const auto& cov = j.at("covariance");
    fit.covariance.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        fit.covariance(r, c) = cov.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<double>();
      }
    }
    fit.residual_norm = j.at("chi2").get<double>();
    fit.gradient_norm = j.at("gradient_norm").get<double>();
    fit.iterations = j.at("iterations").get<int>();
    fit.converged = j.at("converged").get<bool>();
    fit.num_points = j.at("num_points").get<std::size_t>();
    return fit;
  } catch (const nlohmann::json::exception& e) {
    bad("fit", e.what());
  }
}

CombFit comb_fit_from_json(const Json& j) {
  if (!j.is_object() || j.value("model", "") != "comb") bad("fit", "not a comb fit report");
  CombFit out;
  out.fit = fit_result_from_json(j);
  std::array<double, 6> values{};
  for (std::size_t k = 0; k < kCombParameterNames.size(); ++k) {
    const auto i = out.fit.index_of(kCombParameterNames[k]);
    if (!i) bad("fit", std::string("missing parameter ") + kCombParameterNames[k]);
    values[k] = out.fit.value(*i);
  }
  out.params = comb_from_array(values);
  return out;
}

std::string fit_text(const FitResult& fit) {
  std::string out;
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    out += fit.names[i] + " " + format_number(fit.value(i)) + " " + format_number(fit.sigma(i)) + " " +
           (i < fit.units.size() && !fit.units[i].empty() ? fit.units[i] : "1") + "\n";
  }
  return out;
}

Json to_json(const SqueezingEstimate& e) {
  Json j;
  j["r"] = e.r;
  j["sigma_r"] = e.sigma_r;
  j["squeezing_db"] = e.squeezing_db;
  j["sigma_db"] = e.sigma_db;
  j["g2_zero"] = e.inputs.g2zero;
  j["gamma1"] = e.inputs.gamma1;
  j["gamma2"] = e.inputs.gamma2;
  j["k"] = e.inputs.k;
  j["f"] = e.inputs.analysis_frequency;
  j["eta_esc"] = e.inputs.escape_efficiency;
  j["p_th"] = e.inputs.threshold_power;
  j["formula_mode"] = to_string(e.inputs.mode);
  j["v_plus"] = e.v_plus;
  j["v_minus"] = e.v_minus;
  j["pump_W"] = e.pump_power;
  j["length_m"] = e.inputs.length;
  j["conversion_per_W"] = e.inputs.conversion;
  j["eta_esc_source"] = e.inputs.explicit_escape_efficiency ? "explicit" : "gammas";
  j["p_th_source"] = e.inputs.measured_threshold ? "measured" : "losses";
  return j;
}

Json to_json(const Report& rep) {
  Json j = to_json(rep.estimate);

  Json stages;
  const auto& h = rep.histogram;
  Json corr;
  corr["n_a"] = h.n_a;
  corr["n_b"] = h.n_b;
  corr["acquisition_time_s"] = h.acquisition_time;
  corr["bin_width_ps"] = h.bin_width_ps;
  corr["num_bins"] = h.num_bins();
  corr["window_start_ps"] = static_cast<double>(h.window_start_half_ps) / 2.0;
  corr["total_counts"] = h.total_counts();
  stages["correlate"] = corr;
  stages["fit_comb"] = to_json(rep.comb);
  const auto& c = rep.cavity.cavity;
  Json cav = to_json(c);
  cav["sigma_gamma1_per_s"] = rep.cavity.sigma_gamma1;
  cav["sigma_gamma2_per_s"] = rep.cavity.sigma_gamma2;
  cav["sigma_length_m"] = rep.cavity.sigma_length;
  cav["transmission"] = c.transmission;
  cav["extra_loss"] = c.extra_loss;
  cav["finesse"] = c.finesse();
  cav["threshold_W"] = c.threshold_power;
  stages["derive_cavity_rates"] = cav;
  Json cal;
  cal["k_per_s_per_W"] = rep.k;
  cal["sigma_k_per_s_per_W"] = rep.sigma_k;
  cal["k_MHz_per_mW"] = units::k_to_MHz_per_mW(rep.k);
  if (rep.rate_fit) cal["fit_rate_linear"] = to_json(*rep.rate_fit);
  stages["calibration"] = cal;
  stages["g2_at_zero"] = Json{{"value", rep.g2zero.value}, {"sigma", rep.g2zero.sigma}};
  Json unc;
  unc["samples"] = rep.uncertainty.samples;
  unc["failed"] = rep.uncertainty.failed;
  unc["sigma_r"] = rep.uncertainty.sigma_r;
  unc["sigma_db"] = rep.uncertainty.sigma_db;
  stages["propagate_uncertainty"] = unc;
  j["stages"] = stages;

  if (rep.truth) {
    Json t = to_json(*rep.truth);
    if (rep.truth_r) t["r"] = *rep.truth_r;
    j["truth"] = t;
  }
  j["warnings"] = rep.warnings;
  return j;
}

std::string report_text(const Json& j) {
  std::ostringstream out;
  auto line = [&](const char* label, const std::string& value) { out << label << " " << value << "\n"; };
  auto num = [&](const char* key) { return format_number(j.at(key).get<double>()); };
  line("r", num("r") + " +- " + num("sigma_r"));
  line("squeezing_db", num("squeezing_db") + " +- " + num("sigma_db"));
  line("g2_zero", num("g2_zero"));
  line("gamma1", num("gamma1") + " s^-1");
  line("gamma2", num("gamma2") + " s^-1");
  line("k", num("k") + " s^-1 W^-1");
  line("f", num("f") + " Hz");
  line("eta_esc", num("eta_esc"));
  line("p_th", num("p_th") + " W");
  line("formula_mode", j.at("formula_mode").get<std::string>());
  if (j.contains("truth") && j["truth"].contains("r")) line("truth_r", format_number(j["truth"]["r"].get<double>()));
  return out.str();
}

std::vector<std::string> validate_report(const Json& j) {
  std::vector<std::string> problems;
  if (!j.is_object()) return {"report is not an object"};
  static const char* kNumbers[] = {"r", "sigma_r", "squeezing_db", "sigma_db", "g2_zero", "gamma1",
                                   "gamma2", "k", "f", "eta_esc", "p_th"};
  for (const char* key : kNumbers) {
    if (!j.contains(key)) {
      problems.push_back(std::string("missing field '") + key + "'");
    } else if (!j[key].is_number() || !std::isfinite(j[key].get<double>())) {
      problems.push_back(std::string("field '") + key + "' is not a finite number");
    }
  }
  for (const char* key : {"sigma_r", "sigma_db", "gamma1", "k", "f", "p_th"}) {
    if (j.contains(key) && j[key].is_number() && j[key].get<double>() < 0.0) {
      problems.push_back(std::string("field '") + key + "' is negative");
    }
  }
  if (j.contains("g2_zero") && j["g2_zero"].is_number() && !(j["g2_zero"].get<double>() > 2.0)) {
    problems.push_back("g2_zero is not above 2");
  }
  if (j.contains("eta_esc") && j["eta_esc"].is_number()) {
    const double eta = j["eta_esc"].get<double>();
    if (!(eta > 0.0 && eta <= 1.0)) problems.push_back("eta_esc outside (0, 1]");
  }
  if (!j.contains("formula_mode") || !j["formula_mode"].is_string()) {
    problems.push_back("missing string field 'formula_mode'");
  } else {
    const auto mode = j["formula_mode"].get<std::string>();
    if (mode != "chain" && mode != "eq5") problems.push_back("unknown formula_mode '" + mode + "'");
  }
  if (j.contains("stages")) {
    if (!j["stages"].is_object()) {
      problems.push_back("'stages' is not an object");
    } else {
      for (const char* stage : {"correlate", "fit_comb", "derive_cavity_rates", "calibration", "g2_at_zero",
                                "propagate_uncertainty"}) {
        if (!j["stages"].contains(stage)) problems.push_back(std::string("missing stage '") + stage + "'");
      }
    }
  }
  return problems;
}

Json parse_json_file(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace weaksqz
