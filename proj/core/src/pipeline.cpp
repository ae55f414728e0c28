#include "weaksqz/pipeline.hpp"

#include <cmath>

#include "weaksqz/error.hpp"
#include "weaksqz/serialization.hpp"
#include "weaksqz/tag_io.hpp"
#include "weaksqz/units.hpp"

namespace weaksqz {

void PipelineConfig::validate() const {
  auto invalid = [](const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); };
  if (window.bin_width_ps <= 0) invalid("bin width must be positive");
  if (window.num_bins == 0) invalid("need at least one bin");
  if (!(transmission > 0.0 && transmission < 1.0)) invalid("transmission must lie in (0, 1)");
  if (!(conversion > 0.0)) invalid("conversion must be positive");
  if (!(sigma_conversion >= 0.0) || !(sigma_k >= 0.0) || !(sigma_frequency >= 0.0)) {
    invalid("uncertainties must be non-negative");
  }
  if (const auto* k = std::get_if<double>(&calibration); k && !(*k > 0.0)) invalid("k must be positive");
  if (const auto* scan = std::get_if<RateScan>(&calibration);
      scan && !(scan->counting_efficiency > 0.0 && scan->counting_efficiency <= 1.0)) {
    invalid("counting efficiency must lie in (0, 1]");
  }
  if (uncertainty_samples < 1000) invalid("need at least 1000 uncertainty samples");
  if (const auto* sim = std::get_if<SimConfig>(&source)) sim->validate();
  estimation.validate();
}

double truth_squeezing(const SimConfig& sim, const EstimationConfig& config) {
  CavityParams cav = sim.cavity;
  if (config.escape_efficiency) cav = cav.with_escape_efficiency(*config.escape_efficiency);
  if (config.threshold_power) cav = cav.with_threshold(*config.threshold_power);
  const double pump = sim.k > 0.0 ? sim.pair_rate() / sim.k : sim.pump_power;
  return quadrature_variances(cav, pump, AnalysisFrequency{config.analysis_frequency}).r;
}

CavityEstimate cavity_from_comb(const CombFit& comb, double transmission, double conversion) {
  const auto& p = comb.params;
  CavityEstimate out;
  out.cavity = derive_cavity_rates(p.linewidth, p.spacing, transmission, conversion);
  const auto& fit = comb.fit;
  const auto iw = fit.index_of("Omega_c");
  const auto it = fit.index_of("tau_F");
  if (!iw || !it || fit.covariance.rows() != static_cast<Eigen::Index>(fit.names.size())) return out;
  const double var_w = fit.covariance(static_cast<Eigen::Index>(*iw), static_cast<Eigen::Index>(*iw));
  const double var_t = fit.covariance(static_cast<Eigen::Index>(*it), static_cast<Eigen::Index>(*it));
  const double cov_wt = fit.covariance(static_cast<Eigen::Index>(*iw), static_cast<Eigen::Index>(*it));
  // gamma1 = T / tau_F, gamma2 = Omega_c - gamma1, l = c tau_F
  const double d_g1 = -transmission / (p.spacing * p.spacing);
  const double var_g1 = d_g1 * d_g1 * var_t;
  out.sigma_gamma1 = std::sqrt(var_g1);
  out.sigma_gamma2 = std::sqrt(std::max(0.0, var_w + var_g1 - 2.0 * d_g1 * cov_wt));
  out.sigma_length = units::speed_of_light * std::sqrt(std::max(0.0, var_t));
  return out;
}

namespace {

template <typename F>
auto stage(const char* name, F&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

struct Streams {
  TimeTagStream a;
  TimeTagStream b;
};

}  // namespace

Report run_pipeline(const PipelineConfig& config) {
  stage("config", [&] {
    config.validate();
    return 0;
  });
  Report rep;

  Streams streams;
  if (const auto* sim = std::get_if<SimConfig>(&config.source)) {
    streams = stage("simulate", [&] {
      auto result = simulate(*sim);
      rep.truth = result.truth;
      rep.truth_r = truth_squeezing(*sim, config.estimation);
      for (auto& w : result.warnings) rep.warnings.push_back("simulate: " + w);
      return Streams{std::move(result.a), std::move(result.b)};
    });
  } else {
    const auto& src = std::get<TagSource>(config.source);
    streams = stage("read_tags", [&] {
      auto file = read_tags(src.path);
      for (auto ch : {src.channel_a, src.channel_b}) {
        if (ch >= file.channels.size()) {
          throw Error(ErrorCode::BadFormat, "file has no channel " + std::to_string(ch));
        }
      }
      if (file.truth) {
        try {
          rep.truth = truth_from_json(Json::parse(*file.truth));
        } catch (const nlohmann::json::exception&) {
          rep.warnings.push_back("read_tags: truth record is not valid JSON; ignored");
        }
      }
      return Streams{std::move(file.channels[src.channel_a]), std::move(file.channels[src.channel_b])};
    });
  }

  rep.histogram = stage("correlate", [&] { return correlate(streams.a, streams.b, config.window, config.threads); });
  streams = {};
  rep.histogram = stage("normalize", [&] { return normalize(std::move(rep.histogram), config.normalization); });

  rep.comb = stage("fit_comb", [&] { return fit_comb(rep.histogram); });
  if (!rep.comb.fit.converged) rep.warnings.push_back("fit_comb: iteration limit reached");

  rep.cavity = stage("derive_cavity_rates",
                     [&] { return cavity_from_comb(rep.comb, config.transmission, config.conversion); });

  if (const auto* scan = std::get_if<RateScan>(&config.calibration)) {
    stage("fit_rate_linear", [&] {
      const auto points = read_rate_csv(scan->path);
      rep.rate_fit = fit_rate_linear(points, scan->counting_efficiency, scan->model);
      rep.k = rep.rate_fit->k;
      rep.sigma_k = rep.rate_fit->sigma_k;
      return 0;
    });
  } else {
    rep.k = std::get<double>(config.calibration);
    rep.sigma_k = config.sigma_k;
  }

  rep.g2zero = stage("g2_at_zero", [&] { return g2_at_zero(rep.histogram, rep.comb.estimate()); });
  rep.estimate = stage("estimate_squeezing", [&] {
    return estimate_squeezing(rep.g2zero.value, rep.cavity.cavity, rep.k, config.estimation);
  });

  rep.uncertainty = stage("propagate_uncertainty", [&] {
    UncertainInputs in;
    in.g2zero = {rep.g2zero.value, rep.g2zero.sigma};
    const auto& cav = rep.cavity;
    in.gamma1 = {cav.cavity.gamma1, cav.sigma_gamma1};
    in.gamma2 = {cav.cavity.gamma2, cav.sigma_gamma2};
    in.length = {cav.cavity.length, cav.sigma_length};
    in.conversion = {config.conversion, config.sigma_conversion};
    in.k = {rep.k, rep.sigma_k};
    in.analysis_frequency = {config.estimation.analysis_frequency, config.sigma_frequency};
    return propagate_uncertainty(in, config.estimation, config.uncertainty_samples, config.uncertainty_seed,
                                 config.threads);
  });
  rep.estimate.sigma_r = rep.uncertainty.sigma_r;
  rep.estimate.sigma_db = rep.uncertainty.sigma_db;
  return rep;
}

}  // namespace weaksqz
