#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "weaksqz/correlator.hpp"
#include "weaksqz/estimator.hpp"
#include "weaksqz/fitters.hpp"
#include "weaksqz/stream_sim.hpp"

namespace weaksqz {

/// Recorded tags: one SQZT (or CSV) file and the two channels to correlate.
struct TagSource {
  std::filesystem::path path;
  std::uint8_t channel_a = 0;
  std::uint8_t channel_b = 1;
};

/// k from a rate scan instead of a fixed value.
struct RateScan {
  std::filesystem::path path;  ///< CSV P_mW,R_meas,sigma
  double counting_efficiency = 0.404;
  RateModel model = RateModel::ThroughOrigin;
};

struct PipelineConfig {
  std::variant<SimConfig, TagSource> source;
  CorrelationWindow window{35, 4000, -980};
  NormalizationMode normalization = NormalizationMode::Singles;
  unsigned threads = 1;

  /// Output-coupler transmission and crystal conversion: not measurable from g2.
  double transmission = 0.11;
  double conversion = 0.02;  ///< W^-1
  double sigma_conversion = 0.0;

  /// Either a fixed k (s^-1 W^-1) with its sigma, or a rate scan.
  std::variant<double, RateScan> calibration = 1.045e11;
  double sigma_k = 0.0;

  EstimationConfig estimation;
  double sigma_frequency = 0.0;

  std::size_t uncertainty_samples = 2000;
  std::uint64_t uncertainty_seed = 1;

  void validate() const;
};

/// Cavity rates from a comb fit, with first-order uncertainties from the fit
/// covariance of (Omega_c, tau_F).
struct CavityEstimate {
  CavityParams cavity;
  double sigma_gamma1 = 0.0;
  double sigma_gamma2 = 0.0;
  double sigma_length = 0.0;
};

CavityEstimate cavity_from_comb(const CombFit& comb, double transmission, double conversion);

/// Everything the pipeline computed, stage by stage.
struct Report {
  // correlate / normalize
  CorrelationHistogram histogram;
  // fit_comb
  CombFit comb;
  // derive_cavity_rates
  CavityEstimate cavity;
  // calibration
  double k = 0.0;
  double sigma_k = 0.0;
  std::optional<RateFit> rate_fit;
  // g2_at_zero
  G2Value g2zero;
  // estimate_squeezing + propagate_uncertainty
  SqueezingEstimate estimate;
  PropagatedUncertainty uncertainty;
  // simulated source only
  std::optional<TruthRecord> truth;
  std::optional<double> truth_r;
  std::vector<std::string> warnings;
};

/// correlate -> normalize -> fit_comb -> derive_cavity_rates -> [fit_rate_linear]
/// -> g2_at_zero -> estimate_squeezing -> propagate_uncertainty.
/// The first failing stage is rethrown as StageError. Deterministic.
Report run_pipeline(const PipelineConfig& config);

/// Squeezing parameter of the source a simulation was configured with, using
/// the estimation settings of `config`.
double truth_squeezing(const SimConfig& sim, const EstimationConfig& config);

}  // namespace weaksqz
