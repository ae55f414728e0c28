#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "weaksqz/opo_model.hpp"
#include "weaksqz/time_tags.hpp"

namespace weaksqz {

/// Single-photon detector. Jitter is two-sided exponential (Laplace) with the
/// given FWHM; the dead time is non-paralyzable.
struct DetectorModel {
  double efficiency = 1.0;
  double dark_rate = 0.0;    ///< s^-1
  double dead_time = 0.0;    ///< s
  double jitter_fwhm = 0.0;  ///< s

  void validate() const;
};

struct SimConfig {
  CavityParams cavity;
  double pump_power = 0.0;  ///< W
  /// R = k P unless `explicit_pair_rate` is set.
  double k = 0.0;
  std::optional<double> explicit_pair_rate;
  double duration = 1.0;  ///< s
  double splitter_ratio = 0.5;
  DetectorModel detector_a;
  DetectorModel detector_b;
  /// Constant electronic delay added to channel B (tau_0).
  double channel_b_delay = -0.98e-9;
  std::uint64_t seed = 1;
  /// Worker threads; results do not depend on this.
  unsigned threads = 0;

  double pair_rate() const;
  void validate() const;
};

/// Ground truth behind a simulated run.
struct TruthRecord {
  double pair_rate = 0.0;
  double pump_power = 0.0;
  double k = 0.0;
  double mode_ratio = 0.0;  ///< q = exp(-Omega_c tau_F)
  double linewidth = 0.0;
  double round_trip_time = 0.0;
  double delay = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double transmission = 0.0;
  /// 2 + gamma1 / (2 R): the closed-form g2(0) of the source.
  double expected_g2zero = 0.0;
  /// g2 at tau_0 produced by the pair model with the configured jitter
  /// (absent when both detectors have zero jitter).
  std::optional<double> expected_peak_g2;
  double efficiency_a = 0.0;
  double efficiency_b = 0.0;
  double duration = 0.0;
  std::uint64_t seed = 0;
};

struct SimResult {
  TimeTagStream a;
  TimeTagStream b;
  TruthRecord truth;
  std::vector<std::string> warnings;
};

/// Poissonian pair source with comb-distributed intra-pair delay, a beam
/// splitter and two imperfect detectors. Deterministic in config.seed.
SimResult simulate(const SimConfig& config);

/// thinning -> jitter -> dark counts -> sort -> dead-time pruning.
TimeTagStream apply_detector(const TimeTagStream& ideal, const DetectorModel& detector,
                             std::uint64_t seed);

/// Probability of intra-pair mode offset n: (1-q)/(1+q) q^|n|.
double mode_offset_probability(double q, long long n);

/// Pair-model g2 at tau_0 for detectors with the given jitter FWHMs.
std::optional<double> pair_model_peak_g2(double pair_rate, double q, double round_trip_time,
                                         double jitter_a, double jitter_b);

/// Per-detector jitter FWHM for which the simulated n = 0 peak height equals
/// the closed-form 1 + gamma1/(2R) excess in the weak-pump limit.
double matched_jitter_fwhm(const CavityParams& cavity);

}  // namespace weaksqz
