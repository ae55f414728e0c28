#pragma once

#include <cstddef>
#include <optional>

namespace weaksqz {

/// Below-threshold OPO cavity. Rates are angular (s^-1), the length is the
/// optical round-trip path, the fractions are per round trip.
///
/// Built either from the decay rates (`from_rates`) or from a comb fit
/// (`derive_cavity_rates`). In both cases T, L, eta_esc and P_th are derived;
/// the escape efficiency and the threshold can afterwards be replaced by
/// explicitly measured values.
struct CavityParams {
  double gamma1 = 0.0;           ///< output-coupling rate, s^-1
  double gamma2 = 0.0;           ///< extra-loss rate, s^-1
  double length = 0.0;           ///< round-trip length l, m
  double round_trip_time = 0.0;  ///< tau_F = l / c, s
  double transmission = 0.0;     ///< T = gamma1 * tau_F
  double extra_loss = 0.0;       ///< L = gamma2 * tau_F
  double conversion = 0.0;       ///< single-pass conversion E_NL, W^-1
  double escape_efficiency = 0.0;
  double threshold_power = 0.0;  ///< W
  bool explicit_escape_efficiency = false;
  bool measured_threshold = false;

  static CavityParams from_rates(double gamma1, double gamma2, double length, double conversion);

  /// Returns a copy with eta_esc fixed to `eta` instead of gamma1/(gamma1+gamma2).
  CavityParams with_escape_efficiency(double eta) const;
  /// Returns a copy with P_th fixed to a measured value instead of (T+L)^2/(4 E_NL).
  CavityParams with_threshold(double watts) const;

  /// Omega_c = gamma1 + gamma2.
  double linewidth() const { return gamma1 + gamma2; }
  /// Cavity finesse with and without the extra loss.
  double finesse() const;
  double finesse_lossless() const;
};

/// Cavity parameters from a comb fit: Omega_c and tau_F from the g2 comb,
/// T from the coupler specification.
CavityParams derive_cavity_rates(double linewidth, double round_trip_time, double transmission,
                                 double conversion);

/// P_th = (T+L)^2 / (4 E_NL).
double threshold_power(double transmission, double extra_loss, double conversion);

/// R = k P calibration plus the counting-path efficiency eta = t f d.
struct PumpCalibration {
  double k = 0.0;  ///< s^-1 W^-1
  double transmittance = 1.0;
  double fiber_coupling = 1.0;
  double detector_efficiency = 1.0;

  double counting_efficiency() const { return transmittance * fiber_coupling * detector_efficiency; }
  double pair_rate(double pump_power) const { return k * pump_power; }
  void validate() const;
};

/// Sideband analysis frequency; the normalized Omega is always derived.
struct AnalysisFrequency {
  double f = 0.0;  ///< Hz

  double normalized(const CavityParams& cavity) const;
};

/// Homodyne detection efficiency eta_det = eta_tr * eta_vis^2 * eta_qu.
struct DetectionEfficiencyHD {
  double propagation = 1.0;
  double visibility = 1.0;
  double quantum = 1.0;

  double total() const { return propagation * visibility * visibility * quantum; }
  void validate() const;
};

/// Parameters of the comb-shaped g2(tau) model.
struct CombModelParams {
  double N1 = 1.0;
  double N2 = 0.0;
  double linewidth = 1.0;   ///< Omega_c, s^-1
  double delay = 0.0;       ///< tau_0, s
  double resolution = 1.0;  ///< tau_R, s
  double spacing = 1.0;     ///< tau_F, s

  void validate() const;
  /// Kernel rate a = 2 ln2 / tau_R.
  double kernel_rate() const;
  /// N1 * (N2 + 1): the n = 0 peak value at tau_0.
  double peak_value() const { return N1 * (N2 + 1.0); }
};

struct QuadratureVariances {
  double v_minus = 1.0;
  double v_plus = 1.0;
  double r = 0.0;
};

/// g2(0) = 2 + (g1+g2)^2 tau_F F^2 / (4 pi F0 k P), which reduces to 2 + gamma1/(2 k P).
double g2zero_from_pump(const CavityParams& cavity, const PumpCalibration& cal, double pump_power);
double pump_from_g2zero(const CavityParams& cavity, const PumpCalibration& cal, double g2zero);

/// Continuous-time parametric gain (s^-1) that reproduces g2zero.
double epsilon_rate_from_g2zero(const CavityParams& cavity, double g2zero);

/// Pair rate from the dimensionless single-pass gain,
/// R = convention * eps^2 F^2 / (pi F0 tau_F).
double downconversion_rate_from_epsilon(const CavityParams& cavity, double epsilon,
                                        double convention = 1.0);

/// Output quadrature variances below threshold; r = 0.5 ln V+.
QuadratureVariances quadrature_variances(const CavityParams& cavity, double pump_power,
                                         const AnalysisFrequency& freq,
                                         std::optional<double> escape_efficiency = std::nullopt);

/// Variances seen by a homodyne detector of efficiency eta_det.
QuadratureVariances detected_variances(const CavityParams& cavity, double pump_power,
                                       const AnalysisFrequency& freq,
                                       const DetectionEfficiencyHD& detection,
                                       double escape_efficiency);

/// Number of side peaks summed on each side so that the dropped envelope is below 1e-9.
std::size_t default_comb_terms(const CombModelParams& params);

/// Comb g2(tau). `n_max` defaults to default_comb_terms(params).
double comb_model_eval(const CombModelParams& params, double tau,
                       std::optional<std::size_t> n_max = std::nullopt);

double to_decibel(double variance);

}  // namespace weaksqz
