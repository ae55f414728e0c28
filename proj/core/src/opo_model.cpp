#include "weaksqz/opo_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "weaksqz/error.hpp"
#include "weaksqz/units.hpp"

namespace weaksqz {

namespace {

void require_fraction(double v, const char* name, bool allow_one = true) {
  const bool ok = v > 0.0 && (allow_one ? v <= 1.0 : v < 1.0);
  if (!ok || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidFraction, std::string(name) + " = " + std::to_string(v));
  }
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidParameter, std::string(name) + " must be positive");
  }
}

void require_sub_thermal_ok(double g2zero) {
  if (!(g2zero > 2.0)) {
    throw Error(ErrorCode::SubThermalG2,
                "g2(0) = " + std::to_string(g2zero) + " is not above the thermal value 2");
  }
}

// V(+/-) = 1 +/- eta * 4x / ((1 -/+ x)^2 + 4 Omega^2), x = sqrt(P/P_th)
QuadratureVariances variances(double pump_power, double threshold, double omega, double eta) {
  if (pump_power < 0.0 || !std::isfinite(pump_power)) {
    throw Error(ErrorCode::InvalidParameter, "pump power must be non-negative");
  }
  if (pump_power >= threshold) {
    throw Error(ErrorCode::AboveThreshold, "P = " + std::to_string(pump_power) +
                                               " W is not below P_th = " + std::to_string(threshold) +
                                               " W");
  }
  const double x = std::sqrt(pump_power / threshold);
  const double w = 4.0 * omega * omega;
  const double below = (1.0 - x) * (1.0 - x) + w;
  const double above = (1.0 + x) * (1.0 + x) + w;
  QuadratureVariances v;
  v.v_plus = (below + 4.0 * eta * x) / below;
  // (1+x)^2 - 4 eta x rewritten without cancellation near threshold
  v.v_minus = (below + 4.0 * (1.0 - eta) * x) / above;
  v.r = 0.5 * std::log(v.v_plus);
  return v;
}

}  // namespace

CavityParams CavityParams::from_rates(double gamma1, double gamma2, double length,
                                      double conversion) {
  require_positive(gamma1, "gamma1");
  if (gamma2 < 0.0 || !std::isfinite(gamma2)) {
    throw Error(ErrorCode::NonPositiveLoss, "gamma2 must be non-negative");
  }
  require_positive(length, "round-trip length");
  if (!(conversion > 0.0)) {
    throw Error(ErrorCode::ZeroConversion, "E_NL must be positive");
  }
  CavityParams c;
  c.gamma1 = gamma1;
  c.gamma2 = gamma2;
  c.length = length;
  c.round_trip_time = length / units::speed_of_light;
  c.transmission = gamma1 * c.round_trip_time;
  c.extra_loss = gamma2 * c.round_trip_time;
  c.conversion = conversion;
  c.escape_efficiency = gamma1 / (gamma1 + gamma2);
  c.threshold_power = weaksqz::threshold_power(c.transmission, c.extra_loss, conversion);
  return c;
}

CavityParams CavityParams::with_escape_efficiency(double eta) const {
  require_fraction(eta, "eta_esc");
  CavityParams c = *this;
  c.escape_efficiency = eta;
  c.explicit_escape_efficiency = true;
  return c;
}

CavityParams CavityParams::with_threshold(double watts) const {
  require_positive(watts, "P_th");
  CavityParams c = *this;
  c.threshold_power = watts;
  c.measured_threshold = true;
  return c;
}

double CavityParams::finesse() const { return units::two_pi / (round_trip_time * linewidth()); }

double CavityParams::finesse_lossless() const {
  return units::two_pi / (round_trip_time * gamma1);
}

CavityParams derive_cavity_rates(double linewidth, double round_trip_time, double transmission,
                                 double conversion) {
  require_fraction(transmission, "T", false);
  require_positive(round_trip_time, "tau_F");
  const double gamma1 = transmission / round_trip_time;
  if (!(linewidth > gamma1)) {
    throw Error(ErrorCode::NonPositiveLoss,
                "Omega_c = " + std::to_string(linewidth) + " s^-1 does not exceed T/tau_F = " +
                    std::to_string(gamma1) + " s^-1");
  }
  return CavityParams::from_rates(gamma1, linewidth - gamma1,
                                  units::speed_of_light * round_trip_time, conversion);
}

double threshold_power(double transmission, double extra_loss, double conversion) {
  if (!(conversion > 0.0)) {
    throw Error(ErrorCode::ZeroConversion, "E_NL must be positive");
  }
  const double total = transmission + extra_loss;
  if (transmission < 0.0 || extra_loss < 0.0 || !(total < 1.0)) {
    throw Error(ErrorCode::InvalidFraction, "round-trip losses must lie in [0, 1)");
  }
  return total * total / (4.0 * conversion);
}

void PumpCalibration::validate() const {
  require_positive(k, "k");
  require_fraction(transmittance, "t");
  require_fraction(fiber_coupling, "f");
  require_fraction(detector_efficiency, "d");
}

double AnalysisFrequency::normalized(const CavityParams& cavity) const {
  return units::two_pi * f / cavity.linewidth();
}

void DetectionEfficiencyHD::validate() const {
  require_fraction(propagation, "eta_tr");
  require_fraction(visibility, "eta_vis");
  require_fraction(quantum, "eta_qu");
}

void CombModelParams::validate() const {
  if (!(N1 > 0.0) || !(N2 >= 0.0) || !(linewidth > 0.0) || !(resolution > 0.0) ||
      !(spacing > 0.0) || !std::isfinite(delay)) {
    throw Error(ErrorCode::InvalidParameter, "comb parameters out of range");
  }
}

double CombModelParams::kernel_rate() const { return 2.0 * units::ln2 / resolution; }

double g2zero_from_pump(const CavityParams& cavity, const PumpCalibration& cal,
                        double pump_power) {
  if (!(pump_power > 0.0)) {
    throw Error(ErrorCode::ZeroPump, "pump power must be positive");
  }
  require_positive(cal.k, "k");
  const double F = cavity.finesse();
  const double F0 = cavity.finesse_lossless();
  const double tau = cavity.round_trip_time;
  const double omega = cavity.linewidth();
  return 2.0 + omega * omega * tau * F * F / (4.0 * units::pi * F0 * cal.k * pump_power);
}

double pump_from_g2zero(const CavityParams& cavity, const PumpCalibration& cal, double g2zero) {
  require_sub_thermal_ok(g2zero);
  require_positive(cal.k, "k");
  return cavity.gamma1 / (2.0 * cal.k * (g2zero - 2.0));
}

double epsilon_rate_from_g2zero(const CavityParams& cavity, double g2zero) {
  require_sub_thermal_ok(g2zero);
  return cavity.linewidth() / std::sqrt(g2zero - 2.0);
}

double downconversion_rate_from_epsilon(const CavityParams& cavity, double epsilon,
                                        double convention) {
  if (epsilon < 0.0) {
    throw Error(ErrorCode::InvalidParameter, "epsilon must be non-negative");
  }
  const double F = cavity.finesse();
  const double F0 = cavity.finesse_lossless();
  return convention * epsilon * epsilon * F * F / (units::pi * F0 * cavity.round_trip_time);
}

QuadratureVariances quadrature_variances(const CavityParams& cavity, double pump_power,
                                         const AnalysisFrequency& freq,
                                         std::optional<double> escape_efficiency) {
  const double eta = escape_efficiency.value_or(cavity.escape_efficiency);
  require_fraction(eta, "eta_esc");
  return variances(pump_power, cavity.threshold_power, freq.normalized(cavity), eta);
}

QuadratureVariances detected_variances(const CavityParams& cavity, double pump_power,
                                       const AnalysisFrequency& freq,
                                       const DetectionEfficiencyHD& detection,
                                       double escape_efficiency) {
  detection.validate();
  require_fraction(escape_efficiency, "eta_esc");
  return variances(pump_power, cavity.threshold_power, freq.normalized(cavity),
                   detection.total() * escape_efficiency);
}

std::size_t default_comb_terms(const CombModelParams& params) {
  const double x = params.linewidth * params.spacing;
  return static_cast<std::size_t>(std::ceil(9.0 * std::log(10.0) / x));
}

double comb_model_eval(const CombModelParams& params, double tau, std::optional<std::size_t> n_max) {
  const auto terms = static_cast<long long>(n_max.value_or(default_comb_terms(params)));
  const double a = params.kernel_rate();
  const double u = tau - params.delay;
  // Terms beyond a*d = 60 are below 1e-24 and are skipped; d grows monotonically
  // away from the nearest peak so the walk can stop there.
  constexpr double cutoff = 60.0;
  const auto nearest =
      std::clamp(static_cast<long long>(std::llround(u / params.spacing)), -terms, terms);
  double sum = 0.0;
  for (long long n = nearest; n <= terms; ++n) {
    const double ad = a * std::abs(u - static_cast<double>(n) * params.spacing);
    if (ad > cutoff) break;
    sum += (1.0 + ad) * std::exp(-ad);
  }
  for (long long n = nearest - 1; n >= -terms; --n) {
    const double ad = a * std::abs(u - static_cast<double>(n) * params.spacing);
    if (ad > cutoff) break;
    sum += (1.0 + ad) * std::exp(-ad);
  }
  return params.N1 * (params.N2 + std::exp(-params.linewidth * std::abs(u)) * sum);
}

double to_decibel(double variance) {
  if (!(variance > 0.0)) {
    throw Error(ErrorCode::NonPositiveVariance, "variance must be positive");
  }
  return 10.0 * std::log10(variance);
}

}  // namespace weaksqz
