#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "weaksqz/error.hpp"
#include "weaksqz/opo_model.hpp"
#include "weaksqz/rng.hpp"

using namespace weaksqz;
using doctest::Approx;

namespace {

// Independent evaluation of the below-threshold variances.
std::pair<double, double> variances_oracle(double p, double p_th, double eta, double f, double linewidth) {
  const double x = std::sqrt(p / p_th);
  const double w = units::two_pi * f / linewidth;
  const double vp = 1.0 + 4.0 * eta * x / ((1.0 - x) * (1.0 - x) + 4.0 * w * w);
  const double vm = 1.0 - 4.0 * eta * x / ((1.0 + x) * (1.0 + x) + 4.0 * w * w);
  return {vm, vp};
}

// Every comb term summed, no truncation.
double comb_brute_force(const CombModelParams& p, double tau, long n_max) {
  const double a = 2.0 * std::log(2.0) / p.resolution;
  const double u = tau - p.delay;
  double sum = 0.0;
  for (long n = -n_max; n <= n_max; ++n) {
    const double d = std::abs(u - static_cast<double>(n) * p.spacing);
    sum += (1.0 + a * d) * std::exp(-a * d);
  }
  return p.N1 * (p.N2 + std::exp(-p.linewidth * std::abs(u)) * sum);
}

}  // namespace

TEST_CASE("threshold from round-trip losses") {
  CHECK(threshold_power(0.11, 0.005, 0.02) == Approx(0.1653125).epsilon(1e-12));
  CHECK(threshold_power(0.1202, 0.0, 0.02) == Approx(0.1806005).epsilon(1e-12));
  CHECK(threshold_power(0.0, 0.0, 0.02) == 0.0);
  CHECK_THROWS_AS(threshold_power(0.6, 0.5, 0.02), Error);
  try {
    threshold_power(0.11, 0.005, 0.0);
    FAIL("expected ZeroConversion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroConversion);
  }
}

TEST_CASE("cavity rates from the comb linewidth and spacing") {
  const auto c = derive_cavity_rates(units::two_pi * 14.16e6, 1.34e-9, 0.11, 0.02);
  CHECK(c.gamma1 == Approx(0.11 / 1.34e-9).epsilon(1e-12));
  CHECK(c.gamma1 == Approx(82.1e6).epsilon(5e-3));
  CHECK(c.gamma2 == Approx(units::two_pi * 14.16e6 - 0.11 / 1.34e-9).epsilon(1e-9));
  CHECK(c.gamma2 == Approx(6.88e6).epsilon(1e-2));
  CHECK(c.length == Approx(0.40172).epsilon(1e-4));
  CHECK(c.transmission == Approx(0.11).epsilon(1e-12));
  CHECK(c.extra_loss + c.transmission == Approx(units::two_pi * 14.16e6 * 1.34e-9).epsilon(1e-12));

  try {
    derive_cavity_rates(0.5 * 0.11 / 1.34e-9, 1.34e-9, 0.11, 0.02);
    FAIL("expected NonPositiveLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPositiveLoss);
  }
  try {
    derive_cavity_rates(1e8, 1.34e-9, 1.2, 0.02);
    FAIL("expected InvalidFraction");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidFraction);
  }
}

TEST_CASE("cavity derived quantities") {
  const auto c = test::reference_cavity();
  CHECK(c.linewidth() == Approx(89e6));
  CHECK(c.round_trip_time == Approx(0.4017 / units::speed_of_light).epsilon(1e-14));
  CHECK(c.escape_efficiency == Approx(82.1 / 89.0).epsilon(1e-14));
  CHECK(c.finesse() == Approx(units::two_pi / (c.transmission + c.extra_loss)).epsilon(1e-12));
  CHECK(c.finesse_lossless() == Approx(units::two_pi / c.transmission).epsilon(1e-12));
  CHECK(c.threshold_power == Approx(std::pow(c.transmission + c.extra_loss, 2) / 0.08).epsilon(1e-12));

  const auto d = c.with_escape_efficiency(0.7).with_threshold(0.1653);
  CHECK(d.escape_efficiency == 0.7);
  CHECK(d.explicit_escape_efficiency);
  CHECK(d.threshold_power == 0.1653);
  CHECK(d.measured_threshold);
  CHECK(d.gamma1 == c.gamma1);
  CHECK_THROWS_AS(c.with_escape_efficiency(1.5), Error);
}

TEST_CASE("g2(0) against pump power") {
  const auto c = test::reference_cavity();
  const PumpCalibration cal{1.045e11};
  const double expected[][2] = {{5e-6, 80.56459330143541}, {30e-6, 15.094098883572568}, {200e-6, 3.9641148325358853}};
  for (const auto& [p, g] : expected) {
    const double oracle = 2.0 + 82.1e6 / (2.0 * 1.045e11 * p);
    CHECK(g2zero_from_pump(c, cal, p) == Approx(oracle).epsilon(1e-10));
    CHECK(oracle == Approx(g).epsilon(1e-13));
    CHECK(pump_from_g2zero(c, cal, oracle) == Approx(p).epsilon(1e-12));
  }
  CHECK(g2zero_from_pump(c, cal, 5e-6) == Approx(80.56).epsilon(1e-4));
  CHECK(g2zero_from_pump(c, cal, 30e-6) == Approx(15.09).epsilon(1e-3));
  CHECK(g2zero_from_pump(c, cal, 200e-6) == Approx(3.964).epsilon(1e-4));

  try {
    g2zero_from_pump(c, cal, 0.0);
    FAIL("expected ZeroPump");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroPump);
  }
  try {
    pump_from_g2zero(c, cal, 1.9);
    FAIL("expected SubThermalG2");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SubThermalG2);
  }
}

TEST_CASE("g2(0) decreases strictly with pump power") {
  const auto c = test::reference_cavity();
  const PumpCalibration cal{1.045e11};
  auto g = rng::make_engine(11, 1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double p1 = 1e-7 + 1e-3 * rng::uniform01(g);
    const double p2 = p1 * (1.0 + 1e-3 + rng::uniform01(g));
    CHECK(g2zero_from_pump(c, cal, p2) < g2zero_from_pump(c, cal, p1));
  }
}

TEST_CASE("parametric gain and down-conversion rate") {
  const auto c = CavityParams::from_rates(82.1e6, 6.9e6, 0.4017, 0.02);
  CHECK(epsilon_rate_from_g2zero(c, 15.09) == Approx(89e6 / std::sqrt(13.09)).epsilon(1e-12));
  CHECK(epsilon_rate_from_g2zero(c, 15.09) == Approx(2.460e7).epsilon(1e-3));

  // 2 eps^2 gamma1 / (tau_F^2 (gamma1+gamma2)^2) with tau_F = 1.35 ns
  const double tau = 1.35e-9;
  const auto c2 = CavityParams::from_rates(82.1e6, 6.9e6, tau * units::speed_of_light, 0.02);
  const double eps = std::sqrt(6e-7);
  const double oracle = 2.0 * 6e-7 * 82.1e6 / (tau * tau * 89e6 * 89e6);
  CHECK(downconversion_rate_from_epsilon(c2, eps) == Approx(oracle).epsilon(1e-10));
  CHECK(downconversion_rate_from_epsilon(c2, eps) == Approx(6.82e3).epsilon(2e-3));
  CHECK(downconversion_rate_from_epsilon(c2, eps, 4.0) == Approx(4.0 * oracle).epsilon(1e-10));
}

TEST_CASE("quadrature variances at the 5 uW working point") {
  const auto c = test::reference_cavity().with_escape_efficiency(0.7).with_threshold(0.1653);
  const auto v = quadrature_variances(c, 5e-6, AnalysisFrequency{800e3});
  const auto [vm, vp] = variances_oracle(5e-6, 0.1653, 0.7, 800e3, 89e6);
  CHECK(v.v_minus == Approx(vm).epsilon(1e-13));
  CHECK(v.v_plus == Approx(vp).epsilon(1e-13));
  CHECK(v.v_plus == Approx(1.015372).epsilon(2e-6));
  CHECK(v.v_minus == Approx(0.98496).epsilon(5e-6));
  CHECK(v.r == Approx(0.00763).epsilon(1e-3));
  CHECK(to_decibel(std::exp(-2.0 * v.r)) == Approx(-0.0662).epsilon(2e-3));
  CHECK(to_decibel(0.98496) == Approx(-0.06582).epsilon(1e-3));

  try {
    quadrature_variances(c, 0.2, AnalysisFrequency{800e3});
    FAIL("expected AboveThreshold");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AboveThreshold);
  }
}

TEST_CASE("uncertainty product is one for a lossless cavity at zero frequency") {
  const auto c = test::reference_cavity().with_escape_efficiency(1.0);
  auto g = rng::make_engine(3, 2, 0);
  for (int i = 0; i < 10000; ++i) {
    const double p = c.threshold_power * 0.999 * rng::uniform01(g);
    const auto v = quadrature_variances(c, p, AnalysisFrequency{0.0});
    REQUIRE(std::abs(v.v_plus * v.v_minus - 1.0) < 1e-10);
  }
}

TEST_CASE("homodyne detection scales the excess noise") {
  const auto c = test::reference_cavity().with_threshold(0.1653);
  const DetectionEfficiencyHD hd{0.95, 0.97, 0.99};
  CHECK(hd.total() == Approx(0.95 * 0.97 * 0.97 * 0.99).epsilon(1e-14));
  const auto v = detected_variances(c, 50e-3, AnalysisFrequency{800e3}, hd, 0.7);
  const auto [vm, vp] = variances_oracle(50e-3, 0.1653, 0.7 * hd.total(), 800e3, 89e6);
  CHECK(v.v_minus == Approx(vm).epsilon(1e-13));
  CHECK(v.v_plus == Approx(vp).epsilon(1e-13));
  CHECK_THROWS_AS(detected_variances(c, 50e-3, AnalysisFrequency{800e3}, {1.2, 1.0, 1.0}, 0.7), Error);
}

TEST_CASE("comb model") {
  const auto p = test::reference_comb();
  CHECK(default_comb_terms(p) == 174);
  CHECK(p.kernel_rate() == Approx(2.0 * std::log(2.0) / 185e-12).epsilon(1e-14));
  CHECK(p.peak_value() == Approx(17.024).epsilon(1e-12));

  const double at_delay = comb_model_eval(p, p.delay);
  CHECK(at_delay == Approx(comb_brute_force(p, p.delay, 174)).epsilon(1e-12));
  CHECK(at_delay == Approx(17.039).epsilon(1e-4));
  CHECK(std::abs(at_delay - 17.024) < 0.02);

  for (double tau : {-70e-9, -10e-9, -1.6e-9, -0.3e-9, 0.0, 0.37e-9, 2.2e-9, 55e-9}) {
    CHECK(comb_model_eval(p, tau) == Approx(comb_brute_force(p, tau, 174)).epsilon(1e-12));
  }
  // Far from tau_0 the comb decays to the N1 N2 floor.
  CHECK(comb_model_eval(p, p.delay + 1e-6) == Approx(p.N1 * p.N2).epsilon(1e-9));
  // Symmetric about tau_0.
  CHECK(comb_model_eval(p, p.delay + 0.77e-9) == Approx(comb_model_eval(p, p.delay - 0.77e-9)).epsilon(1e-12));
}
