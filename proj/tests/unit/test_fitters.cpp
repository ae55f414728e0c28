#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "test_support.hpp"
#include "weaksqz/fitters.hpp"

using namespace weaksqz;
using doctest::Approx;

namespace {

CurveModel line_model() {
  CurveModel m;
  m.names = {"slope", "offset"};
  m.units = {"", ""};
  m.positive = {false, false};
  m.scale = {1.0, 1.0};
  m.value = [](double x, std::span<const double> p) { return p[0] * x + p[1]; };
  return m;
}

CurveModel decay_model() {
  CurveModel m;
  m.names = {"amplitude", "rate"};
  m.units = {"", "s^-1"};
  m.positive = {true, true};
  m.scale = {1.0, 1.0};
  m.value = [](double x, std::span<const double> p) { return p[0] * std::exp(-p[1] * x); };
  return m;
}

// Largest relative deviation of an analytic gradient from central differences,
// relative to the component itself or, for near-zero components, to the
// largest magnitude that component takes over the sampled points.
template <typename Eval>
double worst_jacobian_error(Eval&& eval, std::vector<double> p, const std::vector<double>& xs,
                            const std::vector<double>& analytic_rows, std::size_t np) {
  std::vector<double> col_max(np, 0.0);
  for (std::size_t r = 0; r < xs.size(); ++r) {
    for (std::size_t k = 0; k < np; ++k) col_max[k] = std::max(col_max[k], std::abs(analytic_rows[r * np + k]));
  }
  double worst = 0.0;
  for (std::size_t r = 0; r < xs.size(); ++r) {
    for (std::size_t k = 0; k < np; ++k) {
      const double h = 1e-6 * std::abs(p[k]);
      auto up = p;
      auto down = p;
      up[k] += h;
      down[k] -= h;
      const double fd = (eval(xs[r], up) - eval(xs[r], down)) / (2.0 * h);
      const double an = analytic_rows[r * np + k];
      const double ref = std::max(std::abs(an), 1e-3 * col_max[k]);
      if (ref == 0.0) continue;
      worst = std::max(worst, std::abs(fd - an) / ref);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("Levenberg-Marquardt on a straight line matches linear least squares") {
  auto g = rng::make_engine(5, 1, 0);
  std::vector<DataPoint> data;
  for (int i = 0; i < 40; ++i) {
    const double x = 0.25 * i;
    const double s = 0.1 + 0.05 * (i % 3);
    data.push_back({x, 1.7 * x - 0.4 + s * rng::standard_normal(g), s});
  }
  Eigen::MatrixXd a(data.size(), 2);
  Eigen::VectorXd y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    a(static_cast<Eigen::Index>(i), 0) = data[i].x / data[i].sigma;
    a(static_cast<Eigen::Index>(i), 1) = 1.0 / data[i].sigma;
    y[static_cast<Eigen::Index>(i)] = data[i].y / data[i].sigma;
  }
  const Eigen::VectorXd exact = a.colPivHouseholderQr().solve(y);
  const Eigen::MatrixXd cov = (a.transpose() * a).inverse();

  const std::array<double, 2> init = {0.0, 0.0};
  const auto fit = fit_nonlinear(line_model(), data, init);
  CHECK(fit.converged);
  CHECK(fit.value(0) == Approx(exact[0]).epsilon(1e-8));
  CHECK(fit.value(1) == Approx(exact[1]).epsilon(1e-8));
  CHECK(fit.sigma(0) == Approx(std::sqrt(cov(0, 0))).epsilon(1e-6));
  CHECK(fit.covariance(0, 1) == Approx(cov(0, 1)).epsilon(1e-6));
  CHECK(fit.num_points == 40);
  CHECK(fit.index_of("offset") == std::optional<std::size_t>(1));
  CHECK_FALSE(fit.index_of("nothing").has_value());
  CHECK(fit.reduced_chi2() == Approx(fit.residual_norm / 38.0));
}

TEST_CASE("fit result does not depend on the order of the data") {
  auto g = rng::make_engine(6, 1, 0);
  std::vector<DataPoint> data;
  for (int i = 0; i < 60; ++i) {
    const double x = 0.05 * i;
    data.push_back({x, 3.0 * std::exp(-1.3 * x) * (1.0 + 0.02 * rng::standard_normal(g)), 0.05});
  }
  const std::array<double, 2> init = {1.0, 0.5};
  const auto ref = fit_nonlinear(decay_model(), data, init);
  REQUIRE(ref.converged);
  CHECK(ref.value(1) == Approx(1.3).epsilon(0.05));
  for (int trial = 0; trial < 5; ++trial) {
    auto shuffled = data;
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
      std::swap(shuffled[i], shuffled[static_cast<std::size_t>(rng::uniform01(g) * static_cast<double>(i + 1))]);
    }
    const auto fit = fit_nonlinear(decay_model(), shuffled, init);
    CHECK(fit.values == ref.values);
    CHECK(fit.covariance == ref.covariance);
    CHECK(fit.residual_norm == ref.residual_norm);
  }
}

TEST_CASE("singular problems and the iteration cap") {
  CurveModel m = line_model();
  m.value = [](double x, std::span<const double> p) { return (p[0] + p[1]) * x; };
  const std::vector<DataPoint> data = {{1, 1, 1}, {2, 2, 1}, {3, 3.1, 1}};
  const std::array<double, 2> init = {0.5, 0.5};
  CHECK(test::error_code_of([&] { fit_nonlinear(m, data, init); }) == ErrorCode::SingularJacobian);

  std::vector<DataPoint> decay;
  for (int i = 0; i < 30; ++i) decay.push_back({0.1 * i, 5.0 * std::exp(-2.0 * 0.1 * i), 0.01});
  FitOptions once;
  once.max_iterations = 1;
  const std::array<double, 2> far = {1.0, 0.1};
  const auto capped = fit_nonlinear(decay_model(), decay, far, once);
  CHECK_FALSE(capped.converged);
  CHECK(capped.iterations == 1);
  const auto full = fit_nonlinear(decay_model(), decay, far);
  CHECK(full.converged);
  CHECK(full.value(0) == Approx(5.0).epsilon(1e-8));
  CHECK(full.value(1) == Approx(2.0).epsilon(1e-8));
}

TEST_CASE("comb Jacobian agrees with central differences") {
  const auto p = test::reference_comb();
  const auto arr = to_array(p);
  const std::vector<double> params(arr.begin(), arr.end());
  std::vector<double> xs;
  for (int i = -200; i <= 200; ++i) xs.push_back(p.delay + i * 17.3e-12 + 3.1e-12);
  for (double t : {-40e-9, -6.3e-9, 2.9e-9, 25e-9}) xs.push_back(t);
  std::vector<double> rows;
  for (double x : xs) {
    std::array<double, 6> grad{};
    const double v = comb_model_gradient(p, x, grad, 174);
    CHECK(v == Approx(comb_model_eval(p, x, 174)).epsilon(1e-12));
    rows.insert(rows.end(), grad.begin(), grad.end());
  }
  auto eval = [](double x, const std::vector<double>& v) { return comb_model_eval(comb_from_array(v), x, 174); };
  CHECK(worst_jacobian_error(eval, params, xs, rows, 6) < 1e-4);
}

TEST_CASE("variance-curve Jacobian agrees with central differences") {
  const auto model = variance_curve_model(units::two_pi * 800e3 / 89e6, 0.7);
  const std::vector<double> params = {0.1653, 0.9};
  std::vector<double> xs;
  for (double p = 1e-3; p < 0.16; p *= 1.3) {
    xs.push_back(p);
    xs.push_back(-p);
  }
  std::vector<double> rows;
  for (double x : xs) {
    std::array<double, 2> grad{};
    model.gradient(x, params, grad);
    rows.insert(rows.end(), grad.begin(), grad.end());
  }
  auto eval = [&](double x, const std::vector<double>& v) { return model.value(x, v); };
  CHECK(worst_jacobian_error(eval, params, xs, rows, 2) < 1e-4);
}

TEST_CASE("initial comb guess") {
  const auto truth = test::reference_comb();
  const auto h = test::comb_histogram(truth, 0.01, 3);
  const auto guess = initial_guess_comb(h);
  CHECK(guess.spacing == Approx(truth.spacing).epsilon(0.03));
  CHECK(guess.delay == Approx(truth.delay).epsilon(0.03));
  CHECK(guess.linewidth == Approx(truth.linewidth).epsilon(0.3));
  CHECK(guess.resolution == Approx(truth.resolution).epsilon(0.3));

  CorrelationHistogram flat;
  flat.bin_width_ps = 35;
  flat.counts.assign(400, 100);
  flat.g2.assign(400, 1.0);
  CHECK(test::error_code_of([&] { initial_guess_comb(flat); }) == ErrorCode::NoCombDetected);
  flat.g2.clear();
  CHECK(test::error_code_of([&] { fit_comb(flat); }) == ErrorCode::NotNormalized);
}

TEST_CASE("comb fit recovers noiseless parameters") {
  const auto truth = test::reference_comb();
  const auto fit = fit_comb(test::comb_histogram(truth, 0.0, 1, 1e7));
  CHECK(fit.fit.converged);
  CHECK(fit.params.N1 == Approx(truth.N1).epsilon(1e-4));
  CHECK(fit.params.N2 == Approx(truth.N2).epsilon(1e-3));
  CHECK(fit.params.linewidth == Approx(truth.linewidth).epsilon(1e-4));
  CHECK(fit.params.delay == Approx(truth.delay).epsilon(1e-5));
  CHECK(fit.params.resolution == Approx(truth.resolution).epsilon(1e-4));
  CHECK(fit.params.spacing == Approx(truth.spacing).epsilon(1e-5));
  const auto est = fit.estimate();
  CHECK(est.sigma_N1 == Approx(fit.fit.sigma(0)));
  CHECK(est.cov_N1_N2 == fit.fit.covariance(0, 1));
}

TEST_CASE("comb fit with one-percent noise") {
  const auto truth = test::reference_comb();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto fit = fit_comb(test::comb_histogram(truth, 0.01, seed));
    CHECK(fit.params.linewidth / units::two_pi == Approx(14.16e6).epsilon(0.01));
    CHECK(fit.params.spacing == Approx(1.34e-9).epsilon(0.005));
    CHECK(fit.params.resolution == Approx(185e-12).epsilon(0.05));
    CHECK(fit.params.N1 == Approx(16.0).epsilon(0.05));
    CHECK(fit.params.N2 == Approx(0.064).epsilon(0.05));
  }
}

TEST_CASE("rate calibration fit") {
  std::vector<RatePoint> pts;
  for (double p : {20e-6, 50e-6, 100e-6, 150e-6, 200e-6}) pts.push_back({p, 0.404 * 1.045e11 * p, 100.0});
  const auto fit = fit_rate_linear(pts, 0.404);
  CHECK(fit.k == Approx(1.045e11).epsilon(1e-12));
  CHECK(fit.sigma_k > 0.0);
  CHECK(fit.fit.residual_norm == Approx(0.0).epsilon(1e-9));

  for (auto& p : pts) p.measured_rate += 0.404 * 2500.0;
  const auto off = fit_rate_linear(pts, 0.404, RateModel::WithOffset);
  CHECK(off.k == Approx(1.045e11).epsilon(1e-10));
  CHECK(off.offset == Approx(2500.0).epsilon(1e-6));
  CHECK(off.sigma_offset > 0.0);

  const std::vector<RatePoint> same = {{1e-5, 1e3, 10}, {1e-5, 1.1e3, 10}};
  CHECK(test::error_code_of([&] { fit_rate_linear(same, 0.4); }) == ErrorCode::DegenerateDesign);
  const std::vector<RatePoint> single = {{1e-5, 1e3, 10}};
  CHECK(test::error_code_of([&] { fit_rate_linear(single, 0.4); }) == ErrorCode::DegenerateDesign);
  CHECK(test::error_code_of([&] { fit_rate_linear(pts, 1.4); }) == ErrorCode::InvalidFraction);
  const std::vector<RatePoint> bad = {{1e-5, 1e3, 0}, {2e-5, 2e3, 10}};
  CHECK(test::error_code_of([&] { fit_rate_linear(bad, 0.4); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("rate fit covariance covers the truth at the nominal rate") {
  auto g = rng::make_engine(99, 1, 0);
  int inside = 0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    std::vector<RatePoint> pts;
    for (double p : {20e-6, 60e-6, 100e-6, 140e-6, 180e-6}) {
      const double r = 0.404 * 1.045e11 * p;
      const double s = 0.01 * r;
      pts.push_back({p, r + s * rng::standard_normal(g), s});
    }
    const auto fit = fit_rate_linear(pts, 0.404);
    if (std::abs(fit.k - 1.045e11) < fit.sigma_k) ++inside;
  }
  CHECK(static_cast<double>(inside) / trials == Approx(0.6827).epsilon(0.05));
}

TEST_CASE("g2 hyperbola fit") {
  const double a = 82.1e6 / (2.0 * 1.045e11);
  std::vector<G2Point> pts;
  for (double p : {5e-6, 10e-6, 30e-6, 100e-6, 200e-6}) pts.push_back({p, 2.0 + a / p, 0.05});
  const auto fit = fit_g2_hyperbola(pts, a);
  CHECK(fit.a == Approx(a).epsilon(1e-12));
  CHECK(fit.predicted_a == a);
  CHECK(fit.sigma_a > 0.0);
  const std::vector<G2Point> same = {{1e-5, 3, 0.1}, {1e-5, 3.1, 0.1}};
  CHECK(test::error_code_of([&] { fit_g2_hyperbola(same); }) == ErrorCode::DegenerateDesign);
}

TEST_CASE("variance-curve fit") {
  const double omega = units::two_pi * 800e3 / 89e6;
  const auto model = variance_curve_model(omega, 0.7);
  const std::array<double, 2> truth = {0.1653, 0.92};
  std::vector<VariancePoint> pts;
  for (double p : {5e-3, 10e-3, 20e-3, 40e-3, 60e-3, 80e-3, 100e-3}) {
    pts.push_back({p, model.value(p, truth), 1e-3, Quadrature::AntiSqueezed});
    pts.push_back({p, model.value(-p, truth), 1e-3, Quadrature::Squeezed});
  }
  const auto fit = fit_variance_curve(pts, omega, 0.7);
  CHECK(fit.fit.converged);
  CHECK(fit.threshold_power == Approx(0.1653).epsilon(1e-6));
  CHECK(fit.detection_efficiency == Approx(0.92).epsilon(1e-6));

  for (auto& p : pts) p.variance = 1.0;
  CHECK(test::error_code_of([&] { fit_variance_curve(pts, omega, 0.7); }) == ErrorCode::DegenerateDesign);
  CHECK(test::error_code_of([&] { fit_variance_curve(pts, omega, 0.0); }) == ErrorCode::InvalidFraction);
  const std::vector<VariancePoint> one = {{0.01, 1.1, 0.01, Quadrature::AntiSqueezed}};
  CHECK(test::error_code_of([&] { fit_variance_curve(one, omega, 0.7); }) == ErrorCode::DegenerateDesign);
}
