#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weaksqz/correlator.hpp"
#include "weaksqz/opo_model.hpp"

namespace weaksqz {

struct FitResult {
  std::vector<std::string> names;
  std::vector<std::string> units;
  Eigen::VectorXd values;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  ///< chi^2, sum of squared weighted residuals
  double gradient_norm = 0.0;  ///< scaled gradient infinity-norm at the optimum
  int iterations = 0;
  bool converged = false;
  std::size_t num_points = 0;

  double value(std::size_t i) const { return values[static_cast<Eigen::Index>(i)]; }
  double sigma(std::size_t i) const;
  std::optional<std::size_t> index_of(const std::string& name) const;
  double reduced_chi2() const;
};

struct DataPoint {
  double x = 0.0;
  double y = 0.0;
  double sigma = 1.0;
};

/// A parameterized curve y = f(x; p). Parameters flagged `positive` are
/// optimized in log space; `scale` is a typical magnitude used for finite
/// differences of the remaining ones.
struct CurveModel {
  std::vector<std::string> names;
  std::vector<std::string> units;
  std::vector<bool> positive;
  std::vector<double> scale;
  std::function<double(double x, std::span<const double> p)> value;
  /// df/dp in natural units. Leave empty to use central differences.
  std::function<void(double x, std::span<const double> p, std::span<double> grad)> gradient;

  std::size_t size() const { return names.size(); }
};

struct FitOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-10;
  double gradient_tolerance = 1e-8;
  bool finite_differences = false;
  double fd_relative_step = 1e-6;
};

/// Levenberg-Marquardt weighted least squares. Data are accumulated in
/// ascending (x, y, sigma) order, so any permutation of `data` gives a
/// bit-identical result. Throws SingularJacobian; on hitting the iteration cap
/// returns the best point with converged = false.
FitResult fit_nonlinear(const CurveModel& model, std::span<const DataPoint> data,
                        std::span<const double> init, const FitOptions& options = {});

// --- comb model -----------------------------------------------------------

inline constexpr std::array<const char*, 6> kCombParameterNames = {"N1", "N2", "Omega_c",
                                                                   "tau0", "tau_R", "tau_F"};

std::array<double, 6> to_array(const CombModelParams& p);
CombModelParams comb_from_array(std::span<const double> v);

/// Value and analytic gradient of the comb model with respect to
/// (N1, N2, Omega_c, tau0, tau_R, tau_F).
double comb_model_gradient(const CombModelParams& params, double tau, std::span<double> grad,
                           std::optional<std::size_t> n_max = std::nullopt);

CurveModel comb_curve_model(std::size_t n_max);

struct CombFit {
  CombModelParams params;
  FitResult fit;

  /// Parameter estimate with the N1/N2 block of the covariance, for g2_at_zero.
  CombFitEstimate estimate() const;
};

/// Starting point read off the histogram: peak spacing, tallest peak, peak
/// decay, peak width and the far-tail baseline.
CombModelParams initial_guess_comb(const CorrelationHistogram& hist);

/// Weighted comb fit of a normalized histogram (Poisson weights, one-count floor).
CombFit fit_comb(const CorrelationHistogram& hist,
                 std::optional<CombModelParams> init = std::nullopt,
                 const FitOptions& options = {});

/// Comb fit of arbitrary (tau, g2, sigma) samples.
CombFit fit_comb_data(std::span<const DataPoint> data, const CombModelParams& init,
                      const FitOptions& options = {});

// --- calibration fits -----------------------------------------------------

struct RatePoint {
  double pump_power = 0.0;     ///< W
  double measured_rate = 0.0;  ///< s^-1, after the counting path
  double sigma = 0.0;          ///< s^-1
};

enum class RateModel { ThroughOrigin, WithOffset };

struct RateFit {
  double k = 0.0;
  double sigma_k = 0.0;
  double offset = 0.0;
  double sigma_offset = 0.0;
  FitResult fit;
};

/// Linear fit of R = R_meas / eta against P.
RateFit fit_rate_linear(std::span<const RatePoint> points, double counting_efficiency,
                        RateModel model = RateModel::ThroughOrigin);

struct G2Point {
  double pump_power = 0.0;
  double g2zero = 0.0;
  double sigma = 0.0;
};

struct HyperbolaFit {
  double a = 0.0;  ///< W
  double sigma_a = 0.0;
  std::optional<double> predicted_a;  ///< gamma1 / (2k)
  FitResult fit;
};

/// Fit of g2(0) = 2 + a / P.
HyperbolaFit fit_g2_hyperbola(std::span<const G2Point> points,
                              std::optional<double> predicted_a = std::nullopt);

enum class Quadrature { Squeezed, AntiSqueezed };

struct VariancePoint {
  double pump_power = 0.0;
  double variance = 1.0;  ///< detected, shot-noise units
  double sigma = 0.0;
  Quadrature quadrature = Quadrature::AntiSqueezed;
};

struct VarianceFit {
  double threshold_power = 0.0;
  double detection_efficiency = 0.0;
  FitResult fit;
};

/// Detected variance as a curve in (P_th, eta_det); x = P for the
/// anti-squeezed quadrature and x = -P for the squeezed one.
CurveModel variance_curve_model(double normalized_frequency, double escape_efficiency);

/// Joint fit of the detected variances for P_th and eta_det, with the
/// normalized analysis frequency and eta_esc held fixed.
VarianceFit fit_variance_curve(std::span<const VariancePoint> points, double normalized_frequency,
                               double escape_efficiency, const FitOptions& options = {});

}  // namespace weaksqz
