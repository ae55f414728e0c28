#include "weaksqz/fitters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "weaksqz/error.hpp"
#include "weaksqz/units.hpp"

namespace weaksqz {

std::array<double, 6> to_array(const CombModelParams& p) {
  return {p.N1, p.N2, p.linewidth, p.delay, p.resolution, p.spacing};
}

CombModelParams comb_from_array(std::span<const double> v) {
  return CombModelParams{v[0], v[1], v[2], v[3], v[4], v[5]};
}

double comb_model_gradient(const CombModelParams& params, double tau, std::span<double> grad,
                           std::optional<std::size_t> n_max) {
  const auto terms = static_cast<long long>(n_max.value_or(default_comb_terms(params)));
  const double a = params.kernel_rate();
  const double u = tau - params.delay;
  constexpr double cutoff = 60.0;
  const auto nearest =
      std::clamp(static_cast<long long>(std::llround(u / params.spacing)), -terms, terms);

  // S = sum (1 + a d) e^{-a d}, plus the sums needed for its derivatives.
  double s = 0.0;
  double s_d2 = 0.0;  // sum d^2 e^{-a d}
  double s_v = 0.0;   // sum (u - n tau_F) e^{-a d}
  double s_nv = 0.0;  // sum n (u - n tau_F) e^{-a d}
  auto accumulate = [&](long long n) {
    const double nn = static_cast<double>(n);
    const double v = u - nn * params.spacing;
    const double d = std::abs(v);
    if (a * d > cutoff) return false;
    const double e = std::exp(-a * d);
    s += (1.0 + a * d) * e;
    s_d2 += d * d * e;
    s_v += v * e;
    s_nv += nn * v * e;
    return true;
  };
  for (long long n = nearest; n <= terms && accumulate(n); ++n) {
  }
  for (long long n = nearest - 1; n >= -terms && accumulate(n); --n) {
  }

  const double envelope = std::exp(-params.linewidth * std::abs(u));
  const double sign_u = u >= 0.0 ? 1.0 : -1.0;  // right-branch derivative at the kink
  const double n1 = params.N1;
  grad[0] = params.N2 + envelope * s;
  grad[1] = n1;
  grad[2] = -n1 * std::abs(u) * envelope * s;
  grad[3] = n1 * envelope * (params.linewidth * sign_u * s + a * a * s_v);
  grad[4] = n1 * envelope * (a * a / params.resolution) * s_d2;
  grad[5] = n1 * envelope * a * a * s_nv;
  return n1 * (params.N2 + envelope * s);
}

CurveModel comb_curve_model(std::size_t n_max) {
  CurveModel m;
  m.names.assign(kCombParameterNames.begin(), kCombParameterNames.end());
  m.units = {"", "", "s^-1", "s", "s", "s"};
  m.positive = {true, false, true, false, true, true};
  m.scale = {1.0, 1.0, 1e8, 1e-9, 1e-10, 1e-9};
  m.value = [n_max](double x, std::span<const double> p) {
    return comb_model_eval(comb_from_array(p), x, n_max);
  };
  m.gradient = [n_max](double x, std::span<const double> p, std::span<double> grad) {
    comb_model_gradient(comb_from_array(p), x, grad, n_max);
  };
  return m;
}

CombFitEstimate CombFit::estimate() const {
  CombFitEstimate e;
  e.params = params;
  e.sigma_N1 = fit.sigma(0);
  e.sigma_N2 = fit.sigma(1);
  e.cov_N1_N2 = fit.covariance(0, 1);
  return e;
}

namespace {

// (1 + x) e^{-x} = 1/2
constexpr double kKernelHalfWidth = 1.6783469900166608;

// Sub-bin position of a local maximum at index i, in bins.
double parabolic_offset(const std::vector<double>& v, std::size_t i) {
  if (i == 0 || i + 1 >= v.size()) return 0.0;
  const double l = v[i - 1], c = v[i], r = v[i + 1];
  const double curv = l - 2.0 * c + r;
  return curv < 0.0 ? std::clamp(0.5 * (l - r) / curv, -0.5, 0.5) : 0.0;
}

struct Peak {
  std::size_t index;
  double position;  // s
  double height;
};

}  // namespace

CombModelParams initial_guess_comb(const CorrelationHistogram& hist) {
  if (!hist.normalized()) throw Error(ErrorCode::NotNormalized, "histogram has no g2 values");
  const auto& g = hist.g2;
  const std::size_t n = g.size();
  if (n < 16) throw Error(ErrorCode::NoCombDetected, "too few bins");

  const std::size_t tail = std::max<std::size_t>(1, n / 10);
  double tail_sum = 0.0;
  for (std::size_t i = 0; i < tail; ++i) tail_sum += g[i] + g[n - 1 - i];
  const double baseline = tail_sum / static_cast<double>(2 * tail);

  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i > 0 ? i - 1 : i;
    const std::size_t hi = std::min(n - 1, i + 1);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += g[j];
    smooth[i] = sum / static_cast<double>(hi - lo + 1);
  }
  double tail_var = 0.0;
  for (std::size_t i = 0; i < tail; ++i) {
    tail_var += (smooth[i] - baseline) * (smooth[i] - baseline);
    tail_var += (smooth[n - 1 - i] - baseline) * (smooth[n - 1 - i] - baseline);
  }
  const double noise = std::sqrt(tail_var / static_cast<double>(2 * tail));
  // The tallest of thousands of noise bins sits near 4 sigma, so a real peak
  // has to clear 8 sigma as well as twice the baseline.
  const double top = *std::max_element(smooth.begin(), smooth.end());
  if (!(baseline > 0.0) || top - baseline < std::max(baseline, 8.0 * noise)) {
    throw Error(ErrorCode::NoCombDetected, "no peak stands out of the baseline");
  }

  // Peak spacing: strongest autocorrelation of the excess over the baseline
  // beyond its first minimum. Works when neighbouring peaks overlap.
  std::vector<double> excess(n);
  for (std::size_t i = 0; i < n; ++i) excess[i] = smooth[i] - baseline;
  const std::size_t max_lag = n / 3;
  std::vector<double> acf(max_lag + 1, 0.0);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double sum = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) sum += excess[i] * excess[i + lag];
    acf[lag] = sum;
  }
  std::size_t first_min = 1;
  while (first_min < max_lag && acf[first_min + 1] < acf[first_min]) ++first_min;
  if (first_min >= max_lag) throw Error(ErrorCode::NoCombDetected, "no periodic structure in the histogram");
  const auto lag_it = std::max_element(acf.begin() + static_cast<std::ptrdiff_t>(first_min), acf.end() - 1);
  const auto lag = static_cast<std::size_t>(lag_it - acf.begin());
  if (!(acf[lag] > 0.0)) throw Error(ErrorCode::NoCombDetected, "no periodic structure in the histogram");
  const double spacing = (static_cast<double>(lag) + parabolic_offset(acf, lag)) * hist.bin_width();

  const auto top_index = static_cast<std::size_t>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
  const Peak tallest{top_index, hist.center(top_index) + parabolic_offset(smooth, top_index) * hist.bin_width(),
                     smooth[top_index]};
  const double delay = tallest.position;

  // Side-peak heights at tau0 + m tau_F; ln(height - baseline) = c - Omega_c |m| tau_F.
  const double floor = std::max(3.0 * noise, 0.01 * (tallest.height - baseline));
  const auto step = spacing / hist.bin_width();
  const auto reach = std::max<long>(1, std::lround(0.25 * step));
  std::vector<Peak> peaks{tallest};
  for (int side : {-1, 1}) {
    for (long m = 1;; ++m) {
      const long c = static_cast<long>(top_index) + side * std::lround(static_cast<double>(m) * step);
      if (c - reach < 0 || c + reach >= static_cast<long>(n)) break;
      long best = c;
      for (long i = c - reach; i <= c + reach; ++i) {
        if (smooth[static_cast<std::size_t>(i)] > smooth[static_cast<std::size_t>(best)]) best = i;
      }
      const double h = smooth[static_cast<std::size_t>(best)];
      if (h - baseline < floor) break;
      peaks.push_back({static_cast<std::size_t>(best), hist.center(static_cast<std::size_t>(best)), h});
    }
  }

  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (const auto& p : peaks) {
    const double x = std::abs(p.position - delay);
    const double y = std::log(p.height - baseline);
    sx += x, sy += y, sxx += x * x, sxy += x * y, m += 1.0;
  }
  double linewidth = 0.0;
  const double det = m * sxx - sx * sx;
  if (m >= 2 && det > 0.0) linewidth = -(m * sxy - sx * sy) / det;
  if (!(linewidth > 0.0)) linewidth = 4.0 / (static_cast<double>(n) * hist.bin_width());

  // FWHM of the tallest peak over the baseline.
  const double half = baseline + 0.5 * (tallest.height - baseline);
  auto crossing = [&](long step) {
    long i = static_cast<long>(tallest.index);
    while (i + step >= 0 && i + step < static_cast<long>(n) && smooth[static_cast<std::size_t>(i + step)] > half) {
      i += step;
    }
    const long j = i + step;
    if (j < 0 || j >= static_cast<long>(n)) return hist.center(static_cast<std::size_t>(i));
    const double vi = smooth[static_cast<std::size_t>(i)];
    const double vj = smooth[static_cast<std::size_t>(j)];
    const double frac = vi > vj ? (vi - half) / (vi - vj) : 0.5;
    return hist.center(static_cast<std::size_t>(i)) + frac * static_cast<double>(step) * hist.bin_width();
  };
  const double fwhm = std::max(crossing(1) - crossing(-1), hist.bin_width());
  const double resolution = units::ln2 * fwhm / kKernelHalfWidth;

  CombModelParams guess;
  guess.N1 = std::max(tallest.height - baseline, 1e-6);
  guess.N2 = baseline / guess.N1;
  guess.linewidth = linewidth;
  guess.delay = delay;
  guess.resolution = resolution;
  guess.spacing = spacing;
  return guess;
}

CombFit fit_comb_data(std::span<const DataPoint> data, const CombModelParams& init,
                      const FitOptions& options) {
  init.validate();
  const auto model = comb_curve_model(default_comb_terms(init));
  const auto start = to_array(init);
  CombFit out;
  out.fit = fit_nonlinear(model, data, start, options);
  std::vector<double> v(out.fit.values.data(), out.fit.values.data() + out.fit.values.size());
  out.params = comb_from_array(v);
  return out;
}

CombFit fit_comb(const CorrelationHistogram& hist, std::optional<CombModelParams> init,
                 const FitOptions& options) {
  if (!hist.normalized()) throw Error(ErrorCode::NotNormalized, "histogram has no g2 values");
  double g_sum = 0.0;
  double c_sum = 0.0;
  for (std::size_t i = 0; i < hist.num_bins(); ++i) {
    g_sum += hist.g2[i];
    c_sum += static_cast<double>(hist.counts[i]);
  }
  const double per_count = c_sum > 0.0 ? g_sum / c_sum : 1.0;
  std::vector<DataPoint> data(hist.num_bins());
  for (std::size_t i = 0; i < hist.num_bins(); ++i) {
    const auto c = static_cast<double>(hist.counts[i]);
    const double sigma = c >= 1.0 ? hist.g2[i] / std::sqrt(c) : per_count;
    data[i] = {hist.center(i), hist.g2[i], sigma > 0.0 ? sigma : per_count};
  }
  return fit_comb_data(data, init ? *init : initial_guess_comb(hist), options);
}

namespace {

void require_spread(std::span<const double> xs) {
  if (xs.size() < 2) throw Error(ErrorCode::DegenerateDesign, "need at least two points");
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (*lo == *hi) throw Error(ErrorCode::DegenerateDesign, "all pump powers are equal");
}

// Weighted linear least squares y = X b, accumulated in ascending-x order.
FitResult linear_fit(std::vector<std::array<double, 4>> rows, bool with_offset,
                     std::vector<std::string> names, std::vector<std::string> units) {
  // row: {x, y, sigma, regressor}
  std::sort(rows.begin(), rows.end());
  const Eigen::Index p = with_offset ? 2 : 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  for (const auto& [x, y, s, reg] : rows) {
    const double w = 1.0 / (s * s);
    Eigen::VectorXd xi(p);
    xi[0] = reg;
    if (with_offset) xi[1] = 1.0;
    a += w * xi * xi.transpose();
    rhs += w * y * xi;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 1e-14 * es.eigenvalues().maxCoeff())) {
    throw Error(ErrorCode::DegenerateDesign, "design matrix is singular");
  }
  FitResult fit;
  fit.names = std::move(names);
  fit.units = std::move(units);
  fit.covariance = a.inverse();
  fit.values = a.ldlt().solve(rhs);
  double chi2 = 0.0;
  for (const auto& [x, y, s, reg] : rows) {
    const double model = fit.values[0] * reg + (with_offset ? fit.values[1] : 0.0);
    chi2 += (y - model) * (y - model) / (s * s);
  }
  fit.residual_norm = chi2;
  fit.iterations = 1;
  fit.converged = true;
  fit.num_points = rows.size();
  return fit;
}

}  // namespace

RateFit fit_rate_linear(std::span<const RatePoint> points, double counting_efficiency,
                        RateModel model) {
  if (!(counting_efficiency > 0.0 && counting_efficiency <= 1.0)) {
    throw Error(ErrorCode::InvalidFraction, "counting efficiency must lie in (0, 1]");
  }
  std::vector<double> powers;
  std::vector<std::array<double, 4>> rows;
  for (const auto& p : points) {
    if (!(p.pump_power > 0.0) || p.measured_rate < 0.0 || !(p.sigma > 0.0)) {
      throw Error(ErrorCode::InvalidParameter, "rate points need P > 0, R >= 0 and sigma > 0");
    }
    powers.push_back(p.pump_power);
    rows.push_back({p.pump_power, p.measured_rate / counting_efficiency,
                    p.sigma / counting_efficiency, p.pump_power});
  }
  require_spread(powers);
  const bool offset = model == RateModel::WithOffset;
  RateFit out;
  out.fit = offset ? linear_fit(rows, true, {"k", "offset"}, {"s^-1 W^-1", "s^-1"})
                   : linear_fit(rows, false, {"k"}, {"s^-1 W^-1"});
  out.k = out.fit.value(0);
  out.sigma_k = out.fit.sigma(0);
  if (offset) {
    out.offset = out.fit.value(1);
    out.sigma_offset = out.fit.sigma(1);
  }
  return out;
}

HyperbolaFit fit_g2_hyperbola(std::span<const G2Point> points, std::optional<double> predicted_a) {
  std::vector<double> powers;
  std::vector<std::array<double, 4>> rows;
  for (const auto& p : points) {
    if (!(p.pump_power > 0.0) || !(p.sigma > 0.0)) {
      throw Error(ErrorCode::InvalidParameter, "g2 points need P > 0 and sigma > 0");
    }
    powers.push_back(p.pump_power);
    rows.push_back({p.pump_power, p.g2zero - 2.0, p.sigma, 1.0 / p.pump_power});
  }
  require_spread(powers);
  HyperbolaFit out;
  out.fit = linear_fit(rows, false, {"a"}, {"W"});
  out.a = out.fit.value(0);
  out.sigma_a = out.fit.sigma(0);
  out.predicted_a = predicted_a;
  return out;
}

namespace {

// x < 0 encodes a squeezed-quadrature point at pump power -x.
double variance_model(double x, double threshold, double eta_det, double eta_esc, double omega) {
  const double p = std::abs(x);
  const double s = std::sqrt(p / threshold);
  const double w = 4.0 * omega * omega;
  const double gain = eta_det * eta_esc * 4.0 * s;
  return x < 0.0 ? 1.0 - gain / ((1.0 + s) * (1.0 + s) + w) : 1.0 + gain / ((1.0 - s) * (1.0 - s) + w);
}

// d/d(P_th, eta_det) of variance_model.
void variance_gradient(double x, double threshold, double eta_det, double eta_esc, double omega,
                       std::span<double> grad) {
  const double p = std::abs(x);
  const double s = std::sqrt(p / threshold);
  const double w = 4.0 * omega * omega;
  const double sign = x < 0.0 ? -1.0 : 1.0;
  const double base = 1.0 - sign * s;  // 1 + s squeezed, 1 - s anti-squeezed
  const double den = base * base + w;
  const double c = eta_det * eta_esc * 4.0;
  // d(c s / den)/ds = c / den + c s * 2 sign base / den^2
  const double d_ds = c / den + c * s * 2.0 * sign * base / (den * den);
  grad[0] = sign * d_ds * (-0.5 * s / threshold);
  grad[1] = sign * eta_esc * 4.0 * s / den;
}

}  // namespace

CurveModel variance_curve_model(double normalized_frequency, double escape_efficiency) {
  const double omega = normalized_frequency;
  CurveModel model;
  model.names = {"P_th", "eta_det"};
  model.units = {"W", ""};
  model.positive = {true, true};
  model.scale = {0.1, 1.0};
  model.value = [escape_efficiency, omega](double x, std::span<const double> p) {
    return variance_model(x, p[0], p[1], escape_efficiency, omega);
  };
  model.gradient = [escape_efficiency, omega](double x, std::span<const double> p, std::span<double> grad) {
    variance_gradient(x, p[0], p[1], escape_efficiency, omega, grad);
  };
  return model;
}

VarianceFit fit_variance_curve(std::span<const VariancePoint> points, double normalized_frequency,
                               double escape_efficiency, const FitOptions& options) {
  if (!(escape_efficiency > 0.0 && escape_efficiency <= 1.0)) {
    throw Error(ErrorCode::InvalidFraction, "eta_esc must lie in (0, 1]");
  }
  std::vector<DataPoint> data;
  double p_max = 0.0;
  for (const auto& p : points) {
    if (!(p.pump_power > 0.0) || !(p.sigma > 0.0)) {
      throw Error(ErrorCode::InvalidParameter, "variance points need P > 0 and sigma > 0");
    }
    const double x = p.quadrature == Quadrature::Squeezed ? -p.pump_power : p.pump_power;
    data.push_back({x, p.variance, p.sigma});
    p_max = std::max(p_max, p.pump_power);
  }
  if (data.size() < 2) throw Error(ErrorCode::DegenerateDesign, "need at least two points");

  // Profile scan: for each trial P_th, eta_det enters linearly.
  const double omega = normalized_frequency;
  double best_chi2 = std::numeric_limits<double>::infinity();
  double best_threshold = 0.0;
  double best_eta = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double threshold = p_max * std::pow(10.0, 0.0001 + 3.0 * i / 400.0);
    double num = 0.0;
    double den = 0.0;
    for (const auto& d : data) {
      const double unit = variance_model(d.x, threshold, 1.0, escape_efficiency, omega) - 1.0;
      const double w = 1.0 / (d.sigma * d.sigma);
      num += w * unit * (d.y - 1.0);
      den += w * unit * unit;
    }
    const double eta = num / den;
    if (!(eta > 0.0)) continue;
    double chi2 = 0.0;
    for (const auto& d : data) {
      const double r = (d.y - variance_model(d.x, threshold, eta, escape_efficiency, omega)) / d.sigma;
      chi2 += r * r;
    }
    if (chi2 < best_chi2) {
      best_chi2 = chi2;
      best_threshold = threshold;
      best_eta = eta;
    }
  }
  if (!(best_eta > 0.0)) {
    throw Error(ErrorCode::DegenerateDesign, "data carry no excess noise (eta_det -> 0)");
  }

  auto model = variance_curve_model(normalized_frequency, escape_efficiency);
  model.scale = {best_threshold, 1.0};
  const std::array<double, 2> init = {best_threshold, best_eta};
  VarianceFit out;
  out.fit = fit_nonlinear(model, data, init, options);
  out.threshold_power = out.fit.value(0);
  out.detection_efficiency = out.fit.value(1);
  if (out.threshold_power <= p_max) out.fit.converged = false;
  return out;
}

}  // namespace weaksqz
