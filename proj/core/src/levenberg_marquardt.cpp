#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "weaksqz/error.hpp"
#include "weaksqz/fitters.hpp"

namespace weaksqz {

double FitResult::sigma(std::size_t i) const {
  const auto k = static_cast<Eigen::Index>(i);
  return std::sqrt(std::max(0.0, covariance(k, k)));
}

std::optional<std::size_t> FitResult::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

double FitResult::reduced_chi2() const {
  const auto dof = static_cast<double>(num_points) - static_cast<double>(values.size());
  return dof > 0 ? residual_norm / dof : 0.0;
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Internal coordinates: log(p) for positive parameters, p otherwise.
class Problem {
 public:
  Problem(const CurveModel& model, std::vector<DataPoint> data, const FitOptions& options)
      : model_(model), data_(std::move(data)), options_(options), n_(model.size()) {}

  std::size_t size() const { return n_; }

  VectorXd to_internal(std::span<const double> p) const {
    VectorXd t(static_cast<Index>(n_));
    for (std::size_t j = 0; j < n_; ++j) {
      if (model_.positive[j] && !(p[j] > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "initial " + model_.names[j] + " must be positive");
      }
      t[static_cast<Index>(j)] = model_.positive[j] ? std::log(p[j]) : p[j];
    }
    return t;
  }

  std::vector<double> to_natural(const VectorXd& t) const {
    std::vector<double> p(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      const double v = t[static_cast<Index>(j)];
      p[j] = model_.positive[j] ? std::exp(v) : v;
    }
    return p;
  }

  double chi2(const VectorXd& t) const {
    const auto p = to_natural(t);
    double sum = 0.0;
    for (const auto& d : data_) {
      const double r = (d.y - model_.value(d.x, p)) / d.sigma;
      sum += r * r;
    }
    return std::isfinite(sum) ? sum : std::numeric_limits<double>::infinity();
  }

  // Normal matrix, gradient J^T r and chi^2 at t, in internal coordinates.
  std::tuple<MatrixXd, VectorXd, double> linearize(const VectorXd& t) const {
    const auto p = to_natural(t);
    const auto n = static_cast<Index>(n_);
    MatrixXd a = MatrixXd::Zero(n, n);
    VectorXd g = VectorXd::Zero(n);
    double sum = 0.0;
    std::vector<double> grad(n_);
    for (const auto& d : data_) {
      const double f = model_.value(d.x, p);
      natural_gradient(d.x, p, grad);
      const double r = (d.y - f) / d.sigma;
      sum += r * r;
      for (std::size_t j = 0; j < n_; ++j) {
        const double chain = model_.positive[j] ? p[j] : 1.0;
        grad[j] *= chain / d.sigma;
      }
      for (Index j = 0; j < n; ++j) {
        g[j] += grad[static_cast<std::size_t>(j)] * r;
        for (Index k = 0; k <= j; ++k) {
          a(j, k) += grad[static_cast<std::size_t>(j)] * grad[static_cast<std::size_t>(k)];
        }
      }
    }
    a.triangularView<Eigen::StrictlyUpper>() = a.transpose().triangularView<Eigen::StrictlyUpper>();
    return {a, g, sum};
  }

  // Converts a covariance in internal coordinates to natural units.
  MatrixXd natural_covariance(const MatrixXd& cov, std::span<const double> p) const {
    VectorXd jac(static_cast<Index>(n_));
    for (std::size_t j = 0; j < n_; ++j) jac[static_cast<Index>(j)] = model_.positive[j] ? p[j] : 1.0;
    return jac.asDiagonal() * cov * jac.asDiagonal();
  }

 private:
  void natural_gradient(double x, std::span<const double> p, std::span<double> grad) const {
    if (model_.gradient && !options_.finite_differences) {
      model_.gradient(x, p, grad);
      return;
    }
    std::vector<double> q(p.begin(), p.end());
    for (std::size_t j = 0; j < n_; ++j) {
      const double typical = model_.scale.size() > j ? model_.scale[j] : 1.0;
      const double h = options_.fd_relative_step * std::max(std::abs(p[j]), typical);
      q[j] = p[j] + h;
      const double up = model_.value(x, q);
      q[j] = p[j] - h;
      const double down = model_.value(x, q);
      q[j] = p[j];
      grad[j] = (up - down) / (2.0 * h);
    }
  }

  const CurveModel& model_;
  std::vector<DataPoint> data_;
  const FitOptions& options_;
  std::size_t n_;
};

// Judged on the unit-diagonal form so that parameter units do not matter.
bool positive_definite(const MatrixXd& a) {
  if (!(a.diagonal().minCoeff() > 0.0)) return false;
  const VectorXd d = a.diagonal().cwiseSqrt().cwiseInverse();
  const MatrixXd unit = d.asDiagonal() * a * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(unit, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return ev.minCoeff() > 1e-13 * std::max(ev.maxCoeff(), 0.0) && ev.minCoeff() > 0.0;
}

}  // namespace

FitResult fit_nonlinear(const CurveModel& model, std::span<const DataPoint> data,
                        std::span<const double> init, const FitOptions& options) {
  const std::size_t n = model.size();
  if (init.size() != n || model.positive.size() != n) {
    throw Error(ErrorCode::InvalidParameter, "parameter vector does not match the model");
  }
  if (data.size() < n) throw Error(ErrorCode::DegenerateDesign, "fewer points than parameters");
  for (const auto& d : data) {
    if (!(d.sigma > 0.0) || !std::isfinite(d.y) || !std::isfinite(d.x)) {
      throw Error(ErrorCode::InvalidParameter, "every point needs finite x, y and sigma > 0");
    }
  }

  std::vector<DataPoint> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end(), [](const DataPoint& l, const DataPoint& r) {
    return std::tie(l.x, l.y, l.sigma) < std::tie(r.x, r.y, r.sigma);
  });
  Problem problem(model, std::move(sorted), options);

  VectorXd theta = problem.to_internal(init);
  auto [a, g, chi2] = problem.linearize(theta);
  if (!std::isfinite(chi2)) throw Error(ErrorCode::InvalidParameter, "model is not finite at the initial point");

  // Damping acts in coordinates scaled by the initial column norms, where the
  // normal matrix has unit diagonal; lambda_0 = 1e-3 * max diagonal = 1e-3.
  VectorXd scale = a.diagonal().cwiseMax(1e-300);
  if (!positive_definite(a)) {
    throw Error(ErrorCode::SingularJacobian, "normal matrix is singular at the initial point");
  }
  auto scaled_gradient = [&](const VectorXd& grad) {
    return (grad.array() / scale.array().sqrt()).abs().maxCoeff();
  };

  FitResult result;
  result.names = model.names;
  result.units = model.units;
  result.num_points = data.size();

  double lambda = 1e-3;
  int iterations = 0;
  bool converged = scaled_gradient(g) < options.gradient_tolerance || chi2 == 0.0;
  bool stalled = false;
  while (!converged && !stalled && iterations < options.max_iterations) {
    bool accepted = false;
    while (!accepted && !stalled) {
      MatrixXd damped = a;
      damped.diagonal() += lambda * scale;
      const VectorXd step = damped.ldlt().solve(g);
      const VectorXd trial = theta + step;
      const double trial_chi2 = step.allFinite() ? problem.chi2(trial) : std::numeric_limits<double>::infinity();
      const double predicted = step.dot(2.0 * g - a * step);
      if (trial_chi2 < chi2) {
        const double rho = predicted > 0.0 ? (chi2 - trial_chi2) / predicted : 0.0;
        const double relative = (chi2 - trial_chi2) / chi2;
        theta = trial;
        std::tie(a, g, chi2) = problem.linearize(theta);
        ++iterations;
        accepted = true;
        // An exactly quadratic local model (linear problems, or close to the
        // optimum) switches to undamped Gauss-Newton steps.
        lambda = std::abs(rho - 1.0) < 1e-2 ? 0.0 : lambda / 10.0;
        if (relative < options.relative_tolerance || chi2 == 0.0 ||
            scaled_gradient(g) < options.gradient_tolerance) {
          converged = true;
        }
      } else {
        lambda = lambda == 0.0 ? 1e-3 : lambda * 10.0;
        if (lambda > 1e20) {
          // No descent direction left at machine precision: a minimum.
          converged = scaled_gradient(g) < 1e-4 * std::max(1.0, std::sqrt(chi2));
          stalled = true;
        }
      }
    }
  }
  if (!positive_definite(a)) {
    throw Error(ErrorCode::SingularJacobian, "normal matrix is singular at the optimum");
  }
  const auto p = problem.to_natural(theta);
  result.values = Eigen::Map<const VectorXd>(p.data(), static_cast<Index>(n));
  result.covariance = problem.natural_covariance(a.inverse(), p);
  result.covariance = 0.5 * (result.covariance + result.covariance.transpose()).eval();
  result.residual_norm = chi2;
  result.gradient_norm = scaled_gradient(g);
  result.iterations = iterations;
  result.converged = converged;
  return result;
}

}  // namespace weaksqz
