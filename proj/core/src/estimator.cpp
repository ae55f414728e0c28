#include "weaksqz/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "weaksqz/error.hpp"
#include "weaksqz/rng.hpp"
#include "weaksqz/units.hpp"

namespace weaksqz {

std::string to_string(FormulaMode mode) {
  return mode == FormulaMode::ComposedChain ? "chain" : "eq5";
}

FormulaMode formula_mode_from_string(const std::string& s) {
  if (s == "chain" || s == "ComposedChain") return FormulaMode::ComposedChain;
  if (s == "eq5" || s == "LiteralEq5") return FormulaMode::LiteralEq5;
  throw Error(ErrorCode::ConfigInvalid, "unknown formula mode '" + s + "'");
}

void EstimationConfig::validate() const {
  if (!(analysis_frequency > 0.0)) {
    throw Error(ErrorCode::ConfigInvalid, "analysis frequency must be positive");
  }
  if (escape_efficiency && !(*escape_efficiency > 0.0 && *escape_efficiency <= 1.0)) {
    throw Error(ErrorCode::InvalidFraction, "eta_esc must lie in (0, 1]");
  }
  if (threshold_power && !(*threshold_power > 0.0)) {
    throw Error(ErrorCode::ConfigInvalid, "P_th must be positive");
  }
}

namespace {

void finish(SqueezingEstimate& est) {
  est.r = 0.5 * std::log(est.v_plus);
  est.squeezing_db = 10.0 * std::log10(std::exp(-2.0 * est.r));
}

SqueezingEstimate literal_eq5(double g2zero, const CavityParams& cavity, double k, double f) {
  const double g1 = cavity.gamma1;
  const double total = cavity.linewidth();
  const double c = units::speed_of_light;
  const double l = cavity.length;
  const double root = std::sqrt(2.0 * g1 * cavity.conversion / (k * (g2zero - 2.0)));
  const double x = c / (total * l) * root;
  if (!(x < 1.0)) {
    throw Error(ErrorCode::AboveThreshold, "g2(0) implies a pump at or above threshold");
  }
  const double numerator = 4.0 * g1 * c / (total * total * l) * root;
  const double freq = units::two_pi * f / total;
  SqueezingEstimate est;
  est.v_plus = 1.0 + numerator / ((1.0 - x) * (1.0 - x) + freq * freq);
  est.v_minus = 1.0 - numerator / ((1.0 + x) * (1.0 + x) + freq * freq);
  finish(est);
  return est;
}

}  // namespace

SqueezingEstimate estimate_squeezing(double g2zero, const CavityParams& cavity, double k,
                                     const EstimationConfig& config) {
  config.validate();
  if (!(g2zero > 2.0)) {
    throw Error(ErrorCode::SubThermalG2, "g2(0) = " + std::to_string(g2zero) + " is not above 2");
  }
  if (!(k > 0.0)) throw Error(ErrorCode::InvalidParameter, "k must be positive");

  CavityParams cav = CavityParams::from_rates(cavity.gamma1, cavity.gamma2, cavity.length, cavity.conversion);
  const PumpCalibration cal{k};
  const double pump = pump_from_g2zero(cav, cal, g2zero);

  SqueezingEstimate est;
  if (config.mode == FormulaMode::ComposedChain) {
    if (config.escape_efficiency) cav = cav.with_escape_efficiency(*config.escape_efficiency);
    if (config.threshold_power) cav = cav.with_threshold(*config.threshold_power);
    const auto v = quadrature_variances(cav, pump, AnalysisFrequency{config.analysis_frequency});
    est.v_plus = v.v_plus;
    est.v_minus = v.v_minus;
    finish(est);
  } else {
    est = literal_eq5(g2zero, cav, k, config.analysis_frequency);
  }
  est.pump_power = pump;

  auto& in = est.inputs;
  in.g2zero = g2zero;
  in.gamma1 = cav.gamma1;
  in.gamma2 = cav.gamma2;
  in.length = cav.length;
  in.conversion = cav.conversion;
  in.k = k;
  in.analysis_frequency = config.analysis_frequency;
  in.escape_efficiency = cav.escape_efficiency;
  in.threshold_power = cav.threshold_power;
  in.explicit_escape_efficiency = cav.explicit_escape_efficiency;
  in.measured_threshold = cav.measured_threshold;
  in.mode = config.mode;
  return est;
}

namespace {

constexpr std::uint64_t kPropagationStream = 0x5eed;

struct Draw {
  double r = 0.0;
  double db = 0.0;
  bool ok = false;
};

// Normal draw rejected until it lies inside the input's domain.
double truncated(rng::Engine& g, const Uncertain& u, double lower, bool inclusive) {
  if (u.sigma <= 0.0) return u.value;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double v = u.value + u.sigma * rng::standard_normal(g);
    if (inclusive ? v >= lower : v > lower) return v;
  }
  throw Error(ErrorCode::MonteCarloFailure, "input distribution lies outside its domain");
}

}  // namespace

PropagatedUncertainty propagate_uncertainty(const UncertainInputs& inputs,
                                            const EstimationConfig& config, std::size_t samples,
                                            std::uint64_t seed, unsigned threads) {
  config.validate();
  if (samples < 1000) throw Error(ErrorCode::InvalidParameter, "need at least 1000 samples");
  for (const auto* u : {&inputs.g2zero, &inputs.gamma1, &inputs.gamma2, &inputs.length,
                        &inputs.conversion, &inputs.k, &inputs.analysis_frequency}) {
    if (!(u->sigma >= 0.0)) throw Error(ErrorCode::InvalidParameter, "sigma must be non-negative");
  }

  std::vector<Draw> draws(samples);
  auto run = [&](std::size_t i) {
    auto g = rng::make_engine(seed, kPropagationStream, i);
    Draw& d = draws[i];
    try {
      const double g2 = truncated(g, inputs.g2zero, 2.0, false);
      const double g1 = truncated(g, inputs.gamma1, 0.0, false);
      const double g2rate = truncated(g, inputs.gamma2, 0.0, true);
      const double l = truncated(g, inputs.length, 0.0, false);
      const double enl = truncated(g, inputs.conversion, 0.0, false);
      const double k = truncated(g, inputs.k, 0.0, false);
      const double f = truncated(g, inputs.analysis_frequency, 0.0, false);
      EstimationConfig cfg = config;
      cfg.analysis_frequency = f;
      const auto cav = CavityParams::from_rates(g1, g2rate, l, enl);
      const auto est = estimate_squeezing(g2, cav, k, cfg);
      d = {est.r, est.squeezing_db, true};
    } catch (const Error&) {
      d.ok = false;
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(samples)));
  if (workers == 1) {
    for (std::size_t i = 0; i < samples; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < samples; i += workers) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  PropagatedUncertainty out;
  out.samples = samples;
  std::size_t ok = 0;
  for (const auto& d : draws) ok += d.ok ? 1 : 0;
  out.failed = samples - ok;
  if (static_cast<double>(out.failed) > 0.01 * static_cast<double>(samples) || ok < 2) {
    throw Error(ErrorCode::MonteCarloFailure,
                std::to_string(out.failed) + " of " + std::to_string(samples) + " samples failed");
  }
  // shifted two-pass sums: identical draws give exactly zero spread
  const auto first = std::find_if(draws.begin(), draws.end(), [](const Draw& d) { return d.ok; });
  const double shift_r = first->r;
  const double shift_db = first->db;
  double sum_r = 0.0, sum_db = 0.0, sq_r = 0.0, sq_db = 0.0;
  for (const auto& d : draws) {
    if (!d.ok) continue;
    const double dr = d.r - shift_r;
    const double ddb = d.db - shift_db;
    sum_r += dr, sum_db += ddb, sq_r += dr * dr, sq_db += ddb * ddb;
  }
  const auto n = static_cast<double>(ok);
  out.sigma_r = std::sqrt(std::max(0.0, (sq_r - sum_r * sum_r / n) / (n - 1.0)));
  out.sigma_db = std::sqrt(std::max(0.0, (sq_db - sum_db * sum_db / n) / (n - 1.0)));
  return out;
}

}  // namespace weaksqz
