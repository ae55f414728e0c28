#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "weaksqz/opo_model.hpp"

namespace weaksqz {

enum class FormulaMode {
  ComposedChain,  ///< invert the g2(0)-pump law, then the quadrature variances
  LiteralEq5,     ///< closed form as typeset: frequency term without the factor 4
};

std::string to_string(FormulaMode mode);
FormulaMode formula_mode_from_string(const std::string& s);

struct EstimationConfig {
  FormulaMode mode = FormulaMode::ComposedChain;
  /// Explicit eta_esc; gamma1/(gamma1+gamma2) when empty.
  std::optional<double> escape_efficiency;
  /// Measured P_th in W; (T+L)^2/(4 E_NL) when empty.
  std::optional<double> threshold_power;
  double analysis_frequency = 800e3;  ///< Hz

  void validate() const;
};

struct EstimateInputs {
  double g2zero = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double length = 0.0;
  double conversion = 0.0;
  double k = 0.0;
  double analysis_frequency = 0.0;
  double escape_efficiency = 0.0;
  double threshold_power = 0.0;
  bool explicit_escape_efficiency = false;
  bool measured_threshold = false;
  FormulaMode mode = FormulaMode::ComposedChain;
};

struct SqueezingEstimate {
  double r = 0.0;
  double sigma_r = 0.0;
  double v_minus = 1.0;
  double v_plus = 1.0;
  double squeezing_db = 0.0;  ///< 10 log10 e^{-2r}
  double sigma_db = 0.0;
  double pump_power = 0.0;    ///< inferred from g2(0)
  EstimateInputs inputs;
};

/// Squeezing parameter from a measured g2(0), the cavity and the rate calibration k.
SqueezingEstimate estimate_squeezing(double g2zero, const CavityParams& cavity, double k,
                                     const EstimationConfig& config);

struct Uncertain {
  double value = 0.0;
  double sigma = 0.0;
};

struct UncertainInputs {
  Uncertain g2zero;
  Uncertain gamma1;
  Uncertain gamma2;
  Uncertain length;
  Uncertain conversion;
  Uncertain k;
  Uncertain analysis_frequency;
};

struct PropagatedUncertainty {
  double sigma_r = 0.0;
  double sigma_db = 0.0;
  std::size_t samples = 0;
  std::size_t failed = 0;
};

/// Monte Carlo propagation: independent normals truncated to each input's
/// domain, one counter-based sub-stream per sample. Fails when more than 1%
/// of the samples leave the model's domain.
PropagatedUncertainty propagate_uncertainty(const UncertainInputs& inputs,
                                            const EstimationConfig& config, std::size_t samples,
                                            std::uint64_t seed, unsigned threads = 1);

}  // namespace weaksqz
