#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "weaksqz/fitters.hpp"
#include "weaksqz/pipeline.hpp"
#include "weaksqz/stream_sim.hpp"

namespace weaksqz {

using Json = nlohmann::ordered_json;

// Config files use the experimental units, spelled out in the key names
// (uW, MHz_per_mW, ns, ps, per_s, ...). Unknown keys are rejected.

/// {"gamma1_per_s", "gamma2_per_s", "length_m", "conversion_per_W"}
CavityParams cavity_from_json(const Json& j);
Json to_json(const CavityParams& cavity);

/// Detector jitter may be given as "jitter_ps": <number> or "matched"
/// (matched_jitter_fwhm of the cavity).
SimConfig sim_config_from_json(const Json& j);
Json to_json(const SimConfig& config);

TruthRecord truth_from_json(const Json& j);
Json to_json(const TruthRecord& truth);

PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});

EstimationConfig estimation_from_json(const Json& j);
Json to_json(const EstimationConfig& config);

/// Parameter table: names, values, sigmas and units, plus fit diagnostics.
Json to_json(const FitResult& fit);
Json to_json(const CombFit& fit);
Json to_json(const RateFit& fit);

/// Reads fit reports back.
FitResult fit_result_from_json(const Json& j);
CombFit comb_fit_from_json(const Json& j);

/// One "name value sigma unit" line per parameter.
std::string fit_text(const FitResult& fit);

/// Report as JSON. The top level always carries r, sigma_r, squeezing_db,
/// sigma_db, g2_zero, gamma1, gamma2, k, f, eta_esc, p_th and formula_mode;
/// "stages" holds the intermediate values.
Json to_json(const Report& report);
Json to_json(const SqueezingEstimate& estimate);

/// Human-readable summary of a report JSON.
std::string report_text(const Json& report);

/// Problems found when checking a report against the fixed field layout;
/// empty when valid.
std::vector<std::string> validate_report(const Json& report);

Json parse_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace weaksqz
