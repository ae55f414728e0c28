#include "weaksqz_cli/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <filesystem>
#include <ostream>
#include <string>

#include "weaksqz/error.hpp"
#include "weaksqz/estimator.hpp"
#include "weaksqz/figures.hpp"
#include "weaksqz/pipeline.hpp"
#include "weaksqz/serialization.hpp"
#include "weaksqz/tag_io.hpp"
#include "weaksqz/units.hpp"

namespace weaksqz {

namespace fs = std::filesystem;

namespace {

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

[[noreturn]] void usage(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

struct SimulateArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool csv = false;
};

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  auto cfg = sim_config_from_json(parse_json_file(a.config));
  if (a.seed) cfg.seed = *a.seed;
  if (a.threads) cfg.threads = *a.threads;
  auto result = simulate(cfg);
  result.a.channel = 0;
  result.b.channel = 1;
  const std::vector<TimeTagStream> streams{result.a, result.b};
  if (a.csv) {
    write_tags_csv(streams, a.out);
  } else {
    write_tags(streams, a.out, to_json(result.truth).dump());
  }
  out << "channel 0 " << result.a.size() << " tags\n";
  out << "channel 1 " << result.b.size() << " tags\n";
  out << "pair_rate_per_s " << format_number(result.truth.pair_rate) << "\n";
  out << "expected_g2zero " << format_number(result.truth.expected_g2zero) << "\n";
  return 0;
}

struct CorrelateArgs {
  std::string in, out, norm = "singles";
  unsigned a = 0, b = 1;
  std::int64_t bin_ps = 35, center_ps = 0;
  std::size_t bins = 4000;
  unsigned threads = 1;
};

int run_correlate(const CorrelateArgs& a, std::ostream& out) {
  auto file = read_tags(a.in);
  for (unsigned ch : {a.a, a.b}) {
    if (ch >= file.channels.size()) usage(a.in + " has no channel " + std::to_string(ch));
  }
  auto hist = correlate(file.channels[a.a], file.channels[a.b], {a.bin_ps, a.bins, a.center_ps}, a.threads);
  if (a.norm == "singles") {
    hist = normalize(std::move(hist), NormalizationMode::Singles);
  } else if (a.norm == "tail") {
    hist = normalize(std::move(hist), NormalizationMode::TailBaseline);
  } else if (a.norm != "none") {
    usage("--norm must be singles, tail or none");
  }
  write_histogram_csv(hist, a.out);
  out << "bins " << hist.num_bins() << "\n";
  out << "coincidences " << hist.total_counts() << "\n";
  out << "n_a " << hist.n_a << "\nn_b " << hist.n_b << "\n";
  return 0;
}

struct FitCombArgs {
  std::string hist, out;
};

int run_fit_comb(const FitCombArgs& a, std::ostream& out) {
  auto hist = read_histogram_csv(a.hist);
  if (!hist.normalized()) hist = normalize(std::move(hist));
  const auto fit = fit_comb(hist);
  write_json_file(a.out, to_json(fit));
  out << fit_text(fit.fit);
  out << "peak_g2 " << format_number(fit.params.peak_value()) << "\n";
  return fit.fit.converged ? 0 : 2;
}

struct FitRateArgs {
  std::string data, out;
  double eta = 0.404;
  bool offset = false;
};

int run_fit_rate(const FitRateArgs& a, std::ostream& out) {
  const auto points = read_rate_csv(a.data);
  const auto fit = fit_rate_linear(points, a.eta, a.offset ? RateModel::WithOffset : RateModel::ThroughOrigin);
  write_json_file(a.out, to_json(fit));
  out << fit_text(fit.fit);
  out << "k_MHz_per_mW " << format_number(units::k_to_MHz_per_mW(fit.k)) << " +- "
      << format_number(units::k_to_MHz_per_mW(fit.sigma_k)) << "\n";
  return 0;
}

struct EstimateArgs {
  double g2zero = 0.0;
  double sigma_g2 = 0.0;
  std::string params, k = "104.5", eta_esc = "gammas", pth = "losses", mode = "chain", out;
  double sigma_k = 0.0;
  double freq_hz = 800e3;
  double transmission = 0.11;
  double enl = 0.02;
  std::size_t samples = 2000;
  std::uint64_t seed = 1;
};

int run_estimate(const EstimateArgs& a, std::ostream& out) {
  EstimationConfig cfg;
  cfg.mode = formula_mode_from_string(a.mode);
  cfg.analysis_frequency = a.freq_hz;
  if (a.eta_esc != "gammas") {
    const auto v = parse_number(a.eta_esc);
    if (!v) usage("--eta-esc must be 'gammas' or a number");
    cfg.escape_efficiency = *v;
  }
  if (a.pth != "losses") {
    const auto v = parse_number(a.pth);
    if (!v) usage("--pth must be 'losses' or a power in W");
    cfg.threshold_power = *v;
  }
  cfg.validate();

  double k = 0.0, sigma_k = units::k_from_MHz_per_mW(a.sigma_k);
  if (const auto v = parse_number(a.k)) {
    k = units::k_from_MHz_per_mW(*v);
  } else {
    const auto j = parse_json_file(a.k);
    if (!j.contains("k_MHz_per_mW")) usage(a.k + " is not a rate fit report");
    k = units::k_from_MHz_per_mW(j["k_MHz_per_mW"].get<double>());
    if (a.sigma_k == 0.0) sigma_k = units::k_from_MHz_per_mW(j.value("sigma_k_MHz_per_mW", 0.0));
  }

  CavityEstimate cav;
  const auto pj = parse_json_file(a.params);
  if (pj.is_object() && pj.value("model", "") == "comb") {
    cav = cavity_from_comb(comb_fit_from_json(pj), a.transmission, a.enl);
  } else if (pj.is_object() && pj.contains("cavity")) {
    cav.cavity = cavity_from_json(pj["cavity"]);
  } else {
    cav.cavity = cavity_from_json(pj);
  }

  auto est = estimate_squeezing(a.g2zero, cav.cavity, k, cfg);
  UncertainInputs in;
  in.g2zero = {a.g2zero, a.sigma_g2};
  in.gamma1 = {cav.cavity.gamma1, cav.sigma_gamma1};
  in.gamma2 = {cav.cavity.gamma2, cav.sigma_gamma2};
  in.length = {cav.cavity.length, cav.sigma_length};
  in.conversion = {cav.cavity.conversion, 0.0};
  in.k = {k, sigma_k};
  in.analysis_frequency = {a.freq_hz, 0.0};
  const auto unc = propagate_uncertainty(in, cfg, a.samples, a.seed);
  est.sigma_r = unc.sigma_r;
  est.sigma_db = unc.sigma_db;

  auto j = to_json(est);
  j["uncertainty_samples"] = unc.samples;
  j["uncertainty_failed"] = unc.failed;
  if (!a.out.empty()) write_json_file(a.out, j);
  out << report_text(j);
  return 0;
}

struct PipelineArgs {
  std::string config, out, hist_out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

int run_pipeline_cmd(const PipelineArgs& a, std::ostream& out) {
  const fs::path config_path(a.config);
  auto cfg = pipeline_config_from_json(parse_json_file(config_path), config_path.parent_path());
  if (a.seed) {
    if (auto* sim = std::get_if<SimConfig>(&cfg.source)) sim->seed = *a.seed;
  }
  if (a.threads) {
    cfg.threads = *a.threads;
    if (auto* sim = std::get_if<SimConfig>(&cfg.source)) sim->threads = *a.threads;
  }
  const auto report = run_pipeline(cfg);
  const auto j = to_json(report);
  write_json_file(a.out, j);
  if (!a.hist_out.empty()) write_histogram_csv(report.histogram, a.hist_out);
  out << report_text(j);
  return 0;
}

struct FiguresArgs {
  std::string out_dir = ".";
};

int run_figures(const FiguresArgs& a, std::ostream& out) {
  for (const auto& path : write_figures(FigureParams{}, a.out_dir)) out << path.string() << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weak squeezing from photon statistics: simulate, correlate, fit and estimate."};
  app.name("weaksqz");
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a two-detector tag stream");
  c_sim->add_option("--config", sim.config, "Simulation config (JSON)")->required()->check(CLI::ExistingFile);
  c_sim->add_option("--out", sim.out, "Output tag file")->required();
  c_sim->add_option("--seed", sim.seed, "Override the config seed");
  c_sim->add_option("--threads", sim.threads, "Worker threads");
  c_sim->add_flag("--csv", sim.csv, "Write CSV instead of SQZT");

  CorrelateArgs cor;
  auto* c_cor = app.add_subcommand("correlate", "Coincidence histogram of two channels");
  c_cor->add_option("--in", cor.in, "Tag file (SQZT or CSV)")->required()->check(CLI::ExistingFile);
  c_cor->add_option("--a", cor.a, "Start channel")->capture_default_str();
  c_cor->add_option("--b", cor.b, "Stop channel")->capture_default_str();
  c_cor->add_option("--bin-ps", cor.bin_ps, "Bin width in ps")->capture_default_str();
  c_cor->add_option("--bins", cor.bins, "Number of bins")->capture_default_str();
  c_cor->add_option("--center-ps", cor.center_ps, "Window center in ps")->capture_default_str();
  c_cor->add_option("--norm", cor.norm, "singles, tail or none")->capture_default_str();
  c_cor->add_option("--threads", cor.threads, "Worker threads")->capture_default_str();
  c_cor->add_option("--out", cor.out, "Histogram CSV")->required();

  FitCombArgs fc;
  auto* c_fc = app.add_subcommand("fit-comb", "Fit the comb model to a histogram");
  c_fc->add_option("--hist", fc.hist, "Histogram CSV")->required()->check(CLI::ExistingFile);
  c_fc->add_option("--out", fc.out, "Fit report (JSON)")->required();

  FitRateArgs fr;
  auto* c_fr = app.add_subcommand("fit-rate", "Linear fit of the pair rate against pump power");
  c_fr->add_option("--data", fr.data, "CSV with P_mW,R_meas,sigma")->required()->check(CLI::ExistingFile);
  c_fr->add_option("--eta", fr.eta, "Counting efficiency t f d")->capture_default_str();
  c_fr->add_flag("--offset", fr.offset, "Fit an intercept as well");
  c_fr->add_option("--out", fr.out, "Fit report (JSON)")->required();

  EstimateArgs es;
  auto* c_es = app.add_subcommand("estimate", "Squeezing parameter from a measured g2(0)");
  c_es->add_option("--g2zero", es.g2zero, "Measured g2(0)")->required();
  c_es->add_option("--sigma-g2", es.sigma_g2, "Uncertainty of g2(0)")->capture_default_str();
  c_es->add_option("--params", es.params, "Comb fit report or cavity JSON")->required()->check(CLI::ExistingFile);
  c_es->add_option("--k", es.k, "k in MHz/mW, or a fit-rate report")->capture_default_str();
  c_es->add_option("--sigma-k", es.sigma_k, "Uncertainty of k in MHz/mW")->capture_default_str();
  c_es->add_option("--freq-hz", es.freq_hz, "Analysis frequency in Hz")->capture_default_str();
  c_es->add_option("--eta-esc", es.eta_esc, "'gammas' or an explicit escape efficiency")->capture_default_str();
  c_es->add_option("--pth", es.pth, "'losses' or a measured threshold in W")->capture_default_str();
  c_es->add_option("--mode", es.mode, "chain or eq5")->capture_default_str();
  c_es->add_option("--transmission", es.transmission, "Output coupler T (comb fit input)")->capture_default_str();
  c_es->add_option("--enl", es.enl, "Conversion E_NL in 1/W (comb fit input)")->capture_default_str();
  c_es->add_option("--samples", es.samples, "Monte Carlo samples")->capture_default_str();
  c_es->add_option("--seed", es.seed, "Monte Carlo seed")->capture_default_str();
  c_es->add_option("--out", es.out, "Report (JSON)");

  PipelineArgs pl;
  auto* c_pl = app.add_subcommand("pipeline", "Run the full chain from tags to squeezing");
  c_pl->add_option("--config", pl.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  c_pl->add_option("--out", pl.out, "Report (JSON)")->required();
  c_pl->add_option("--hist-out", pl.hist_out, "Also write the normalized histogram CSV");
  c_pl->add_option("--seed", pl.seed, "Override the simulation seed");
  c_pl->add_option("--threads", pl.threads, "Worker threads");

  FiguresArgs fg;
  auto* c_fg = app.add_subcommand("figures", "Write plot data for the model curves");
  c_fg->add_option("--out-dir", fg.out_dir, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "weaksqz: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 1;
  }

  try {
    if (c_sim->parsed()) return run_simulate(sim, out);
    if (c_cor->parsed()) return run_correlate(cor, out);
    if (c_fc->parsed()) return run_fit_comb(fc, out);
    if (c_fr->parsed()) return run_fit_rate(fr, out);
    if (c_es->parsed()) return run_estimate(es, out);
    if (c_pl->parsed()) return run_pipeline_cmd(pl, out);
    if (c_fg->parsed()) return run_figures(fg, out);
  } catch (const Error& e) {
    err << "weaksqz: " << e.what() << "\n";
    return is_numerical(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "weaksqz: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace weaksqz
