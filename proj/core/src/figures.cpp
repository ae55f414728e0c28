#include "weaksqz/figures.hpp"

#include <cmath>

#include "weaksqz/estimator.hpp"
#include "weaksqz/tag_io.hpp"
#include "weaksqz/units.hpp"

namespace weaksqz {

CavityParams FigureParams::cavity() const {
  return CavityParams::from_rates(gamma1, gamma2, length, conversion);
}

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

std::vector<double> logspace(double lo, double hi, std::size_t n) {
  auto v = linspace(std::log(lo), std::log(hi), n);
  for (auto& x : v) x = std::exp(x);
  return v;
}

}  // namespace

FigureTable figure2(const FigureParams& p) {
  FigureTable t{"fig2", {"pump_mW", "v_minus", "v_plus", "v_minus_db", "v_plus_db"}, {}};
  const auto cav = p.cavity().with_threshold(p.threshold_power);
  for (double mw : linspace(0.5, 160.0, 320)) {
    const auto v = detected_variances(cav, mw * units::mW, AnalysisFrequency{p.analysis_frequency}, p.homodyne,
                                      p.escape_efficiency);
    t.rows.push_back({mw, v.v_minus, v.v_plus, to_decibel(v.v_minus), to_decibel(v.v_plus)});
  }
  return t;
}

FigureTable figure3(const FigureParams& p) {
  FigureTable t{"fig3", {"tau_ns", "g2"}, {}};
  const std::size_t bins = 4000;
  const double width = 35e-12;
  const double start = p.comb.delay - 0.5 * static_cast<double>(bins) * width;
  for (std::size_t i = 0; i < bins; ++i) {
    const double tau = start + (static_cast<double>(i) + 0.5) * width;
    t.rows.push_back({tau / units::ns, comb_model_eval(p.comb, tau)});
  }
  return t;
}

FigureTable figure4(const FigureParams& p) {
  FigureTable t{"fig4", {"pump_uW", "pair_rate_per_s", "measured_rate_per_s"}, {}};
  for (double uw : linspace(0.0, 200.0, 41)) {
    const double rate = p.k * uw * units::uW;
    t.rows.push_back({uw, rate, p.counting_efficiency * rate});
  }
  return t;
}

FigureTable figure5(const FigureParams& p) {
  FigureTable t{"fig5", {"pump_uW", "g2zero"}, {}};
  const auto cav = p.cavity();
  const PumpCalibration cal{p.k};
  for (double uw : logspace(5.0, 200.0, 100)) {
    t.rows.push_back({uw, g2zero_from_pump(cav, cal, uw * units::uW)});
  }
  return t;
}

FigureTable figure6(const FigureParams& p) {
  FigureTable t{"fig6", {"pump_uW", "efficiency", "g2zero", "singles_rate_per_s"}, {}};
  const auto cav = p.cavity();
  const PumpCalibration cal{p.k};
  for (double scale : {1.0, 0.6, 0.2}) {
    const double eta = scale * p.counting_efficiency;
    for (double uw : logspace(5.0, 200.0, 40)) {
      const double pump = uw * units::uW;
      t.rows.push_back({uw, eta, g2zero_from_pump(cav, cal, pump), 0.5 * eta * cal.pair_rate(pump)});
    }
  }
  return t;
}

FigureTable figure7(const FigureParams& p) {
  FigureTable t{"fig7",
                {"pump_uW", "g2zero", "r", "squeezing_db", "r_eta_gammas", "squeezing_db_eta_gammas", "r_literal",
                 "squeezing_db_literal"},
                {}};
  const auto cav = p.cavity();
  const PumpCalibration cal{p.k};
  EstimationConfig explicit_eta;
  explicit_eta.escape_efficiency = p.escape_efficiency;
  explicit_eta.threshold_power = p.threshold_power;
  explicit_eta.analysis_frequency = p.analysis_frequency;
  EstimationConfig gammas_eta = explicit_eta;
  gammas_eta.escape_efficiency.reset();
  EstimationConfig literal = explicit_eta;
  literal.mode = FormulaMode::LiteralEq5;
  for (double uw : logspace(5.0, 200.0, 100)) {
    const double g2 = g2zero_from_pump(cav, cal, uw * units::uW);
    const auto a = estimate_squeezing(g2, cav, p.k, explicit_eta);
    const auto b = estimate_squeezing(g2, cav, p.k, gammas_eta);
    const auto c = estimate_squeezing(g2, cav, p.k, literal);
    t.rows.push_back({uw, g2, a.r, a.squeezing_db, b.r, b.squeezing_db, c.r, c.squeezing_db});
  }
  return t;
}

std::vector<FigureTable> all_figures(const FigureParams& p) {
  return {figure2(p), figure3(p), figure4(p), figure5(p), figure6(p), figure7(p)};
}

std::vector<std::filesystem::path> write_figures(const FigureParams& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& table : all_figures(p)) {
    const auto path = dir / (table.name + ".csv");
    write_csv(path, table.header, table.rows);
    written.push_back(path);
  }
  return written;
}

}  // namespace weaksqz
