#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "weaksqz/opo_model.hpp"
#include "weaksqz/units.hpp"

namespace weaksqz {

/// Model parameters behind the plot-data emitters; defaults describe the
/// 852 nm PPKTP cavity of the demo configuration.
struct FigureParams {
  double gamma1 = 82.1e6;
  double gamma2 = 6.9e6;
  double length = 0.4017;
  double conversion = 0.02;
  double k = 1.045e11;                  ///< s^-1 W^-1
  double counting_efficiency = 0.404;   ///< t f d = 0.85 * 0.95 * 0.5
  double escape_efficiency = 0.7;
  double threshold_power = 0.1653;      ///< W
  double analysis_frequency = 800e3;    ///< Hz
  DetectionEfficiencyHD homodyne{0.95, 0.97, 0.99};
  CombModelParams comb{16.0, 0.064, units::two_pi * 14.16e6, -0.98e-9, 185e-12, 1.34e-9};

  CavityParams cavity() const;
};

struct FigureTable {
  std::string name;  ///< file stem, e.g. "fig2"
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Detected squeezed / anti-squeezed noise (dB) versus pump power.
FigureTable figure2(const FigureParams& p);
/// Comb-shaped g2(tau), 4000 bins of 35 ps around tau_0.
FigureTable figure3(const FigureParams& p);
/// Measured pair rate eta k P versus pump power.
FigureTable figure4(const FigureParams& p);
/// g2(0) versus pump power.
FigureTable figure5(const FigureParams& p);
/// g2(0) and singles rate versus pump power for scaled counting efficiencies.
FigureTable figure6(const FigureParams& p);
/// r and squeezing in dB versus g2(0), both formula modes.
FigureTable figure7(const FigureParams& p);

std::vector<FigureTable> all_figures(const FigureParams& p);

/// Writes <dir>/<name>.csv for every figure; returns the paths written.
std::vector<std::filesystem::path> write_figures(const FigureParams& p, const std::filesystem::path& dir);

}  // namespace weaksqz
