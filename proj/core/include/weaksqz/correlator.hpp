#pragma once

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

#include "weaksqz/opo_model.hpp"
#include "weaksqz/time_tags.hpp"

namespace weaksqz {

/// Start-stop coincidence histogram of tau = t_b - t_a.
///
/// Bin i covers [lo + i*w, lo + (i+1)*w) with lo = center - num_bins*w/2.
/// Bin edges are kept in half-picosecond units so that windows with an odd
/// total width stay exact.
struct CorrelationHistogram {
  std::int64_t bin_width_ps = 35;
  std::int64_t window_start_half_ps = 0;  ///< 2 * lo
  std::vector<std::uint64_t> counts;
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  double acquisition_time = 0.0;  ///< s
  std::vector<double> g2;         ///< empty until normalized

  std::size_t num_bins() const { return counts.size(); }
  double bin_width() const { return static_cast<double>(bin_width_ps) * 1e-12; }
  /// Center of bin i, ps.
  double center_ps(std::size_t i) const;
  /// Center of bin i, s.
  double center(std::size_t i) const { return center_ps(i) * 1e-12; }
  double tau_min() const { return center(0); }
  bool normalized() const { return !g2.empty() && g2.size() == counts.size(); }
  std::uint64_t total_counts() const;
};

struct CorrelationWindow {
  std::int64_t bin_width_ps = 35;
  std::size_t num_bins = 4000;
  std::int64_t center_ps = 0;
};

/// Two-pointer sweep, O(N_a + N_b + matches). `threads` > 1 splits channel A
/// into slices; the result is identical to the serial sweep.
CorrelationHistogram correlate(const TimeTagStream& a, const TimeTagStream& b,
                               const CorrelationWindow& window, unsigned threads = 1);

enum class NormalizationMode {
  Singles,       ///< counts * T / (n_a n_b w)
  TailBaseline,  ///< singles normalization rescaled so the outer tails average to 1
};

/// Fills g2. Idempotent. `tail_fraction` is the share of bins on each side
/// used as the baseline in TailBaseline mode.
CorrelationHistogram normalize(CorrelationHistogram hist,
                               NormalizationMode mode = NormalizationMode::Singles,
                               double tail_fraction = 0.1);

struct PeakBin {};

struct CombFitEstimate {
  CombModelParams params;
  double sigma_N1 = 0.0;
  double sigma_N2 = 0.0;
  double cov_N1_N2 = 0.0;
};

using G2ZeroMethod = std::variant<PeakBin, CombFitEstimate>;

struct G2Value {
  double value = 0.0;
  double sigma = 0.0;
};

G2Value g2_at_zero(const CorrelationHistogram& hist, const G2ZeroMethod& method);

}  // namespace weaksqz
