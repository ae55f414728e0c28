#include "weaksqz/correlator.hpp"

#include <algorithm>
#include <span>
#include <cmath>
#include <numeric>
#include <thread>

#include "weaksqz/error.hpp"

namespace weaksqz {

double CorrelationHistogram::center_ps(std::size_t i) const {
  return 0.5 * static_cast<double>(window_start_half_ps) +
         (static_cast<double>(i) + 0.5) * static_cast<double>(bin_width_ps);
}

std::uint64_t CorrelationHistogram::total_counts() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

namespace {

std::int64_t ceil_half(std::int64_t v) {
  // ceil(v / 2) for signed v
  return v >= 0 ? (v + 1) / 2 : -((-v) / 2);
}

struct Sweep {
  std::int64_t lo2;      // 2 * lower edge
  std::int64_t d_begin;  // smallest integer delay inside the window
  std::int64_t d_end;    // one past the largest
  std::int64_t width2;   // 2 * bin width

  void run(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
           std::vector<std::uint64_t>& counts) const {
    if (a.empty()) return;
    auto j0 = static_cast<std::size_t>(
        std::lower_bound(b.begin(), b.end(), a.front() + d_begin) - b.begin());
    for (const auto ta : a) {
      const std::int64_t first = ta + d_begin;
      while (j0 < b.size() && b[j0] < first) ++j0;
      const std::int64_t stop = ta + d_end;
      for (std::size_t j = j0; j < b.size() && b[j] < stop; ++j) {
        const std::int64_t d2 = 2 * (b[j] - ta) - lo2;
        ++counts[static_cast<std::size_t>(d2 / width2)];
      }
    }
  }
};

}  // namespace

CorrelationHistogram correlate(const TimeTagStream& a, const TimeTagStream& b,
                               const CorrelationWindow& window, unsigned threads) {
  if (window.num_bins < 1 || window.bin_width_ps < 1) {
    throw Error(ErrorCode::InvalidParameter, "window needs at least one bin of positive width");
  }
  if (a.empty() || b.empty()) {
    throw Error(ErrorCode::EmptyStream, "both channels need at least one tag");
  }
  if (!a.is_sorted() || !b.is_sorted()) {
    throw Error(ErrorCode::UnsortedInput, "time tags must be sorted");
  }

  CorrelationHistogram hist;
  hist.bin_width_ps = window.bin_width_ps;
  const auto span2 = static_cast<std::int64_t>(window.num_bins) * window.bin_width_ps;
  hist.window_start_half_ps = 2 * window.center_ps - span2;
  hist.counts.assign(window.num_bins, 0);
  hist.n_a = a.size();
  hist.n_b = b.size();
  hist.acquisition_time = std::min(a.duration(), b.duration());

  const Sweep sweep{hist.window_start_half_ps, ceil_half(hist.window_start_half_ps),
                    ceil_half(hist.window_start_half_ps + 2 * span2), 2 * window.bin_width_ps};

  const std::span<const std::int64_t> ta(a.timestamps);
  const std::span<const std::int64_t> tb(b.timestamps);
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, ta.size() / 4096));
  if (workers == 1) {
    sweep.run(ta, tb, hist.counts);
    return hist;
  }

  std::vector<std::vector<std::uint64_t>> partial(workers, std::vector<std::uint64_t>(window.num_bins, 0));
  std::vector<std::thread> pool;
  const std::size_t slice = (ta.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(ta.size(), w * slice);
    const std::size_t end = std::min(ta.size(), begin + slice);
    pool.emplace_back([&, begin, end, w] { sweep.run(ta.subspan(begin, end - begin), tb, partial[w]); });
  }
  for (auto& th : pool) th.join();
  for (const auto& p : partial) {
    for (std::size_t i = 0; i < p.size(); ++i) hist.counts[i] += p[i];
  }
  return hist;
}

CorrelationHistogram normalize(CorrelationHistogram hist, NormalizationMode mode,
                               double tail_fraction) {
  if (hist.n_a == 0 || hist.n_b == 0 || !(hist.acquisition_time > 0.0)) {
    throw Error(ErrorCode::MissingTotals, "singles counts and acquisition time are required");
  }
  const double accidental = static_cast<double>(hist.n_a) * static_cast<double>(hist.n_b) *
                            hist.bin_width() / hist.acquisition_time;
  hist.g2.resize(hist.counts.size());
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    hist.g2[i] = static_cast<double>(hist.counts[i]) / accidental;
  }
  if (mode == NormalizationMode::TailBaseline) {
    const auto n = hist.g2.size();
    const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(tail_fraction * static_cast<double>(n)));
    if (2 * tail > n) throw Error(ErrorCode::InvalidParameter, "tail fraction too large");
    double sum = 0.0;
    for (std::size_t i = 0; i < tail; ++i) sum += hist.g2[i] + hist.g2[n - 1 - i];
    const double baseline = sum / static_cast<double>(2 * tail);
    if (!(baseline > 0.0)) throw Error(ErrorCode::MissingTotals, "empty tail baseline");
    for (auto& v : hist.g2) v /= baseline;
  }
  return hist;
}

G2Value g2_at_zero(const CorrelationHistogram& hist, const G2ZeroMethod& method) {
  if (!hist.normalized()) throw Error(ErrorCode::NotNormalized, "histogram has no g2 values");
  if (std::holds_alternative<PeakBin>(method)) {
    const auto it = std::max_element(hist.g2.begin(), hist.g2.end());
    const auto i = static_cast<std::size_t>(it - hist.g2.begin());
    const double n = std::max<double>(1.0, static_cast<double>(hist.counts[i]));
    return {*it, *it / std::sqrt(n)};
  }
  const auto& fit = std::get<CombFitEstimate>(method);
  const auto& p = fit.params;
  const double d1 = p.N2 + 1.0;
  const double d2 = p.N1;
  const double var = d1 * d1 * fit.sigma_N1 * fit.sigma_N1 + d2 * d2 * fit.sigma_N2 * fit.sigma_N2 +
                     2.0 * d1 * d2 * fit.cov_N1_N2;
  return {p.peak_value(), std::sqrt(std::max(0.0, var))};
}

}  // namespace weaksqz
