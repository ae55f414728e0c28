#pragma once

#include <cstdint>
#include <vector>

namespace weaksqz {

/// Photon detection times of one detector channel, in integer picoseconds.
struct TimeTagStream {
  std::uint8_t channel = 0;
  std::vector<std::int64_t> timestamps;
  std::int64_t duration_ps = 0;

  std::size_t size() const { return timestamps.size(); }
  bool empty() const { return timestamps.empty(); }
  double duration() const { return static_cast<double>(duration_ps) * 1e-12; }
  /// Singles rate, s^-1.
  double rate() const { return duration_ps > 0 ? static_cast<double>(size()) / duration() : 0.0; }
  /// Non-decreasing order (what the correlator needs).
  bool is_sorted() const;
  /// Strictly increasing and inside [0, duration] (what the simulator guarantees).
  bool is_well_formed() const;

  bool operator==(const TimeTagStream&) const = default;
};

}  // namespace weaksqz
