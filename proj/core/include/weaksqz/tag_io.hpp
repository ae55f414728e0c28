#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weaksqz/correlator.hpp"
#include "weaksqz/fitters.hpp"
#include "weaksqz/time_tags.hpp"

namespace weaksqz {

// SQZT tag file, all integers little-endian:
//   header  "SQZT" | u16 version | u8 channel_count | u8 flags | u64 duration_ps
//   records u64 timestamp_ps | u8 channel, merged in (timestamp, channel) order
//   trailer u32 n | n bytes of UTF-8 JSON | u32 n     (present when flags bit 0 is set)
inline constexpr char kTagMagic[4] = {'S', 'Q', 'Z', 'T'};
inline constexpr std::uint16_t kTagVersion = 1;
inline constexpr std::uint8_t kTagFlagTruth = 0x01;
inline constexpr std::size_t kTagHeaderSize = 16;
inline constexpr std::size_t kTagRecordSize = 9;

struct TagFile {
  /// One stream per channel id, indexed by channel.
  std::vector<TimeTagStream> channels;
  std::int64_t duration_ps = 0;
  /// JSON text of the appended truth record, verbatim.
  std::optional<std::string> truth;
};

/// Reads an SQZT file, or a CSV file with header `timestamp_ps,channel`
/// (optionally preceded by a `# duration_ps=N` line).
TagFile read_tags(const std::filesystem::path& path);

/// Writes streams (each sorted) as SQZT. Channel ids must be distinct; the
/// file duration is the largest stream duration.
void write_tags(std::span<const TimeTagStream> streams, const std::filesystem::path& path,
                const std::optional<std::string>& truth = std::nullopt);

/// Same content as CSV.
void write_tags_csv(std::span<const TimeTagStream> streams, const std::filesystem::path& path);

/// In-memory SQZT encoding and decoding, used by the file functions.
std::vector<std::uint8_t> encode_tags(std::span<const TimeTagStream> streams,
                                      const std::optional<std::string>& truth = std::nullopt);
TagFile decode_tags(std::span<const std::uint8_t> bytes);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Histogram CSV `tau_ps,counts,g2` (bin centers; g2 empty when not
/// normalized) plus a `<path>.meta.json` sidecar with the totals and the
/// exact bin geometry.
void write_histogram_csv(const CorrelationHistogram& hist, const std::filesystem::path& path);

/// Reads a histogram CSV. Without the sidecar the geometry is inferred from
/// the bin centers and the singles totals are zero.
CorrelationHistogram read_histogram_csv(const std::filesystem::path& path);

std::filesystem::path histogram_meta_path(const std::filesystem::path& csv);

/// Rate-scan CSV `P_mW,R_meas,sigma` (rates in s^-1).
std::vector<RatePoint> read_rate_csv(const std::filesystem::path& path);
void write_rate_csv(std::span<const RatePoint> points, const std::filesystem::path& path);

/// Plain numeric CSV with a header row.
void write_csv(const std::filesystem::path& path, std::span<const std::string> header,
               std::span<const std::vector<double>> rows);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace weaksqz
