#include "weaksqz/tag_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "weaksqz/error.hpp"

namespace weaksqz {

namespace fs = std::filesystem;

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

// Channel ids must be distinct and each stream sorted.
void check_streams(std::span<const TimeTagStream> streams) {
  std::vector<bool> seen(256, false);
  for (const auto& s : streams) {
    if (seen[s.channel]) {
      throw Error(ErrorCode::InvalidParameter, "channel " + std::to_string(s.channel) + " given twice");
    }
    seen[s.channel] = true;
    if (!s.is_sorted()) {
      throw Error(ErrorCode::UnsortedChannel, "channel " + std::to_string(s.channel) + " is not sorted");
    }
    if (!s.empty() && s.timestamps.front() < 0) {
      throw Error(ErrorCode::InvalidParameter, "negative timestamp in channel " + std::to_string(s.channel));
    }
  }
}

std::int64_t file_duration(std::span<const TimeTagStream> streams) {
  std::int64_t duration = 0;
  for (const auto& s : streams) {
    duration = std::max(duration, s.duration_ps);
    if (!s.empty()) duration = std::max(duration, s.timestamps.back());
  }
  return duration;
}

// Visits all tags in (timestamp, channel) order.
template <typename F>
void merge_streams(std::span<const TimeTagStream> streams, F&& visit) {
  std::vector<std::size_t> head(streams.size(), 0);
  for (;;) {
    std::size_t best = streams.size();
    for (std::size_t i = 0; i < streams.size(); ++i) {
      if (head[i] >= streams[i].size()) continue;
      if (best == streams.size()) {
        best = i;
        continue;
      }
      const auto t = streams[i].timestamps[head[i]];
      const auto tb = streams[best].timestamps[head[best]];
      if (t < tb || (t == tb && streams[i].channel < streams[best].channel)) best = i;
    }
    if (best == streams.size()) return;
    visit(streams[best].timestamps[head[best]], streams[best].channel);
    ++head[best];
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

template <typename T>
T parse_field(std::string_view s, std::size_t line_no) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::BadFormat,
                "line " + std::to_string(line_no) + ": cannot parse '" + std::string(s) + "'");
  }
  return v;
}

// Lines of a text file with their 1-based numbers, blank lines skipped.
std::vector<std::pair<std::size_t, std::string_view>> lines_of(std::string_view text) {
  std::vector<std::pair<std::size_t, std::string_view>> out;
  std::size_t start = 0, number = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    const auto line = trim(text.substr(start, end - start));
    if (!line.empty()) out.emplace_back(number, line);
    start = end + 1;
  }
  return out;
}

void expect_header(std::string_view got, std::string_view want, const fs::path& path) {
  if (got != want) {
    throw Error(ErrorCode::BadFormat,
                path.string() + ": expected header '" + std::string(want) + "', got '" + std::string(got) + "'");
  }
}

TagFile read_tags_csv(std::string_view text, const fs::path& path) {
  auto lines = lines_of(text);
  std::optional<std::int64_t> duration;
  std::size_t i = 0;
  if (i < lines.size() && lines[i].second.starts_with("# duration_ps=")) {
    duration = parse_field<std::int64_t>(lines[i].second.substr(14), lines[i].first);
    ++i;
  }
  if (i >= lines.size()) throw Error(ErrorCode::BadFormat, path.string() + ": missing CSV header");
  expect_header(lines[i].second, "timestamp_ps,channel", path);
  ++i;

  TagFile file;
  std::int64_t max_t = 0;
  for (; i < lines.size(); ++i) {
    const auto fields = split(lines[i].second);
    if (fields.size() != 2) throw Error(ErrorCode::BadFormat, "line " + std::to_string(lines[i].first) + ": expected 2 fields");
    const auto t = parse_field<std::int64_t>(fields[0], lines[i].first);
    const auto ch = parse_field<unsigned>(fields[1], lines[i].first);
    if (t < 0 || ch > 255) throw Error(ErrorCode::BadFormat, "line " + std::to_string(lines[i].first) + ": value out of range");
    if (ch >= file.channels.size()) {
      const auto old = file.channels.size();
      file.channels.resize(ch + 1);
      for (auto c = old; c <= ch; ++c) file.channels[c].channel = static_cast<std::uint8_t>(c);
    }
    auto& ts = file.channels[ch].timestamps;
    if (!ts.empty() && t < ts.back()) {
      throw Error(ErrorCode::UnsortedChannel, "channel " + std::to_string(ch) + " goes back in time at line " +
                                                  std::to_string(lines[i].first));
    }
    ts.push_back(t);
    max_t = std::max(max_t, t);
  }
  file.duration_ps = duration.value_or(max_t);
  if (file.duration_ps < max_t) throw Error(ErrorCode::BadFormat, "duration_ps is below the last timestamp");
  for (auto& s : file.channels) s.duration_ps = file.duration_ps;
  return file;
}

std::vector<std::uint8_t> read_binary(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<std::uint8_t> bytes(size);
  in.seekg(0);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
  }
  return bytes;
}

void write_binary(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_tags(std::span<const TimeTagStream> streams,
                                      const std::optional<std::string>& truth) {
  check_streams(streams);
  std::size_t total = 0;
  unsigned channel_count = 0;
  for (const auto& s : streams) {
    total += s.size();
    channel_count = std::max(channel_count, static_cast<unsigned>(s.channel) + 1);
  }
  if (channel_count > 255) throw Error(ErrorCode::InvalidParameter, "at most 255 channels");

  std::vector<std::uint8_t> out;
  out.reserve(kTagHeaderSize + total * kTagRecordSize + (truth ? truth->size() + 8 : 0));
  out.insert(out.end(), std::begin(kTagMagic), std::end(kTagMagic));
  put_u16(out, kTagVersion);
  out.push_back(static_cast<std::uint8_t>(channel_count));
  out.push_back(truth ? kTagFlagTruth : 0);
  put_u64(out, static_cast<std::uint64_t>(file_duration(streams)));

  merge_streams(streams, [&](std::int64_t t, std::uint8_t ch) {
    put_u64(out, static_cast<std::uint64_t>(t));
    out.push_back(ch);
  });
  if (truth) {
    if (truth->size() > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(ErrorCode::InvalidParameter, "truth record too large");
    }
    const auto n = static_cast<std::uint32_t>(truth->size());
    put_u32(out, n);
    out.insert(out.end(), truth->begin(), truth->end());
    put_u32(out, n);
  }
  return out;
}

TagFile decode_tags(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTagMagic, 4) != 0) {
    throw Error(ErrorCode::BadMagic, "not an SQZT tag file");
  }
  if (bytes.size() < kTagHeaderSize) throw Error(ErrorCode::TruncatedRecord, "header is truncated");
  const auto version = static_cast<std::uint16_t>(get_le(bytes.data() + 4, 2));
  if (version != kTagVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "tag file version " + std::to_string(version));
  }
  const unsigned channel_count = bytes[6];
  const std::uint8_t flags = bytes[7];
  const std::uint64_t duration = get_le(bytes.data() + 8, 8);
  if (duration > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    throw Error(ErrorCode::BadFormat, "duration out of range");
  }

  TagFile file;
  file.duration_ps = static_cast<std::int64_t>(duration);
  std::size_t end = bytes.size();
  if (flags & kTagFlagTruth) {
    if (end < kTagHeaderSize + 8) throw Error(ErrorCode::TruncatedRecord, "truth trailer is truncated");
    const auto n = static_cast<std::size_t>(get_le(bytes.data() + end - 4, 4));
    if (end < kTagHeaderSize + 8 + n) throw Error(ErrorCode::TruncatedRecord, "truth trailer is truncated");
    const std::size_t start = end - 4 - n - 4;
    if (get_le(bytes.data() + start, 4) != n) throw Error(ErrorCode::TruncatedRecord, "truth trailer lengths differ");
    file.truth = std::string(reinterpret_cast<const char*>(bytes.data() + start + 4), n);
    end = start;
  }
  const std::size_t body = end - kTagHeaderSize;
  if (body % kTagRecordSize != 0) throw Error(ErrorCode::TruncatedRecord, "partial record at end of file");
  const std::size_t records = body / kTagRecordSize;

  // Count first so each channel is allocated once.
  std::vector<std::size_t> per_channel(256, 0);
  const std::uint8_t* p = bytes.data() + kTagHeaderSize;
  for (std::size_t i = 0; i < records; ++i) ++per_channel[p[i * kTagRecordSize + 8]];
  for (unsigned c = channel_count; c < 256; ++c) {
    if (per_channel[c] != 0) {
      throw Error(ErrorCode::BadFormat, "record for channel " + std::to_string(c) + " beyond channel_count");
    }
  }
  file.channels.resize(channel_count);
  for (unsigned c = 0; c < channel_count; ++c) {
    file.channels[c].channel = static_cast<std::uint8_t>(c);
    file.channels[c].duration_ps = file.duration_ps;
    file.channels[c].timestamps.reserve(per_channel[c]);
  }
  for (std::size_t i = 0; i < records; ++i, p += kTagRecordSize) {
    const std::uint64_t t = get_le(p, 8);
    if (t > duration) {
      throw Error(ErrorCode::BadFormat, "timestamp " + std::to_string(t) + " beyond duration_ps");
    }
    auto& ts = file.channels[p[8]].timestamps;
    const auto v = static_cast<std::int64_t>(t);
    if (!ts.empty() && v < ts.back()) {
      throw Error(ErrorCode::UnsortedChannel, "channel " + std::to_string(p[8]) + " goes back in time at record " +
                                                  std::to_string(i));
    }
    ts.push_back(v);
  }
  return file;
}

TagFile read_tags(const fs::path& path) {
  const auto bytes = read_binary(path);
  static constexpr std::string_view kCsvStarts[] = {"timestamp_ps", "# duration_ps="};
  const std::string_view head(reinterpret_cast<const char*>(bytes.data()), std::min<std::size_t>(bytes.size(), 16));
  for (auto prefix : kCsvStarts) {
    if (head.starts_with(prefix)) {
      return read_tags_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), path);
    }
  }
  return decode_tags(bytes);
}

void write_tags(std::span<const TimeTagStream> streams, const fs::path& path,
                const std::optional<std::string>& truth) {
  write_binary(path, encode_tags(streams, truth));
}

void write_tags_csv(std::span<const TimeTagStream> streams, const fs::path& path) {
  check_streams(streams);
  std::string text = "# duration_ps=" + std::to_string(file_duration(streams)) + "\ntimestamp_ps,channel\n";
  merge_streams(streams, [&](std::int64_t t, std::uint8_t ch) {
    text += std::to_string(t);
    text += ',';
    text += std::to_string(ch);
    text += '\n';
  });
  write_text_file(path, text);
}

std::string format_number(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

fs::path histogram_meta_path(const fs::path& csv) {
  auto p = csv;
  p += ".meta.json";
  return p;
}

void write_histogram_csv(const CorrelationHistogram& hist, const fs::path& path) {
  std::string text = "tau_ps,counts,g2\n";
  const bool norm = hist.normalized();
  for (std::size_t i = 0; i < hist.num_bins(); ++i) {
    text += format_number(hist.center_ps(i));
    text += ',';
    text += std::to_string(hist.counts[i]);
    text += ',';
    if (norm) text += format_number(hist.g2[i]);
    text += '\n';
  }
  write_text_file(path, text);

  nlohmann::ordered_json meta;
  meta["bin_width_ps"] = hist.bin_width_ps;
  meta["window_start_half_ps"] = hist.window_start_half_ps;
  meta["num_bins"] = hist.num_bins();
  meta["n_a"] = hist.n_a;
  meta["n_b"] = hist.n_b;
  meta["acquisition_time"] = hist.acquisition_time;
  write_text_file(histogram_meta_path(path), meta.dump(2) + "\n");
}

CorrelationHistogram read_histogram_csv(const fs::path& path) {
  const auto text = read_text_file(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::BadFormat, path.string() + ": empty histogram file");
  expect_header(lines[0].second, "tau_ps,counts,g2", path);

  CorrelationHistogram hist;
  std::vector<double> centers;
  bool any_g2 = false, all_g2 = true;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i].second);
    if (fields.size() != 3) throw Error(ErrorCode::BadFormat, "line " + std::to_string(lines[i].first) + ": expected 3 fields");
    centers.push_back(parse_field<double>(fields[0], lines[i].first));
    hist.counts.push_back(parse_field<std::uint64_t>(fields[1], lines[i].first));
    if (fields[2].empty()) {
      all_g2 = false;
      hist.g2.push_back(0.0);
    } else {
      any_g2 = true;
      hist.g2.push_back(parse_field<double>(fields[2], lines[i].first));
    }
  }
  if (any_g2 && !all_g2) throw Error(ErrorCode::BadFormat, path.string() + ": g2 column partially filled");
  if (!any_g2) hist.g2.clear();
  if (centers.empty()) throw Error(ErrorCode::BadFormat, path.string() + ": histogram has no bins");

  const auto meta_path = histogram_meta_path(path);
  if (fs::exists(meta_path)) {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(read_text_file(meta_path));
      hist.bin_width_ps = meta.at("bin_width_ps").get<std::int64_t>();
      hist.window_start_half_ps = meta.at("window_start_half_ps").get<std::int64_t>();
      hist.n_a = meta.at("n_a").get<std::uint64_t>();
      hist.n_b = meta.at("n_b").get<std::uint64_t>();
      hist.acquisition_time = meta.at("acquisition_time").get<double>();
      if (meta.at("num_bins").get<std::size_t>() != centers.size()) {
        throw Error(ErrorCode::BadFormat, meta_path.string() + ": bin count differs from the CSV");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BadFormat, meta_path.string() + ": " + e.what());
    }
  } else {
    if (centers.size() < 2) throw Error(ErrorCode::BadFormat, path.string() + ": cannot infer the bin width");
    hist.bin_width_ps = std::llround(centers[1] - centers[0]);
    hist.window_start_half_ps = std::llround(2.0 * centers[0]) - hist.bin_width_ps;
  }
  if (hist.bin_width_ps <= 0) throw Error(ErrorCode::BadFormat, path.string() + ": non-positive bin width");
  for (std::size_t i = 0; i < centers.size(); ++i) {
    if (std::abs(centers[i] - hist.center_ps(i)) > 1e-6 * std::max(1.0, std::abs(centers[i]))) {
      throw Error(ErrorCode::BadFormat, path.string() + ": bins are not evenly spaced");
    }
  }
  return hist;
}

std::vector<RatePoint> read_rate_csv(const fs::path& path) {
  const auto text = read_text_file(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::BadFormat, path.string() + ": empty rate file");
  expect_header(lines[0].second, "P_mW,R_meas,sigma", path);
  std::vector<RatePoint> points;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split(lines[i].second);
    if (fields.size() != 3) throw Error(ErrorCode::BadFormat, "line " + std::to_string(lines[i].first) + ": expected 3 fields");
    RatePoint p;
    p.pump_power = parse_field<double>(fields[0], lines[i].first) / 1e3;
    p.measured_rate = parse_field<double>(fields[1], lines[i].first);
    p.sigma = parse_field<double>(fields[2], lines[i].first);
    points.push_back(p);
  }
  return points;
}

namespace {

// mW text that reads back (value / 1e3) to exactly `watts` when a nearby
// double allows it.
std::string milliwatt_text(double watts) {
  double mw = watts * 1e3;
  for (int step = 0; step < 8; ++step) {
    for (double candidate : {mw, std::nextafter(mw, -HUGE_VAL), std::nextafter(mw, HUGE_VAL)}) {
      const auto text = format_number(candidate);
      if (std::strtod(text.c_str(), nullptr) / 1e3 == watts) return text;
    }
    mw = watts > mw / 1e3 ? std::nextafter(mw, HUGE_VAL) : std::nextafter(mw, -HUGE_VAL);
  }
  return format_number(watts * 1e3);
}

}  // namespace

void write_rate_csv(std::span<const RatePoint> points, const fs::path& path) {
  std::string text = "P_mW,R_meas,sigma\n";
  for (const auto& p : points) {
    text += milliwatt_text(p.pump_power) + "," + format_number(p.measured_rate) + "," +
            format_number(p.sigma) + "\n";
  }
  write_text_file(path, text);
}

void write_csv(const fs::path& path, std::span<const std::string> header,
               std::span<const std::vector<double>> rows) {
  std::string text;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text += ',';
    text += header[i];
  }
  text += '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) text += ',';
      text += format_number(row[i]);
    }
    text += '\n';
  }
  write_text_file(path, text);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  write_binary(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace weaksqz
