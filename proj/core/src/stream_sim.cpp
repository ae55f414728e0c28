#include "weaksqz/stream_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "weaksqz/error.hpp"
#include "weaksqz/rng.hpp"
#include "weaksqz/units.hpp"

namespace weaksqz {

bool TimeTagStream::is_sorted() const { return std::is_sorted(timestamps.begin(), timestamps.end()); }

bool TimeTagStream::is_well_formed() const {
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    if (timestamps[i] < 0 || timestamps[i] > duration_ps) return false;
    if (i > 0 && timestamps[i] <= timestamps[i - 1]) return false;
  }
  return true;
}

namespace {

// Sub-stream identifiers; part of the reproducibility contract.
enum Stream : std::uint64_t {
  kPairs = 1,
  kDarkA = 2,
  kDarkB = 3,
  kThin = 4,
  kJitter = 5,
  kDark = 6,
};

constexpr double kPairsPerChunk = 65536.0;

void invalid(const std::string& why) { throw Error(ErrorCode::ConfigInvalid, why); }

std::int64_t to_ps(double seconds) { return std::llround(seconds * 1e12); }

void add_dark_counts(std::vector<std::int64_t>& tags, double rate, std::int64_t duration_ps,
                     rng::Engine& g) {
  if (rate <= 0.0) return;
  const double duration = static_cast<double>(duration_ps) * 1e-12;
  for (double t = rng::exponential(g, rate); t < duration; t += rng::exponential(g, rate)) {
    tags.push_back(to_ps(t));
  }
}

// sort, drop tags outside [0, duration], then non-paralyzable dead time. A
// one-picosecond floor on the dead time removes exact duplicates.
void finalize(std::vector<std::int64_t>& tags, std::int64_t duration_ps, double dead_time) {
  std::sort(tags.begin(), tags.end());
  const auto first = std::lower_bound(tags.begin(), tags.end(), std::int64_t{0});
  const auto last = std::upper_bound(first, tags.end(), duration_ps);
  const std::int64_t dead_ps = std::max<std::int64_t>(1, to_ps(dead_time));
  std::size_t out = 0;
  bool have_last = false;
  std::int64_t last_kept = 0;
  for (auto it = first; it != last; ++it) {
    if (!have_last || *it - last_kept >= dead_ps) {
      tags[out++] = *it;
      last_kept = *it;
      have_last = true;
    }
  }
  tags.resize(out);
}

struct ChunkOutput {
  std::vector<std::int64_t> a;
  std::vector<std::int64_t> b;
};

}  // namespace

void DetectorModel::validate() const {
  if (!(efficiency >= 0.0 && efficiency <= 1.0)) invalid("detector efficiency must lie in [0, 1]");
  if (!(dark_rate >= 0.0)) invalid("dark rate must be non-negative");
  if (!(dead_time >= 0.0)) invalid("dead time must be non-negative");
  if (!(jitter_fwhm >= 0.0)) invalid("jitter FWHM must be non-negative");
}

double SimConfig::pair_rate() const {
  return explicit_pair_rate ? *explicit_pair_rate : k * pump_power;
}

void SimConfig::validate() const {
  if (!(duration > 0.0)) invalid("duration must be positive");
  if (!(splitter_ratio > 0.0 && splitter_ratio < 1.0)) invalid("splitter ratio must lie in (0, 1)");
  if (!(pair_rate() >= 0.0) || !std::isfinite(pair_rate())) invalid("pair rate must be non-negative");
  if (!explicit_pair_rate && !(pump_power >= 0.0)) invalid("pump power must be non-negative");
  if (!(cavity.linewidth() > 0.0) || !(cavity.round_trip_time > 0.0)) {
    invalid("cavity linewidth and round-trip time must be positive");
  }
  if (duration * 1e12 > 9.0e18) invalid("duration overflows the picosecond time base");
  detector_a.validate();
  detector_b.validate();
}

double mode_offset_probability(double q, long long n) {
  return (1.0 - q) / (1.0 + q) * std::pow(q, static_cast<double>(std::llabs(n)));
}

std::optional<double> pair_model_peak_g2(double pair_rate, double q, double round_trip_time,
                                         double jitter_a, double jitter_b) {
  if (jitter_a <= 0.0 && jitter_b <= 0.0) return std::nullopt;
  // density of J_b - J_a for independent Laplace jitters with rates a1, a2
  auto rate = [](double fwhm) { return fwhm > 0.0 ? 2.0 * units::ln2 / fwhm : 0.0; };
  const double a1 = rate(jitter_a);
  const double a2 = rate(jitter_b);
  auto density = [&](double t) {
    t = std::abs(t);
    if (a1 == 0.0) return 0.5 * a2 * std::exp(-a2 * t);
    if (a2 == 0.0) return 0.5 * a1 * std::exp(-a1 * t);
    if (std::abs(a1 - a2) < 1e-9 * a1) return 0.25 * a1 * (1.0 + a1 * t) * std::exp(-a1 * t);
    return a1 * a2 / (2.0 * (a2 * a2 - a1 * a1)) * (a2 * std::exp(-a1 * t) - a1 * std::exp(-a2 * t));
  };
  double pdf = 0.0;
  for (long long n = -400; n <= 400; ++n) {
    pdf += mode_offset_probability(q, n) * density(static_cast<double>(n) * round_trip_time);
  }
  return 1.0 + pdf / (2.0 * pair_rate);
}

double matched_jitter_fwhm(const CavityParams& cavity) {
  const double q = std::exp(-cavity.linewidth() * cavity.round_trip_time);
  const double p0 = mode_offset_probability(q, 0);
  const double a = 4.0 * cavity.gamma1 / p0;
  return 2.0 * units::ln2 / a;
}

SimResult simulate(const SimConfig& config) {
  config.validate();
  const double rate = config.pair_rate();
  const double tau_f = config.cavity.round_trip_time;
  const double q = std::exp(-config.cavity.linewidth() * tau_f);
  const double p_zero = mode_offset_probability(q, 0);
  const double log_q = std::log(q);
  const std::int64_t duration_ps = to_ps(config.duration);

  SimResult result;
  result.a.channel = 0;
  result.b.channel = 1;
  result.a.duration_ps = duration_ps;
  result.b.duration_ps = duration_ps;

  if (rate > 0.0) {
    for (const auto* det : {&config.detector_a, &config.detector_b}) {
      const double arm_rate = 2.0 * rate * 0.5 * det->efficiency;
      if (det->dead_time > 0.0 && arm_rate * det->dead_time >= 1.0) {
        result.warnings.push_back("detected rate exceeds 1/dead_time on one arm");
      }
    }
  }

  const double s = config.splitter_ratio;
  const double eff_a = config.detector_a.efficiency;
  const double eff_b = config.detector_b.efficiency;
  const double jit_a = config.detector_a.jitter_fwhm;
  const double jit_b = config.detector_b.jitter_fwhm;
  const double delay_b = config.channel_b_delay;

  // The time axis is cut into chunks with their own sub-stream so that any
  // partition of chunks over threads reproduces the serial output.
  const double chunk_len = rate > 0.0 ? std::max(kPairsPerChunk / rate, 1e-6) : config.duration;
  const auto n_chunks = static_cast<std::size_t>(std::ceil(config.duration / chunk_len));

  auto run_chunk = [&](std::size_t c, ChunkOutput& out) {
    if (rate <= 0.0) return;
    auto g = rng::make_engine(config.seed, kPairs, c);
    const double start = static_cast<double>(c) * chunk_len;
    const double end = std::min(config.duration, start + chunk_len);
    auto emit = [&](double t) {
      if (rng::uniform01(g) < s) {
        if (rng::bernoulli(g, eff_a)) out.a.push_back(to_ps(t + rng::laplace_fwhm(g, jit_a)));
      } else {
        if (rng::bernoulli(g, eff_b)) {
          out.b.push_back(to_ps(t + delay_b + rng::laplace_fwhm(g, jit_b)));
        }
      }
    };
    for (double t = start + rng::exponential(g, rate); t < end; t += rng::exponential(g, rate)) {
      long long n = 0;
      if (rng::uniform01(g) >= p_zero) {
        // |n| >= 1 is geometric with ratio q
        n = 1 + static_cast<long long>(std::floor(std::log(rng::uniform01(g)) / log_q));
        if (rng::uniform01(g) < 0.5) n = -n;
      }
      emit(t);
      emit(t + static_cast<double>(n) * tau_f);
    }
  };

  std::vector<ChunkOutput> outputs(n_chunks);
  unsigned workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n_chunks, 1)));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c, outputs[c]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < n_chunks; c += workers) run_chunk(c, outputs[c]);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::size_t total_a = 0;
  std::size_t total_b = 0;
  for (const auto& o : outputs) {
    total_a += o.a.size();
    total_b += o.b.size();
  }
  result.a.timestamps.reserve(total_a + 16);
  result.b.timestamps.reserve(total_b + 16);
  for (auto& o : outputs) {
    result.a.timestamps.insert(result.a.timestamps.end(), o.a.begin(), o.a.end());
    result.b.timestamps.insert(result.b.timestamps.end(), o.b.begin(), o.b.end());
    o = ChunkOutput{};
  }

  auto dark_a = rng::make_engine(config.seed, kDarkA, 0);
  auto dark_b = rng::make_engine(config.seed, kDarkB, 0);
  add_dark_counts(result.a.timestamps, config.detector_a.dark_rate, duration_ps, dark_a);
  add_dark_counts(result.b.timestamps, config.detector_b.dark_rate, duration_ps, dark_b);
  finalize(result.a.timestamps, duration_ps, config.detector_a.dead_time);
  finalize(result.b.timestamps, duration_ps, config.detector_b.dead_time);

  TruthRecord& truth = result.truth;
  truth.pair_rate = rate;
  truth.pump_power = config.pump_power;
  truth.k = config.k;
  truth.mode_ratio = q;
  truth.linewidth = config.cavity.linewidth();
  truth.round_trip_time = tau_f;
  truth.delay = delay_b;
  truth.gamma1 = config.cavity.gamma1;
  truth.gamma2 = config.cavity.gamma2;
  truth.transmission = config.cavity.transmission;
  truth.expected_g2zero =
      rate > 0.0 ? 2.0 + config.cavity.gamma1 / (2.0 * rate) : std::numeric_limits<double>::infinity();
  if (rate > 0.0) truth.expected_peak_g2 = pair_model_peak_g2(rate, q, tau_f, jit_a, jit_b);
  truth.efficiency_a = eff_a;
  truth.efficiency_b = eff_b;
  truth.duration = config.duration;
  truth.seed = config.seed;
  return result;
}

TimeTagStream apply_detector(const TimeTagStream& ideal, const DetectorModel& detector,
                             std::uint64_t seed) {
  detector.validate();
  if (!ideal.is_sorted()) throw Error(ErrorCode::UnsortedInput, "ideal stream must be sorted");
  TimeTagStream out;
  out.channel = ideal.channel;
  out.duration_ps = ideal.duration_ps;
  out.timestamps.reserve(ideal.size());

  auto thin = rng::make_engine(seed, kThin, ideal.channel);
  auto jitter = rng::make_engine(seed, kJitter, ideal.channel);
  auto dark = rng::make_engine(seed, kDark, ideal.channel);
  for (const auto t : ideal.timestamps) {
    if (!rng::bernoulli(thin, detector.efficiency)) continue;
    out.timestamps.push_back(t + to_ps(rng::laplace_fwhm(jitter, detector.jitter_fwhm)));
  }
  add_dark_counts(out.timestamps, detector.dark_rate, out.duration_ps, dark);
  finalize(out.timestamps, out.duration_ps, detector.dead_time);
  return out;
}

}  // namespace weaksqz
