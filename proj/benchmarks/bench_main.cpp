#include <benchmark/benchmark.h>

#include <filesystem>
#include <vector>

#include "weaksqz/correlator.hpp"
#include "weaksqz/fitters.hpp"
#include "weaksqz/rng.hpp"
#include "weaksqz/stream_sim.hpp"
#include "weaksqz/tag_io.hpp"
#include "weaksqz/units.hpp"

using namespace weaksqz;

namespace {

TimeTagStream poisson(double rate, std::int64_t duration_ps, std::uint8_t channel) {
  TimeTagStream s;
  s.channel = channel;
  s.duration_ps = duration_ps;
  auto g = rng::make_engine(42, 0xbe, channel);
  const double end = static_cast<double>(duration_ps) * units::ps;
  for (double t = rng::exponential(g, rate); t <= end; t += rng::exponential(g, rate)) {
    s.timestamps.push_back(static_cast<std::int64_t>(t / units::ps));
  }
  return s;
}

// 10^7 tags in total
const std::vector<TimeTagStream>& big_streams() {
  static const std::vector<TimeTagStream> s = {poisson(1.25e6, 4'000'000'000'000LL, 0),
                                               poisson(1.25e6, 4'000'000'000'000LL, 1)};
  return s;
}

SimConfig reference_sim(double duration) {
  SimConfig c;
  c.cavity = CavityParams::from_rates(82.1e6, 6.9e6, 0.4017, 0.02);
  c.pump_power = 30e-6;
  c.k = 1.045e11;
  c.duration = duration;
  for (auto* d : {&c.detector_a, &c.detector_b}) {
    d->efficiency = 0.404;
    d->dark_rate = 100.0;
    d->jitter_fwhm = 185e-12;
  }
  return c;
}

void BM_Correlate(benchmark::State& state) {
  const auto& s = big_streams();
  const auto threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(correlate(s[0], s[1], {35, 4000, 0}, threads));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s[0].size() + s[1].size()));
}
BENCHMARK(BM_Correlate)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_ReadTags(benchmark::State& state) {
  const auto path = std::filesystem::temp_directory_path() / "weaksqz_bench_tags.sqzt";
  write_tags(big_streams(), path);
  for (auto _ : state) {
    benchmark::DoNotOptimize(read_tags(path));
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(big_streams()[0].size() + big_streams()[1].size()));
  std::filesystem::remove(path);
}
BENCHMARK(BM_ReadTags)->Unit(benchmark::kMillisecond);

void BM_EncodeTags(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_tags(big_streams()));
  }
}
BENCHMARK(BM_EncodeTags)->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  const auto c = reference_sim(1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(c));
  }
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);

void BM_FitComb(benchmark::State& state) {
  const auto run = simulate(reference_sim(1.0));
  const auto hist = normalize(correlate(run.a, run.b, {35, 4000, -980}));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_comb(hist));
  }
}
BENCHMARK(BM_FitComb)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
