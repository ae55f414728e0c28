#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"
#include "weaksqz/correlator.hpp"

using namespace weaksqz;
using doctest::Approx;

TEST_CASE("two-pointer sweep equals the brute-force histogram") {
  auto g = rng::make_engine(2024, 1, 0);
  for (int trial = 0; trial < 60; ++trial) {
    const auto span = static_cast<std::int64_t>(2000 + rng::uniform01(g) * 200000);
    const auto a = test::random_stream(g, 600, span, 0);
    const auto b = test::random_stream(g, 600, span, 1);
    CorrelationWindow w;
    w.bin_width_ps = 1 + static_cast<std::int64_t>(rng::uniform01(g) * 120);
    w.num_bins = 1 + static_cast<std::size_t>(rng::uniform01(g) * 300);
    w.center_ps = static_cast<std::int64_t>((rng::uniform01(g) - 0.5) * 8000);
    const auto h = correlate(a, b, w);
    REQUIRE(h.counts == test::brute_force_counts(a, b, w));
  }
}

TEST_CASE("tags on bin edges") {
  TimeTagStream a{0, {0, 100}, 1000};
  TimeTagStream b{1, {-10, 0, 9, 10, 19, 20, 110}, 1000};
  std::sort(b.timestamps.begin(), b.timestamps.end());
  // bins [-10,0) [0,10) [10,20)
  const auto h = correlate(a, b, {10, 3, 5});
  CHECK(h.counts == std::vector<std::uint64_t>{1, 2, 3});
  CHECK(h.center_ps(0) == -5.0);
  CHECK(h.counts == test::brute_force_counts(a, b, {10, 3, 5}));
}

TEST_CASE("odd window width keeps bin centers symmetric about the center") {
  CorrelationHistogram h;
  h.bin_width_ps = 35;
  h.window_start_half_ps = -3 * 35;  // three bins around zero
  h.counts.resize(3);
  CHECK(h.center_ps(0) == -35.0);
  CHECK(h.center_ps(1) == 0.0);
  CHECK(h.center_ps(2) == 35.0);

  // no integer delay lies on a half-integer edge, so swapping the channels
  // mirrors the histogram exactly
  auto g = rng::make_engine(7, 2, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = test::random_stream(g, 800, 50000, 0);
    const auto b = test::random_stream(g, 800, 50000, 1);
    const CorrelationWindow w{35, 201, 0};
    auto forward = correlate(a, b, w).counts;
    const auto backward = correlate(b, a, w).counts;
    std::reverse(forward.begin(), forward.end());
    REQUIRE(forward == backward);
  }
}

TEST_CASE("threaded sweep is identical to the serial one") {
  const auto a = test::poisson_stream(2e5, 1'000'000'000'000LL, 1, 0);
  const auto b = test::poisson_stream(2e5, 1'000'000'000'000LL, 2, 1);
  const CorrelationWindow w{35, 4000, -980};
  const auto serial = correlate(a, b, w, 1);
  for (unsigned t : {2u, 3u, 7u}) CHECK(correlate(a, b, w, t).counts == serial.counts);
  CHECK(serial.n_a == a.size());
  CHECK(serial.n_b == b.size());
  CHECK(serial.acquisition_time == Approx(1.0));
}

TEST_CASE("invalid inputs") {
  const TimeTagStream empty{0, {}, 1000};
  const TimeTagStream one{1, {5}, 1000};
  const TimeTagStream unsorted{1, {5, 3}, 1000};
  CHECK(test::error_code_of([&] { correlate(empty, one, {}); }) == ErrorCode::EmptyStream);
  CHECK(test::error_code_of([&] { correlate(one, empty, {}); }) == ErrorCode::EmptyStream);
  CHECK(test::error_code_of([&] { correlate(one, unsorted, {}); }) == ErrorCode::UnsortedInput);
  CHECK(test::error_code_of([&] { correlate(one, one, {0, 10, 0}); }) == ErrorCode::InvalidParameter);
  CHECK(test::error_code_of([&] { correlate(one, one, {10, 0, 0}); }) == ErrorCode::InvalidParameter);

  CorrelationHistogram h;
  h.counts = {1, 2, 3};
  CHECK(test::error_code_of([&] { normalize(h); }) == ErrorCode::MissingTotals);
  CHECK(test::error_code_of([&] { g2_at_zero(h, PeakBin{}); }) == ErrorCode::NotNormalized);
}

TEST_CASE("singles normalization") {
  CorrelationHistogram h;
  h.bin_width_ps = 100;
  h.counts = {10, 20, 40, 20, 10};
  h.n_a = 1000;
  h.n_b = 2000;
  h.acquisition_time = 2.0;
  const double accidental = 1000.0 * 2000.0 * 100e-12 / 2.0;
  const auto n = normalize(h);
  REQUIRE(n.normalized());
  for (std::size_t i = 0; i < 5; ++i) CHECK(n.g2[i] == Approx(static_cast<double>(h.counts[i]) / accidental));
  CHECK(normalize(n).g2 == n.g2);

  const auto t = normalize(h, NormalizationMode::TailBaseline, 0.2);
  CHECK((t.g2.front() + t.g2.back()) / 2.0 == Approx(1.0));
  CHECK(t.g2[2] == Approx(4.0));
  CHECK(test::error_code_of([&] { normalize(h, NormalizationMode::TailBaseline, 0.6); }) ==
        ErrorCode::InvalidParameter);
}

TEST_CASE("independent streams give a flat g2 of one") {
  const auto a = test::poisson_stream(1e5, 2'000'000'000'000LL, 11, 0);
  const auto b = test::poisson_stream(1e5, 2'000'000'000'000LL, 12, 1);
  const auto h = normalize(correlate(a, b, {2000, 1000, 0}));
  const double expected = static_cast<double>(h.n_a) * static_cast<double>(h.n_b) * 2000e-12 / 2.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < h.num_bins(); ++i) {
    REQUIRE(std::abs(h.g2[i] - 1.0) < 5.0 / std::sqrt(expected));
    mean += h.g2[i];
  }
  mean /= static_cast<double>(h.num_bins());
  CHECK(mean == Approx(1.0).epsilon(0.02));
}

TEST_CASE("g2 at zero delay") {
  CorrelationHistogram h;
  h.bin_width_ps = 10;
  h.counts = {100, 400, 1600, 400};
  h.g2 = {1.0, 4.0, 16.0, 4.0};
  const auto peak = g2_at_zero(h, PeakBin{});
  CHECK(peak.value == 16.0);
  CHECK(peak.sigma == Approx(16.0 / 40.0));

  CombFitEstimate est;
  est.params = test::reference_comb();
  est.sigma_N1 = 0.1;
  est.sigma_N2 = 0.001;
  est.cov_N1_N2 = -2e-5;
  const auto v = g2_at_zero(h, est);
  CHECK(v.value == Approx(16.0 * 1.064));
  const double var = 1.064 * 1.064 * 0.01 + 256.0 * 1e-6 + 2.0 * 1.064 * 16.0 * -2e-5;
  CHECK(v.sigma == Approx(std::sqrt(var)));
}
