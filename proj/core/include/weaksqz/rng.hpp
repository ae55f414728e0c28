#pragma once

#include <cstdint>
#include <limits>
#include <random>

// Seeding and variate generation that is bit-reproducible across standard
// libraries. The std:: distributions are implementation-defined, so the
// variates are built here directly from engine output.
namespace weaksqz::rng {

/// SplitMix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for sub-stream `index` of purpose `stream` under a master seed.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream,
                                       std::uint64_t index) noexcept {
  return mix64(mix64(seed ^ mix64(stream)) + mix64(index + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return Engine(substream_seed(seed, stream, index));
}

/// Uniform on the open interval (0, 1) with 53 random bits.
inline double uniform01(Engine& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

inline bool bernoulli(Engine& g, double p) { return uniform01(g) < p; }

double exponential(Engine& g, double rate);
double standard_normal(Engine& g);
/// Two-sided exponential with the given FWHM (scale = fwhm / (2 ln 2)).
double laplace_fwhm(Engine& g, double fwhm);

}  // namespace weaksqz::rng
