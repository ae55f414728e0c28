#pragma once

#include <cstdint>
#include <numbers>

// Core code works in SI base units: seconds, watts, angular s^-1, metres.
// Conversions to the lab units (mW, MHz, ps, ns) happen only at the boundary.
namespace weaksqz::units {

inline constexpr double speed_of_light = 299'792'458.0;  // m/s
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double ln2 = std::numbers::ln2;

inline constexpr double ps = 1e-12;
inline constexpr double ns = 1e-9;
inline constexpr double us = 1e-6;
inline constexpr double ms = 1e-3;

inline constexpr double mW = 1e-3;
inline constexpr double uW = 1e-6;

inline constexpr double MHz = 1e6;
inline constexpr double kHz = 1e3;

/// Rates quoted as "82.1 MHz" are taken as 82.1e6 s^-1 (angular).
inline constexpr double rate_from_MHz(double v) { return v * MHz; }

/// k quoted in MHz/mW -> s^-1 W^-1.
inline constexpr double k_from_MHz_per_mW(double v) { return v * MHz / mW; }
inline constexpr double k_to_MHz_per_mW(double k) { return k * mW / MHz; }

inline constexpr double seconds_from_ps(std::int64_t t) { return static_cast<double>(t) * ps; }

}  // namespace weaksqz::units
