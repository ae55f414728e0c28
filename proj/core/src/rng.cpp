#include "weaksqz/rng.hpp"

#include <cmath>

#include "weaksqz/units.hpp"

namespace weaksqz::rng {

double exponential(Engine& g, double rate) { return -std::log(uniform01(g)) / rate; }

double standard_normal(Engine& g) {
  const double u1 = uniform01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(units::two_pi * u2);
}

double laplace_fwhm(Engine& g, double fwhm) {
  if (fwhm <= 0.0) return 0.0;
  const double scale = fwhm / (2.0 * units::ln2);
  const double u = uniform01(g) - 0.5;
  return u < 0.0 ? scale * std::log(1.0 + 2.0 * u) : -scale * std::log(1.0 - 2.0 * u);
}

}  // namespace weaksqz::rng
