#pragma once

// Independent reference computations for tests. Nothing here calls into the
// library's numeric code paths.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
constexpr double pi = 3.14159265358979323846;

struct Element {
  double x, y;
};

inline double phase(Element e, double lambda, double az_deg, double el_deg) {
  const double th = az_deg * pi / 180.0;
  const double ph = el_deg * pi / 180.0;
  return 2.0 * pi / lambda * (e.x * std::cos(ph) * std::sin(th) + e.y * std::sin(ph));
}

/// Direct delay-and-sum power in dB at one look direction.
inline double das_db(const std::vector<cd>& samples, const std::vector<Element>& elements, double lambda,
                     double az_deg, double el_deg, double floor_db) {
  cd acc = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    acc += samples[k] * std::exp(cd(0.0, -phase(elements[k], lambda, az_deg, el_deg)));
  }
  const double m = std::abs(acc);
  if (m == 0.0) return floor_db;
  return std::max(20.0 * std::log10(m), floor_db);
}

/// Exhaustive argmax of das_db over an inclusive grid; returns (az_idx, el_idx)
/// with el_idx counted from the top (max elevation).
struct Cell {
  int az_idx, el_idx;
  double value;
};
inline Cell exhaustive_argmax(const std::vector<cd>& samples, const std::vector<Element>& elements, double lambda,
                              double az_min, double az_max, int az_steps, double el_min, double el_max,
                              int el_steps) {
  Cell best{0, 0, -1e300};
  for (int r = 0; r < el_steps; ++r) {
    const double el = el_max - r * (el_max - el_min) / (el_steps - 1);
    for (int c = 0; c < az_steps; ++c) {
      const double az = az_min + c * (az_max - az_min) / (az_steps - 1);
      const double v = das_db(samples, elements, lambda, az, el, -1e300);
      if (v > best.value) best = {c, r, v};
    }
  }
  return best;
}

/// Naive O(N^2) DFT magnitude at bin k.
inline double dft_magnitude(const std::vector<double>& x, std::size_t k) {
  cd acc = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * std::exp(cd(0.0, -2.0 * pi * k * i / n));
  return std::abs(acc);
}

inline cd dft(const std::vector<double>& x, std::size_t k) {
  cd acc = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * std::exp(cd(0.0, -2.0 * pi * k * i / n));
  return acc;
}

}  // namespace oracle
