#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace mealsense::testing {

// Direct O(N^2) DFT magnitudes for bins 0..N/2. Independent of the FFT path.
inline std::vector<double> naive_dft_magnitudes(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> mags(n / 2 + 1);
  for (std::size_t k = 0; k < mags.size(); ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double angle = -2.0L * std::numbers::pi_v<long double> *
                                static_cast<long double>((k * t) % n) / static_cast<long double>(n);
      re += x[t] * std::cos(angle);
      im += x[t] * std::sin(angle);
    }
    mags[k] = static_cast<double>(std::hypot(re, im));
  }
  return mags;
}

}  // namespace mealsense::testing
