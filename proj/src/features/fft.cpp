#include "mealsense/features/fft.h"

#include <cmath>
#include <numbers>

namespace mealsense::features {

namespace {

std::size_t smallest_factor(std::size_t n) {
  if (n % 2 == 0) return 2;
  for (std::size_t f = 3; f * f <= n; f += 2) {
    if (n % f == 0) return f;
  }
  return n;
}

std::complex<double> twiddle(std::size_t num, std::size_t n) {
  const double angle = -2.0 * std::numbers::pi * static_cast<double>(num % n) / static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

void transform(const std::complex<double>* in, std::size_t stride, std::size_t n,
               std::complex<double>* out) {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = smallest_factor(n);
  const std::size_t m = n / p;
  if (m == 1) {
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += in[j * stride] * twiddle(j * k, n);
      }
      out[k] = acc;
    }
    return;
  }
  // out[r*m .. r*m+m) holds the sub-transform of x[r], x[r+p], ...
  for (std::size_t r = 0; r < p; ++r) {
    transform(in + r * stride, stride * p, m, out + r * m);
  }
  std::vector<std::complex<double>> sub(out, out + n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t km = k % m;
    std::complex<double> acc = 0.0;
    for (std::size_t r = 0; r < p; ++r) {
      acc += sub[r * m + km] * twiddle(r * k, n);
    }
    out[k] = acc;
  }
}

}  // namespace

std::vector<std::complex<double>> fft(std::span<const std::complex<double>> input) {
  std::vector<std::complex<double>> out(input.size());
  if (!input.empty()) {
    transform(input.data(), 1, input.size(), out.data());
  }
  return out;
}

std::vector<double> rfft_magnitudes(std::span<const double> signal) {
  std::vector<std::complex<double>> buf(signal.begin(), signal.end());
  const auto spectrum = fft(buf);
  std::vector<double> mags(signal.size() / 2 + 1);
  for (std::size_t k = 0; k < mags.size() && k < spectrum.size(); ++k) {
    mags[k] = std::abs(spectrum[k]);
  }
  return mags;
}

}  // namespace mealsense::features
