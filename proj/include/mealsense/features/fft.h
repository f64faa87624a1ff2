#pragma once

#include <complex>
#include <span>
#include <vector>

namespace mealsense::features {

// Mixed-radix decimation-in-time FFT for any length; prime factors fall back
// to a direct sum over that factor.
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> input);

// |X_k| for k = 0 .. n/2 of a real signal.
std::vector<double> rfft_magnitudes(std::span<const double> signal);

}  // namespace mealsense::features
