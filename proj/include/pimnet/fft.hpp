#pragma once

#include <complex>
#include <vector>

namespace pimnet {

/// In-place iterative radix-2 FFT; size must be a power of two.
/// Forward: X[k] = sum_n x[n] e^{-2 pi i k n / N}. Inverse includes the 1/N factor.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false);

bool is_power_of_two(std::size_t n);

} // namespace pimnet
