#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace rangesim::fft {

/// In-place iterative radix-2 FFT. n must be a power of two.
void transform(std::vector<std::complex<double>>& data, bool inverse);

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

}  // namespace rangesim::fft
