#pragma once

#include <complex>
#include <vector>

namespace diffroll {

// In-place radix-2 FFT. Size must be a power of two. Double precision so
// feature extraction is bit-reproducible and oracle-friendly.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse = false);

// Magnitude spectrum |X[k]| for k = 0..n/2 of a real frame (zero-padded or
// truncated to n, which must be a power of two).
std::vector<double> real_magnitude_spectrum(const std::vector<double>& frame, size_t n);

}  // namespace diffroll
