#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace usbt {

// In-place iterative radix-2 FFT. a.size() must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

// FFT of a real signal zero-padded to n_fft (power of two). Returns the
// full complex spectrum of length n_fft.
std::vector<std::complex<double>> fft_real(const float* x, size_t n,
                                           size_t n_fft);
std::vector<std::complex<double>> fft_real(const std::vector<float>& x,
                                           size_t n_fft);

// Magnitude-squared of bins 0..n_fft/2 from a real signal.
std::vector<double> power_spectrum(const std::vector<double>& frame,
                                   size_t n_fft);

size_t next_pow2(size_t n);

}  // namespace usbt
