#include "usbt/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace usbt {

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw std::invalid_argument("fft size must be a power of two");
  }
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  // Butterflies on raw doubles: std::complex operator* routes through the
  // C99 NaN-propagation helper, which is an order of magnitude slower.
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        const double ur = a[i + k].real(), ui = a[i + k].imag();
        const double br = a[i + k + len / 2].real();
        const double bi = a[i + k + len / 2].imag();
        const double vr = br * cr - bi * ci;
        const double vi = br * ci + bi * cr;
        a[i + k] = {ur + vr, ui + vi};
        a[i + k + len / 2] = {ur - vr, ui - vi};
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

std::vector<std::complex<double>> fft_real(const float* x, size_t n,
                                           size_t n_fft) {
  std::vector<std::complex<double>> a(n_fft, {0.0, 0.0});
  const size_t m = n < n_fft ? n : n_fft;
  for (size_t i = 0; i < m; ++i) a[i] = std::complex<double>(x[i], 0.0);
  fft_inplace(a);
  return a;
}

std::vector<std::complex<double>> fft_real(const std::vector<float>& x,
                                           size_t n_fft) {
  return fft_real(x.data(), x.size(), n_fft);
}

std::vector<double> power_spectrum(const std::vector<double>& frame,
                                   size_t n_fft) {
  std::vector<std::complex<double>> a(n_fft, {0.0, 0.0});
  const size_t m = frame.size() < n_fft ? frame.size() : n_fft;
  for (size_t i = 0; i < m; ++i) a[i] = std::complex<double>(frame[i], 0.0);
  fft_inplace(a);
  std::vector<double> p(n_fft / 2 + 1);
  for (size_t k = 0; k < p.size(); ++k) p[k] = std::norm(a[k]);
  return p;
}

}  // namespace usbt
