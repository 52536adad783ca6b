#pragma once

#include <cmath>
#include <complex>
#include <vector>

namespace wpnode {

using cdouble = std::complex<double>;

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace detail {

// In-place iterative radix-2 Cooley-Tukey. sign = -1 forward, +1 inverse.
inline void fft_radix2(std::vector<cdouble>& a, int sign) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * M_PI / double(len);
    const cdouble wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        cdouble u = a[i + k];
        cdouble v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// O(n^2) fallback so non-power-of-two even grids still work.
inline void dft_naive(std::vector<cdouble>& a, int sign) {
  const size_t n = a.size();
  std::vector<cdouble> out(n, cdouble(0.0, 0.0));
  for (size_t k = 0; k < n; ++k)
    for (size_t j = 0; j < n; ++j) {
      const double ang = sign * 2.0 * M_PI * double(k * j % n) / double(n);
      out[k] += a[j] * cdouble(std::cos(ang), std::sin(ang));
    }
  a = std::move(out);
}

}  // namespace detail

inline void fft(std::vector<cdouble>& a) {
  if (is_pow2(a.size()))
    detail::fft_radix2(a, -1);
  else
    detail::dft_naive(a, -1);
}

// Unnormalized inverse followed by the 1/n scaling.
inline void ifft(std::vector<cdouble>& a) {
  if (is_pow2(a.size()))
    detail::fft_radix2(a, +1);
  else
    detail::dft_naive(a, +1);
  const double inv = 1.0 / double(a.size());
  for (cdouble& v : a) v *= inv;
}

}  // namespace wpnode
