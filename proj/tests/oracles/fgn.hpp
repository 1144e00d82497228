#pragma once

// Fractional Gaussian noise by circulant embedding (Davies-Harte), with a
// self-contained radix-2 FFT.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k], v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

inline double fgn_autocovariance(std::size_t k, double h) {
  const double kk = static_cast<double>(k);
  return 0.5 * (std::pow(kk + 1.0, 2 * h) - 2.0 * std::pow(kk, 2 * h) + std::pow(std::fabs(kk - 1.0), 2 * h));
}

inline std::vector<double> fgn(std::size_t n, double h, std::mt19937_64& gen) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  const std::size_t size = 2 * m;
  std::vector<std::complex<double>> c(size);
  for (std::size_t k = 0; k <= m; ++k) c[k] = fgn_autocovariance(k, h);
  for (std::size_t k = m + 1; k < size; ++k) c[k] = c[size - k];
  fft(c);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::complex<double>> w(size);
  for (std::size_t k = 0; k < size; ++k) {
    const double lam = c[k].real();
    if (lam < -1e-9) throw std::runtime_error("circulant embedding not nonnegative");
    const double s = std::sqrt(std::max(lam, 0.0) / static_cast<double>(size));
    if (k == 0 || k == m) {
      w[k] = s * nd(gen);
    } else if (k < m) {
      const double a = nd(gen), b = nd(gen);
      w[k] = s * std::complex<double>(a, b) / std::numbers::sqrt2;
      w[size - k] = std::conj(w[k]);
    }
  }
  fft(w);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = w[i].real();
  return out;
}

}  // namespace oracle
