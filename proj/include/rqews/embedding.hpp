#pragma once

// Delay embedding: delay and dimension estimation, state-vector construction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rqews/error.hpp"
#include "rqews/numeric.hpp"

namespace rqews {

struct EmbeddingConfig {
  std::size_t delay_samples = 2;
  std::size_t dimension = 15;

  void validate() const {
    if (delay_samples < 1) throw ValidationError("embedding delay must be >= 1 sample");
    if (dimension < 1) throw ValidationError("embedding dimension must be >= 1");
  }

  /// Number of source samples spanned by one state vector.
  std::size_t span() const { return (dimension - 1) * delay_samples + 1; }

  /// N = n - (d - 1) * tau, or 0 when the window is too short.
  std::size_t vector_count(std::size_t n) const { return n >= span() ? n - (dimension - 1) * delay_samples : 0; }
};

/// N x d matrix of delay vectors, row-major.
struct StateVectors {
  std::vector<double> data;
  std::size_t rows = 0;
  EmbeddingConfig config;

  std::size_t dim() const { return config.dimension; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * dim(), dim()}; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * dim() + j]; }
};

inline StateVectors embed(std::span<const double> window, const EmbeddingConfig& config) {
  config.validate();
  const std::size_t n = window.size();
  if (n < config.span())
    throw ValidationError("window of " + std::to_string(n) + " samples too short for embedding; need at least " +
                          std::to_string(config.span()));
  StateVectors out;
  out.config = config;
  out.rows = config.vector_count(n);
  out.data.resize(out.rows * config.dimension);
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < config.dimension; ++j)
      out.data[i * config.dimension + j] = window[i + j * config.delay_samples];
  return out;
}

// ---------------------------------------------------------------------------
// Delay from the autocorrelation function
// ---------------------------------------------------------------------------

struct DelayEstimate {
  std::size_t delay = 1;
  double crossing = 0.0;  // interpolated first zero crossing, in samples
  bool fallback = false;  // no zero crossing below max lag; 1/e decay lag used instead
};

/// Biased autocorrelation r(0..max_lag), normalised so r(0) = 1.
inline std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  const auto ms = mean_std(x);
  const std::size_t n = x.size();
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = x[i] - ms.mean;
  double c0 = 0.0;
  for (double v : centred) c0 += v * v;
  if (!(c0 > 0.0)) throw DegenerateSignal("constant window");
  max_lag = std::min(max_lag, n - 1);
  std::vector<double> r(max_lag + 1);
  r[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) s += centred[i] * centred[i + k];
    r[k] = s / c0;
  }
  return r;
}

/// Lag nearest to the first zero crossing of the autocorrelation (linear
/// interpolation between the bracketing lags), searched up to n/4.
inline DelayEstimate estimate_delay(std::span<const double> window, double sample_rate = 1.0) {
  (void)sample_rate;  // the estimate is in samples; the rate only documents units
  if (window.size() < 4) throw ValidationError("estimate_delay needs at least 4 samples");
  const std::size_t max_lag = std::max<std::size_t>(1, window.size() / 4);
  const auto r = autocorrelation(window, max_lag);
  DelayEstimate est;
  for (std::size_t k = 1; k < r.size(); ++k) {
    if (r[k] <= 0.0) {
      const double c = static_cast<double>(k - 1) + r[k - 1] / (r[k - 1] - r[k]);
      est.crossing = c;
      est.delay = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c)));
      return est;
    }
  }
  est.fallback = true;
  const double inv_e = 1.0 / std::numbers::e;
  for (std::size_t k = 1; k < r.size(); ++k) {
    if (r[k] < inv_e) {
      est.delay = k;
      est.crossing = static_cast<double>(k);
      return est;
    }
  }
  est.delay = r.size() - 1;
  est.crossing = static_cast<double>(est.delay);
  return est;
}

// ---------------------------------------------------------------------------
// Cao's method
// ---------------------------------------------------------------------------

struct CaoResult {
  std::size_t dimension = 1;
  bool saturated = true;       // false: no saturation found, d_max returned
  std::vector<double> e;       // E(d) for d = 1 .. d_max + 1 (index d - 1)
  std::vector<double> e1;      // E1(d) = E(d+1) / E(d) for d = 1 .. d_max (index d - 1)
};

struct CaoOptions {
  double saturation_tol = 0.05;
};

namespace detail {

/// Cao's mean distance ratio E(d) with maximum-norm neighbours found in dimension d.
inline double cao_mean_ratio(std::span<const double> x, std::size_t delay, std::size_t d, double dup_tol) {
  const std::size_t n = x.size();
  const std::size_t count = n - d * delay;  // points whose (d+1)-vector exists
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < count; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = count;
    for (std::size_t j = 0; j < count; ++j) {
      if (j == i) continue;
      double dist = 0.0;
      for (std::size_t m = 0; m < d && dist < best; ++m)
        dist = std::max(dist, std::fabs(x[i + m * delay] - x[j + m * delay]));
      if (dist > dup_tol && dist < best) {
        best = dist;
        best_j = j;
      }
    }
    if (best_j == count) continue;
    const double extra = std::fabs(x[i + d * delay] - x[best_j + d * delay]);
    sum += std::max(best, extra) / best;
    ++used;
  }
  if (used == 0) throw DegenerateSignal("no distinct neighbours for Cao's method");
  return sum / static_cast<double>(used);
}

}  // namespace detail

/// Smallest d with |E1(d) - 1| and |E1(d+1) - 1| both below the saturation
/// tolerance; d_max (with saturated = false) when no such d exists.
inline CaoResult cao_dimension(std::span<const double> window, std::size_t delay, std::size_t d_max,
                               const CaoOptions& opts = {}) {
  if (delay < 1 || d_max < 1) throw ValidationError("cao_dimension needs delay >= 1 and d_max >= 1");
  const std::size_t needed = (d_max + 1) * delay + 10;
  if (window.size() < needed)
    throw ValidationError("window too short for Cao's method: need at least " + std::to_string(needed) + " samples");
  const auto ms = mean_std(window);
  if (!(ms.stddev > 0.0)) throw DegenerateSignal("constant window");
  const auto [lo, hi] = std::minmax_element(window.begin(), window.end());
  const double dup_tol = 1e-10 * (*hi - *lo);

  CaoResult res;
  res.e.reserve(d_max + 1);
  for (std::size_t d = 1; d <= d_max + 1; ++d) res.e.push_back(detail::cao_mean_ratio(window, delay, d, dup_tol));
  for (std::size_t d = 1; d <= d_max; ++d) res.e1.push_back(res.e[d] / res.e[d - 1]);

  const auto within = [&](std::size_t d) { return std::fabs(res.e1[d - 1] - 1.0) < opts.saturation_tol; };
  for (std::size_t d = 1; d < d_max; ++d) {
    if (within(d) && within(d + 1)) {
      res.dimension = d;
      res.saturated = true;
      return res;
    }
  }
  res.dimension = d_max;
  res.saturated = false;
  return res;
}

}  // namespace rqews
