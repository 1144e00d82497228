#pragma once

// Detrended fluctuation analysis and the Hurst exponent.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rqews/error.hpp"
#include "rqews/numeric.hpp"

namespace rqews {

struct HurstConfig {
  std::size_t scale_min = 50000;  // samples
  std::size_t scale_max = 70000;
  std::size_t n_scales = 8;
  int order = 1;  // polynomial detrending order, 1 or 2

  void validate() const {
    if (scale_min < 4) throw ValidationError("DFA scale_min must be >= 4");
    if (scale_max < scale_min) throw ValidationError("DFA scale_max must be >= scale_min");
    if (n_scales < 2) throw ValidationError("DFA needs at least 2 scales");
    if (order != 1 && order != 2) throw ValidationError("DFA order must be 1 or 2");
  }

  /// Samples needed so every scale fits at least twice.
  std::size_t min_length() const { return 2 * scale_max; }
};

struct HurstEstimate {
  double h = 0.0;
  std::vector<std::size_t> window_sizes;
  std::vector<double> fluctuations;
  double fit_r2 = 0.0;
};

namespace detail {

/// Sum of squared residuals of y[0..s) after removing a polynomial fit in the
/// segment index. Uses an orthogonal basis so no normal equations are solved.
inline double detrended_ss(const double* y, std::size_t s, int order) {
  const double ds = static_cast<double>(s);
  const double tc = (ds - 1.0) / 2.0;
  double mean = 0.0;
  for (std::size_t t = 0; t < s; ++t) mean += y[t];
  mean /= ds;
  // p1 = t - tc; p2 = p1^2 - (s^2 - 1)/12 is orthogonal to 1 and p1 on 0..s-1.
  const double p2c = (ds * ds - 1.0) / 12.0;
  double y1 = 0.0, n1 = 0.0, y2 = 0.0, n2 = 0.0;
  for (std::size_t t = 0; t < s; ++t) {
    const double p1 = static_cast<double>(t) - tc;
    const double yc = y[t] - mean;
    y1 += yc * p1;
    n1 += p1 * p1;
    if (order == 2) {
      const double p2 = p1 * p1 - p2c;
      y2 += yc * p2;
      n2 += p2 * p2;
    }
  }
  const double b1 = y1 / n1;
  const double b2 = order == 2 ? y2 / n2 : 0.0;
  double ss = 0.0;
  for (std::size_t t = 0; t < s; ++t) {
    const double p1 = static_cast<double>(t) - tc;
    double r = y[t] - mean - b1 * p1;
    if (order == 2) r -= b2 * (p1 * p1 - p2c);
    ss += r * r;
  }
  return ss;
}

inline std::vector<double> profile(std::span<const double> x) {
  const double mean = mean_std(x).mean;
  std::vector<double> y(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += x[i] - mean;
    y[i] = acc;
  }
  return y;
}

inline double fluctuation_from_profile(const std::vector<double>& y, std::size_t scale, int order) {
  const std::size_t n = y.size();
  const std::size_t segs = n / scale;
  double ss = 0.0;
  for (std::size_t v = 0; v < segs; ++v) ss += detrended_ss(y.data() + v * scale, scale, order);
  // Segments from the end cover the remainder left over at the start.
  const std::size_t tail = n - segs * scale;
  for (std::size_t v = 0; v < segs; ++v) ss += detrended_ss(y.data() + tail + v * scale, scale, order);
  return std::sqrt(ss / (2.0 * static_cast<double>(segs) * static_cast<double>(scale)));
}

}  // namespace detail

/// Root-mean-square detrended fluctuation F(scale) over 2*floor(n/scale) segments.
inline double dfa_fluctuation(std::span<const double> window, std::size_t scale, int order = 1) {
  if (scale < 4) throw ValidationError("DFA scale must be >= 4");
  if (order != 1 && order != 2) throw ValidationError("DFA order must be 1 or 2");
  if (window.size() < 2 * scale)
    throw ValidationError("DFA scale " + std::to_string(scale) + " exceeds half the window length " +
                          std::to_string(window.size()));
  return detail::fluctuation_from_profile(detail::profile(window), scale, order);
}

/// n log-spaced integer scales in [lo, hi], both ends included, duplicates removed.
inline std::vector<std::size_t> log_spaced_scales(std::size_t lo, std::size_t hi, std::size_t n) {
  std::vector<std::size_t> out;
  const double a = std::log(static_cast<double>(lo)), b = std::log(static_cast<double>(hi));
  for (std::size_t i = 0; i < n; ++i) {
    const double f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    const auto s = static_cast<std::size_t>(std::llround(std::exp(a + f * (b - a))));
    if (out.empty() || s > out.back()) out.push_back(s);
  }
  out.front() = lo;
  out.back() = std::max(out.back(), hi);
  return out;
}

inline HurstEstimate hurst_exponent(std::span<const double> window, const HurstConfig& cfg) {
  cfg.validate();
  if (window.size() < cfg.min_length())
    throw ValidationError("Hurst window of " + std::to_string(window.size()) + " samples is shorter than 2*scale_max = " +
                          std::to_string(cfg.min_length()));
  if (!(mean_std(window).stddev > 0.0)) throw DegenerateSignal("zero-variance window");
  HurstEstimate est;
  est.window_sizes = log_spaced_scales(cfg.scale_min, cfg.scale_max, cfg.n_scales);
  if (est.window_sizes.size() < 2) throw ValidationError("DFA scale range collapses to a single integer scale");
  const auto y = detail::profile(window);
  std::vector<double> lx, ly;
  for (std::size_t s : est.window_sizes) {
    const double f = detail::fluctuation_from_profile(y, s, cfg.order);
    if (!(f > 0.0)) throw DegenerateSignal("zero fluctuation at scale " + std::to_string(s));
    est.fluctuations.push_back(f);
    lx.push_back(std::log(static_cast<double>(s)));
    ly.push_back(std::log(f));
  }
  const auto fit = least_squares_line(lx, ly);
  est.h = fit.slope;
  est.fit_r2 = fit.r2;
  return est;
}

inline HurstEstimate hurst_exponent(std::span<const double> window, std::size_t scale_min, std::size_t scale_max,
                                    std::size_t n_scales, int order = 1) {
  return hurst_exponent(window, HurstConfig{scale_min, scale_max, n_scales, order});
}

}  // namespace rqews
