#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>

#include "rqews/error.hpp"

namespace rqews {

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by n)
};

/// Two-pass mean and population standard deviation.
inline MeanStd mean_std(std::span<const double> x) {
  MeanStd out;
  if (x.empty()) return out;
  double sum = 0.0;
  for (double v : x) sum += v;
  out.mean = sum / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) {
    const double d = v - out.mean;
    ss += d * d;
  }
  out.stddev = std::sqrt(ss / static_cast<double>(x.size()));
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. Inputs are centred before
/// accumulation so large abscissae (timestamps in seconds) do not lose precision.
/// Ordinates are taken relative to y[0] first, so constant data give slope 0 exactly.
inline LineFit least_squares_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("least squares needs >= 2 paired points");
  const double n = static_cast<double>(x.size());
  const double y0 = y[0];
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i] - y0;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = (y[i] - y0) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) throw ValidationError("least squares abscissae are all equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y0 + my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// C99 hex-float text, e.g. "0x1.8p+1". Exact for every finite double.
inline std::string to_hex_float(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const bool neg = std::signbit(v);
  char* start = buf;
  if (neg) *start++ = '-';
  *start++ = '0';
  *start++ = 'x';
  auto res = std::to_chars(start, buf + sizeof(buf), std::fabs(v), std::chars_format::hex);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  bool neg = false;
  std::string_view body = s;
  if (body.front() == '-' || body.front() == '+') {
    neg = body.front() == '-';
    body.remove_prefix(1);
  }
  double v = 0.0;
  if (body.size() > 2 && body[0] == '0' && (body[1] == 'x' || body[1] == 'X')) {
    body.remove_prefix(2);
    auto res = std::from_chars(body.data(), body.data() + body.size(), v, std::chars_format::hex);
    if (res.ec != std::errc{} || res.ptr != body.data() + body.size()) return std::nullopt;
    return neg ? -v : v;
  }
  if (body == "nan" || body == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (body == "inf" || body == "Inf") return neg ? -std::numeric_limits<double>::infinity()
                                                  : std::numeric_limits<double>::infinity();
  auto res = std::from_chars(body.data(), body.data() + body.size(), v);
  if (res.ec != std::errc{} || res.ptr != body.data() + body.size()) return std::nullopt;
  return neg ? -v : v;
}

/// Parses a hex-float string written by to_hex_float.
inline double from_hex_float(std::string_view s) {
  auto v = parse_double(s);
  if (!v) throw LoadError(LoadError::Kind::malformed_header, "invalid number '" + std::string(s) + "'");
  return *v;
}

}  // namespace rqews
