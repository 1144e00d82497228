#pragma once

// Run ingestion, high-pass filtering and peak-to-peak envelopes.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rqews/error.hpp"
#include "rqews/numeric.hpp"

namespace rqews {

/// Uniformly sampled scalar channel. Sample i is taken at start_time + i / sample_rate.
struct TimeSeries {
  std::vector<double> samples;
  double sample_rate = 0.0;  // Hz
  double start_time = 0.0;   // s
  std::string channel_id;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  double time_at(std::size_t i) const { return start_time + static_cast<double>(i) / sample_rate; }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
      throw ValidationError("sample_rate must be positive and finite");
  }
};

struct RunMetadata {
  std::string run_id;
  std::optional<double> mean_chamber_pressure;  // p_cc, bar
  std::string notes;

  double p_cc() const {
    if (!mean_chamber_pressure || !(*mean_chamber_pressure > 0.0))
      throw ValidationError("run '" + run_id + "' has no positive mean chamber pressure (p_cc)");
    return *mean_chamber_pressure;
  }
};

struct LoadedRun {
  TimeSeries series;
  RunMetadata metadata;
};

enum class RunFormat { csv, binary };

enum class FilterKind { high_pass };

/// zero_phase applies the filter forward and backward (offline use, e.g. labeling);
/// otherwise a single causal pass is used (feature extraction, online prediction).
struct FilterSpec {
  double cutoff_hz = 1000.0;
  int order = 4;
  FilterKind kind = FilterKind::high_pass;
  bool zero_phase = true;

  void validate(double sample_rate) const {
    if (order < 1 || order > 16) throw ValidationError("filter order must be in [1, 16]");
    if (!(cutoff_hz > 0.0)) throw ValidationError("filter cutoff must be positive");
    if (!(cutoff_hz < sample_rate / 2.0))
      throw ValidationError("filter cutoff " + format_double(cutoff_hz) + " Hz is not below Nyquist (" +
                            format_double(sample_rate / 2.0) + " Hz)");
  }
};

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char kRunMagic[4] = {'R', 'Q', 'S', '1'};

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

inline void put_f64_le(std::ostream& os, double v) { put_u64_le(os, std::bit_cast<std::uint64_t>(v)); }

inline bool get_u64_le(std::istream& is, std::uint64_t& v) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return true;
}

inline bool get_f64_le(std::istream& is, double& v) {
  std::uint64_t u;
  if (!get_u64_le(is, u)) return false;
  v = std::bit_cast<double>(u);
  return true;
}

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace detail

/// Reads a run in CSV layout from a stream (header lines "# key=value", then one
/// sample per line). Used by load_run and by streaming consumers.
inline LoadedRun read_run_csv(std::istream& in, const std::string& default_id = {}) {
  LoadedRun run;
  run.metadata.run_id = default_id;
  run.series.channel_id = default_id;
  std::optional<double> rate;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      std::string body = detail::trim(std::string_view(t).substr(1));
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw LoadError(LoadError::Kind::malformed_header, "malformed header at line " + std::to_string(lineno));
      const std::string key = detail::trim(std::string_view(body).substr(0, eq));
      const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
      if (key == "sample_rate") {
        auto v = parse_double(value);
        if (!v || !(*v > 0.0) || !std::isfinite(*v))
          throw LoadError(LoadError::Kind::malformed_header, "invalid sample_rate '" + value + "'");
        rate = *v;
      } else if (key == "p_cc") {
        auto v = parse_double(value);
        if (!v || !(*v > 0.0) || !std::isfinite(*v))
          throw LoadError(LoadError::Kind::malformed_header, "invalid p_cc '" + value + "'");
        run.metadata.mean_chamber_pressure = *v;
      } else if (key == "run_id") {
        run.metadata.run_id = value;
        run.series.channel_id = value;
      } else if (key == "start_time") {
        auto v = parse_double(value);
        if (!v || !std::isfinite(*v))
          throw LoadError(LoadError::Kind::malformed_header, "invalid start_time '" + value + "'");
        run.series.start_time = *v;
      } else if (key == "notes") {
        run.metadata.notes = value;
      }
      // Unknown header keys (e.g. provenance) are carried by writers but ignored here.
      continue;
    }
    if (!rate) throw LoadError(LoadError::Kind::malformed_header, "missing '# sample_rate=' header");
    auto v = parse_double(t);
    if (!v)
      throw LoadError(LoadError::Kind::malformed_header,
                      "unparsable sample '" + t + "' at line " + std::to_string(lineno));
    if (!std::isfinite(*v))
      throw LoadError(LoadError::Kind::non_finite,
                      "non-finite sample at index " + std::to_string(run.series.samples.size()));
    run.series.samples.push_back(*v);
  }
  if (!rate) throw LoadError(LoadError::Kind::malformed_header, "missing '# sample_rate=' header");
  if (run.series.samples.empty()) throw LoadError(LoadError::Kind::empty, "run contains no samples");
  run.series.sample_rate = *rate;
  return run;
}

/// Reads the binary layout: "RQS1", u64 count, f64 sample_rate, f64 p_cc, samples (all little-endian).
inline LoadedRun read_run_binary(std::istream& in, const std::string& default_id = {}) {
  char magic[4];
  if (!in.read(magic, 4)) throw LoadError(LoadError::Kind::empty, "run file is empty");
  if (std::memcmp(magic, detail::kRunMagic, 4) != 0) throw LoadError(LoadError::Kind::bad_magic, "bad magic bytes");
  std::uint64_t count = 0;
  double rate = 0.0, pcc = 0.0;
  if (!detail::get_u64_le(in, count) || !detail::get_f64_le(in, rate) || !detail::get_f64_le(in, pcc))
    throw LoadError(LoadError::Kind::truncated, "truncated binary header");
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw LoadError(LoadError::Kind::malformed_header, "invalid sample_rate in binary header");
  if (count == 0) throw LoadError(LoadError::Kind::empty, "run contains no samples");
  LoadedRun run;
  run.metadata.run_id = default_id;
  run.series.channel_id = default_id;
  run.series.sample_rate = rate;
  if (pcc > 0.0 && std::isfinite(pcc)) run.metadata.mean_chamber_pressure = pcc;
  if (count > (std::uint64_t{1} << 40)) throw LoadError(LoadError::Kind::malformed_header, "implausible sample count");
  run.series.samples.resize(static_cast<std::size_t>(count));
  std::vector<unsigned char> raw(static_cast<std::size_t>(count) * 8);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw LoadError(LoadError::Kind::truncated, "binary run truncated: expected " + std::to_string(count) + " samples");
  for (std::size_t i = 0; i < run.series.samples.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(raw[8 * i + static_cast<std::size_t>(b)]) << (8 * b);
    const double v = std::bit_cast<double>(u);
    if (!std::isfinite(v)) throw LoadError(LoadError::Kind::non_finite, "non-finite sample at index " + std::to_string(i));
    run.series.samples[i] = v;
  }
  return run;
}

inline RunFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".csv" || ext == ".txt") ? RunFormat::csv : RunFormat::binary;
}

inline LoadedRun load_run(const std::filesystem::path& path, RunFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open run file '" + path.string() + "'");
  const std::string stem = path.stem().string();
  LoadedRun run = format == RunFormat::csv ? read_run_csv(in, stem) : read_run_binary(in, stem);
  if (run.metadata.run_id.empty()) run.metadata.run_id = stem;
  return run;
}

inline LoadedRun load_run(const std::filesystem::path& path) { return load_run(path, format_from_path(path)); }

inline void write_run_csv(std::ostream& os, const TimeSeries& series, const RunMetadata& meta) {
  os << "# sample_rate=" << format_double(series.sample_rate) << '\n';
  if (meta.mean_chamber_pressure) os << "# p_cc=" << format_double(*meta.mean_chamber_pressure) << '\n';
  os << "# run_id=" << meta.run_id << '\n';
  if (series.start_time != 0.0) os << "# start_time=" << format_double(series.start_time) << '\n';
  for (double v : series.samples) os << format_double(v) << '\n';
}

inline void write_run_binary(std::ostream& os, const TimeSeries& series, const RunMetadata& meta) {
  os.write(detail::kRunMagic, 4);
  detail::put_u64_le(os, series.samples.size());
  detail::put_f64_le(os, series.sample_rate);
  detail::put_f64_le(os, meta.mean_chamber_pressure.value_or(0.0));
  std::vector<unsigned char> raw(series.samples.size() * 8);
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    const auto u = std::bit_cast<std::uint64_t>(series.samples[i]);
    for (int b = 0; b < 8; ++b) raw[8 * i + static_cast<std::size_t>(b)] = static_cast<unsigned char>(u >> (8 * b));
  }
  os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

inline void save_run(const std::filesystem::path& path, const TimeSeries& series, const RunMetadata& meta,
                     RunFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError(LoadError::Kind::io, "cannot write run file '" + path.string() + "'");
  if (format == RunFormat::csv)
    write_run_csv(out, series, meta);
  else
    write_run_binary(out, series, meta);
  if (!out) throw LoadError(LoadError::Kind::io, "write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Butterworth high-pass as second-order sections
// ---------------------------------------------------------------------------

/// One biquad in transposed direct form II, a0 normalised to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

/// Digital Butterworth high-pass of the given order with its -3 dB point at
/// edge_hz (bilinear transform with pre-warping).
inline std::vector<Biquad> butterworth_highpass(int order, double edge_hz, double sample_rate) {
  const double w = std::tan(std::numbers::pi * edge_hz / sample_rate);
  std::vector<Biquad> sections;
  const int pairs = order / 2;
  for (int k = 1; k <= pairs; ++k) {
    // Prototype pole pair at angle theta from the imaginary axis: s^2 + c s + 1.
    const double c = 2.0 * std::sin(std::numbers::pi * (2.0 * k - 1.0) / (2.0 * order));
    const double a0 = 1.0 + c * w + w * w;
    Biquad q;
    q.b0 = 1.0 / a0;
    q.b1 = -2.0 / a0;
    q.b2 = 1.0 / a0;
    q.a1 = (2.0 * w * w - 2.0) / a0;
    q.a2 = (1.0 - c * w + w * w) / a0;
    sections.push_back(q);
  }
  if (order % 2 == 1) {
    const double a0 = 1.0 + w;
    Biquad q;
    q.b0 = 1.0 / a0;
    q.b1 = -1.0 / a0;
    q.b2 = 0.0;
    q.a1 = (w - 1.0) / a0;
    q.a2 = 0.0;
    sections.push_back(q);
  }
  return sections;
}

/// Magnitude of the cascaded sections at frequency f.
inline double sos_magnitude(std::span<const Biquad> sos, double f, double sample_rate) {
  const double om = 2.0 * std::numbers::pi * f / sample_rate;
  double mag = 1.0;
  for (const auto& q : sos) {
    // z^-1 = e^{-j om}
    const double c1 = std::cos(om), s1 = -std::sin(om);
    const double c2 = std::cos(2 * om), s2 = -std::sin(2 * om);
    const double nr = q.b0 + q.b1 * c1 + q.b2 * c2, ni = q.b1 * s1 + q.b2 * s2;
    const double dr = 1.0 + q.a1 * c1 + q.a2 * c2, di = q.a1 * s1 + q.a2 * s2;
    mag *= std::sqrt((nr * nr + ni * ni) / (dr * dr + di * di));
  }
  return mag;
}

/// Per-pass design edge such that the forward-backward cascade is -3 dB at cutoff.
inline double zero_phase_design_edge(int order, double cutoff_hz, double sample_rate) {
  const double wc = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  const double wp = wc * std::pow(std::numbers::sqrt2 - 1.0, 1.0 / (2.0 * order));
  return std::atan(wp) * sample_rate / std::numbers::pi;
}

inline std::vector<Biquad> design_filter(const FilterSpec& spec, double sample_rate) {
  spec.validate(sample_rate);
  const double edge = spec.zero_phase ? zero_phase_design_edge(spec.order, spec.cutoff_hz, sample_rate) : spec.cutoff_hz;
  return butterworth_highpass(spec.order, edge, sample_rate);
}

/// Stateful causal filter over a section cascade. Initial state is the steady
/// state for a constant input equal to the first sample, so a DC offset does
/// not produce a start-up transient.
class SosFilter {
 public:
  explicit SosFilter(std::vector<Biquad> sos) : sos_(std::move(sos)), state_(sos_.size()) {}

  double process(double x) {
    if (!primed_) prime(x);
    for (std::size_t k = 0; k < sos_.size(); ++k) {
      const Biquad& q = sos_[k];
      auto& z = state_[k];
      const double y = q.b0 * x + z[0];
      z[0] = q.b1 * x - q.a1 * y + z[1];
      z[1] = q.b2 * x - q.a2 * y;
      x = y;
    }
    return x;
  }

  void prime(double x0) {
    double x = x0;
    for (std::size_t k = 0; k < sos_.size(); ++k) {
      const Biquad& q = sos_[k];
      const double g = q.dc_gain();
      const double y = g * x;
      state_[k][1] = q.b2 * x - q.a2 * y;
      state_[k][0] = y - q.b0 * x;
      x = y;
    }
    primed_ = true;
  }

  void reset() { primed_ = false; }

 private:
  std::vector<Biquad> sos_;
  std::vector<std::array<double, 2>> state_;
  bool primed_ = false;
};

namespace detail {

inline std::vector<double> filter_forward(std::span<const Biquad> sos, std::span<const double> x) {
  SosFilter f(std::vector<Biquad>(sos.begin(), sos.end()));
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f.process(x[i]);
  return y;
}

}  // namespace detail

/// High-pass filter. Zero-phase mode pads with an odd extension, runs the
/// cascade forward and backward, and strips the padding.
inline TimeSeries high_pass(const TimeSeries& series, const FilterSpec& spec) {
  series.validate();
  if (series.empty()) throw ValidationError("high_pass on empty series");
  const auto sos = design_filter(spec, series.sample_rate);
  TimeSeries out = series;
  if (!spec.zero_phase) {
    out.samples = detail::filter_forward(sos, series.samples);
    return out;
  }
  const std::size_t n = series.size();
  const std::size_t pad = std::min<std::size_t>(n - 1, 3 * (2 * sos.size() + 1));
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  const double first = series.samples.front(), last = series.samples.back();
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * first - series.samples[i]);
  ext.insert(ext.end(), series.samples.begin(), series.samples.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * last - series.samples[n - 1 - i]);
  auto fwd = detail::filter_forward(sos, ext);
  std::reverse(fwd.begin(), fwd.end());
  auto bwd = detail::filter_forward(sos, fwd);
  std::reverse(bwd.begin(), bwd.end());
  out.samples.assign(bwd.begin() + static_cast<std::ptrdiff_t>(pad), bwd.begin() + static_cast<std::ptrdiff_t>(pad + n));
  return out;
}

// ---------------------------------------------------------------------------
// Envelope
// ---------------------------------------------------------------------------

struct EnvelopeSpec {
  double window_s = 0.010;
  double stride_s = 0.001;
};

/// Peak-to-peak amplitude over trailing windows, in percent of p_cc.
/// Output sample k covers input samples [k*S, k*S + W) and is stamped with the
/// window end time start_time + (k*S + W) / sample_rate.
inline TimeSeries peak_to_peak_envelope(const TimeSeries& series, double window_s, double p_cc,
                                        double stride_s = 0.001) {
  series.validate();
  if (!(p_cc > 0.0)) throw ValidationError("p_cc must be positive");
  const auto window = static_cast<std::size_t>(std::llround(window_s * series.sample_rate));
  auto stride = static_cast<std::size_t>(std::llround(stride_s * series.sample_rate));
  if (stride == 0) stride = 1;
  if (window < 2) throw ValidationError("envelope window must span at least 2 samples");
  if (window > series.size())
    throw ValidationError("envelope window (" + std::to_string(window) + " samples) longer than series (" +
                          std::to_string(series.size()) + ")");

  const auto& x = series.samples;
  const std::size_t count = (x.size() - window) / stride + 1;
  TimeSeries out;
  out.sample_rate = series.sample_rate / static_cast<double>(stride);
  out.start_time = series.start_time + static_cast<double>(window) / series.sample_rate;
  out.channel_id = series.channel_id;
  out.samples.reserve(count);

  std::deque<std::size_t> maxq, minq;
  std::size_t next_emit = window;  // exclusive end of the next window to report
  for (std::size_t i = 0; i < x.size() && out.samples.size() < count; ++i) {
    while (!maxq.empty() && x[maxq.back()] <= x[i]) maxq.pop_back();
    maxq.push_back(i);
    while (!minq.empty() && x[minq.back()] >= x[i]) minq.pop_back();
    minq.push_back(i);
    if (i + 1 == next_emit) {
      const std::size_t lo = i + 1 - window;
      while (maxq.front() < lo) maxq.pop_front();
      while (minq.front() < lo) minq.pop_front();
      out.samples.push_back(100.0 * (x[maxq.front()] - x[minq.front()]) / p_cc);
      next_emit += stride;
    }
  }
  return out;
}

}  // namespace rqews
