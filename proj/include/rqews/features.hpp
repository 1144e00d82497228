#pragma once

// Sliding-window RQA sweep, trend slopes, feature vectors and standardization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rqews/dfa.hpp"
#include "rqews/embedding.hpp"
#include "rqews/error.hpp"
#include "rqews/numeric.hpp"
#include "rqews/parallel.hpp"
#include "rqews/rqa.hpp"
#include "rqews/rqa_sliding.hpp"
#include "rqews/signal.hpp"

namespace rqews {

inline constexpr std::size_t kFeatureCount = 10;

/// Column names in feature order: five measures, then their trend slopes.
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "rr", "det", "lam", "entr", "ratio", "s_rr", "s_det", "s_lam", "s_entr", "s_ratio"};

struct TimedMeasures {
  double t = 0.0;  // window end time, s
  RqaMeasures measures;
  bool valid = true;
};

struct FeatureVector {
  double t = 0.0;
  std::array<double, kFeatureCount> values{};
  double h = std::numeric_limits<double>::quiet_NaN();  // optional Hurst column
};

struct FeatureSeries {
  std::string run_id;
  std::vector<FeatureVector> vectors;
  double stride_s = 0.01;
  bool has_h = false;
};

struct SweepConfig {
  double window_s = 0.2;
  double stride_s = 0.01;
  double trend_span_s = 0.1;

  void validate(double sample_rate) const {
    if (!(window_s > 0.0)) throw ValidationError("sweep window must be positive");
    if (!(stride_s > 0.0)) throw ValidationError("sweep stride must be positive");
    if (!(trend_span_s > 0.0)) throw ValidationError("trend span must be positive");
    if (std::llround(stride_s * sample_rate) < 1) throw ValidationError("sweep stride shorter than one sample");
    if (std::llround(window_s * sample_rate) < 2) throw ValidationError("sweep window shorter than two samples");
  }
  std::size_t window_samples(double fs) const { return static_cast<std::size_t>(std::llround(window_s * fs)); }
  std::size_t stride_samples(double fs) const { return static_cast<std::size_t>(std::llround(stride_s * fs)); }
  /// Trend points per fit minus one.
  std::size_t span_steps() const { return static_cast<std::size_t>(std::llround(trend_span_s / stride_s)); }
};

/// One entry per window [k*S, k*S + W) of the (already filtered) series,
/// stamped with the window end time. Degenerate windows are flagged invalid.
inline std::vector<TimedMeasures> sweep_measures(const TimeSeries& series, const EmbeddingConfig& emb,
                                                 const RecurrenceConfig& rqa, const SweepConfig& sweep = {},
                                                 std::size_t threads = 0) {
  series.validate();
  sweep.validate(series.sample_rate);
  emb.validate();
  rqa.validate();
  const std::size_t w = sweep.window_samples(series.sample_rate);
  const std::size_t s = sweep.stride_samples(series.sample_rate);
  if (series.size() < w) return {};
  const std::size_t count = (series.size() - w) / s + 1;
  std::vector<TimedMeasures> out(count);
  const std::span<const double> x(series.samples);
  const auto one = [&](std::size_t k, auto&& measure) {
    auto& e = out[k];
    e.t = series.start_time + static_cast<double>(k * s + w) / series.sample_rate;
    try {
      e.measures = measure(x.subspan(k * s, w));
    } catch (const DegenerateSignal&) {
      e.valid = false;
    }
  };
  if (!SlidingRqa::fits(emb, rqa, w)) {
    parallel_for(count, threads, [&](std::size_t k) {
      thread_local RqaWorkspace ws;
      one(k, [&](std::span<const double> win) { return ws.window_measures(win, emb, rqa); });
    });
    return out;
  }
  // Consecutive windows share state, so each worker takes a contiguous block.
  const std::size_t blocks = std::min(count, resolve_threads(threads));
  parallel_for(blocks, blocks, [&](std::size_t b) {
    SlidingRqa sl(emb, rqa, w, s);
    for (std::size_t k = b * count / blocks; k < (b + 1) * count / blocks; ++k)
      one(k, [&](std::span<const double> win) { return sl.measures(win); });
  });
  return out;
}

/// Least-squares slope (per second) of the points with t >= t_last - span_s.
inline double trend_slope(std::span<const std::pair<double, double>> history, double span_s = 0.1) {
  if (history.empty()) throw ValidationError("insufficient history for trend slope");
  const double t_end = history.back().first;
  const double tol = 1e-9 * std::max(1.0, std::fabs(t_end));
  std::vector<double> t, v;
  for (const auto& [ti, vi] : history) {
    if (ti >= t_end - span_s - tol) {
      t.push_back(ti);
      v.push_back(vi);
    }
  }
  if (t.size() < 2) throw ValidationError("insufficient history for trend slope");
  return least_squares_line(t, v).slope;
}

/// Streaming fold from window measures to feature vectors. A vector is emitted
/// once span_steps + 1 consecutive valid entries are available; an invalid
/// entry clears the history.
class TrendAssembler {
 public:
  explicit TrendAssembler(std::size_t span_steps) : span_steps_(span_steps) {
    if (span_steps_ < 1) throw ValidationError("trend span must cover at least one stride");
  }

  std::optional<FeatureVector> push(const TimedMeasures& m) {
    if (!m.valid) {
      history_.clear();
      return std::nullopt;
    }
    history_.push_back(m);
    if (history_.size() > span_steps_ + 1) history_.pop_front();
    if (history_.size() < span_steps_ + 1) return std::nullopt;

    FeatureVector fv;
    fv.t = m.t;
    const auto as_array = [](const RqaMeasures& r) { return std::array<double, 5>{r.rr, r.det, r.lam, r.entr, r.ratio}; };
    const auto cur = as_array(m.measures);
    std::vector<double> ts(history_.size()), ys(history_.size());
    for (std::size_t i = 0; i < history_.size(); ++i) ts[i] = history_[i].t;
    for (std::size_t f = 0; f < 5; ++f) {
      fv.values[f] = cur[f];
      for (std::size_t i = 0; i < history_.size(); ++i) ys[i] = as_array(history_[i].measures)[f];
      fv.values[5 + f] = least_squares_line(ts, ys).slope;
    }
    return fv;
  }

  void reset() { history_.clear(); }

 private:
  std::size_t span_steps_;
  std::deque<TimedMeasures> history_;
};

inline FeatureSeries assemble_features(std::span<const TimedMeasures> measures, const SweepConfig& sweep,
                                       std::string run_id = {}) {
  FeatureSeries out;
  out.run_id = std::move(run_id);
  out.stride_s = sweep.stride_s;
  TrendAssembler asm_(sweep.span_steps());
  for (const auto& m : measures)
    if (auto fv = asm_.push(m)) out.vectors.push_back(*fv);
  return out;
}

// ---------------------------------------------------------------------------
// Extraction pipeline
// ---------------------------------------------------------------------------

struct FeatureConfig {
  FilterSpec filter{1000.0, 4, FilterKind::high_pass, false};  // causal for feature extraction
  EmbeddingConfig embedding{2, 15};
  RecurrenceConfig rqa;
  SweepConfig sweep;
  bool hurst = false;
  HurstConfig hurst_cfg;
};

/// Hurst exponent at time index end (exclusive) over the trailing
/// 2*scale_max samples; NaN when not enough history or degenerate.
inline double trailing_hurst(std::span<const double> filtered, std::size_t end, const HurstConfig& cfg) {
  const std::size_t need = cfg.min_length();
  if (end < need) return std::numeric_limits<double>::quiet_NaN();
  try {
    return hurst_exponent(filtered.subspan(end - need, need), cfg).h;
  } catch (const DegenerateSignal&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

/// Causal high-pass, windowed RQA, trends. Every vector at time t depends only
/// on samples at times <= t.
inline FeatureSeries extract_features(const TimeSeries& raw, const FeatureConfig& cfg, std::string run_id = {},
                                      std::size_t threads = 0) {
  FilterSpec causal = cfg.filter;
  causal.zero_phase = false;
  const TimeSeries filtered = high_pass(raw, causal);
  auto measures = sweep_measures(filtered, cfg.embedding, cfg.rqa, cfg.sweep, threads);
  FeatureSeries fs = assemble_features(measures, cfg.sweep, std::move(run_id));
  if (cfg.hurst) {
    fs.has_h = true;
    const double rate = raw.sample_rate;
    const std::span<const double> x(filtered.samples);
    parallel_for(fs.vectors.size(), threads, [&](std::size_t i) {
      const auto end = static_cast<std::size_t>(std::llround((fs.vectors[i].t - raw.start_time) * rate));
      fs.vectors[i].h = trailing_hurst(x, std::min(end, x.size()), cfg.hurst_cfg);
    });
  }
  return fs;
}

/// Incremental extractor for streamed input: push samples in chunks of any
/// size, receive each feature vector as soon as its window is complete.
class FeatureStream {
 public:
  FeatureStream(const FeatureConfig& cfg, double sample_rate, double start_time = 0.0)
      : cfg_(cfg),
        rate_(sample_rate),
        start_(start_time),
        filter_([&] {
          FilterSpec causal = cfg.filter;
          causal.zero_phase = false;
          return design_filter(causal, sample_rate);
        }()),
        window_(cfg.sweep.window_samples(sample_rate)),
        stride_(cfg.sweep.stride_samples(sample_rate)),
        trends_(cfg.sweep.span_steps()) {
    cfg_.sweep.validate(sample_rate);
    keep_ = window_;
    if (cfg_.hurst) keep_ = std::max(keep_, cfg_.hurst_cfg.min_length());
  }

  /// Appends samples; returns the feature vectors completed by them.
  std::vector<FeatureVector> push(std::span<const double> samples) {
    std::vector<FeatureVector> out;
    for (double v : samples) {
      buffer_.push_back(filter_.process(v));
      ++consumed_;
      if (consumed_ >= window_ && (consumed_ - window_) % stride_ == 0) {
        if (auto fv = complete_window()) out.push_back(*fv);
      }
      if (buffer_.size() > 2 * keep_ + stride_) compact();
    }
    return out;
  }

  std::size_t samples_consumed() const { return consumed_; }

 private:
  std::optional<FeatureVector> complete_window() {
    const std::span<const double> all(buffer_);
    const auto win = all.subspan(all.size() - window_, window_);
    TimedMeasures m;
    m.t = start_ + static_cast<double>(consumed_) / rate_;
    try {
      if (!sliding_ && SlidingRqa::fits(cfg_.embedding, cfg_.rqa, window_))
        sliding_.emplace(cfg_.embedding, cfg_.rqa, window_, stride_);
      m.measures = sliding_ ? sliding_->measures(win) : ws_.window_measures(win, cfg_.embedding, cfg_.rqa);
    } catch (const DegenerateSignal&) {
      m.valid = false;
    }
    auto fv = trends_.push(m);
    if (fv && cfg_.hurst) {
      const std::size_t need = cfg_.hurst_cfg.min_length();
      fv->h = consumed_ >= need ? trailing_hurst(all, all.size(), cfg_.hurst_cfg)
                                : std::numeric_limits<double>::quiet_NaN();
    }
    return fv;
  }

  void compact() {
    buffer_.erase(buffer_.begin(), buffer_.end() - static_cast<std::ptrdiff_t>(keep_));
  }

  FeatureConfig cfg_;
  double rate_;
  double start_;
  SosFilter filter_;
  std::size_t window_;
  std::size_t stride_;
  std::size_t keep_ = 0;
  std::size_t consumed_ = 0;
  std::vector<double> buffer_;
  RqaWorkspace ws_;
  std::optional<SlidingRqa> sliding_;
  TrendAssembler trends_;
};

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Per-feature affine standardization, fitted on training rows only.
struct Scaler {
  std::vector<double> means;
  std::vector<double> stddevs;  // population standard deviation, each > 0

  std::size_t dim() const { return means.size(); }

  static Scaler fit_rows(std::span<const std::vector<double>> rows) {
    if (rows.empty()) throw ValidationError("cannot fit scaler on empty data");
    const std::size_t d = rows.front().size();
    Scaler s;
    s.means.assign(d, 0.0);
    s.stddevs.assign(d, 0.0);
    std::vector<double> col(rows.size());
    for (std::size_t f = 0; f < d; ++f) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != d) throw ValidationError("ragged rows in scaler fit");
        col[i] = rows[i][f];
      }
      const auto ms = mean_std(col);
      if (!(ms.stddev > 0.0) || !std::isfinite(ms.stddev)) {
        std::string name = d == kFeatureCount ? std::string(" (") + kFeatureNames[f] + ")" : std::string();
        throw ValidationError("feature " + std::to_string(f) + name + " has zero variance in training data");
      }
      s.means[f] = ms.mean;
      s.stddevs[f] = ms.stddev;
    }
    return s;
  }

  void apply_in_place(std::span<double> x) const {
    if (x.size() != dim()) throw ValidationError("scaler dimension mismatch");
    for (std::size_t f = 0; f < x.size(); ++f) x[f] = (x[f] - means[f]) / stddevs[f];
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(x.begin(), x.end());
    apply_in_place(y);
    return y;
  }

  bool operator==(const Scaler&) const = default;
};

inline std::vector<double> as_row(const FeatureVector& v) { return {v.values.begin(), v.values.end()}; }

inline Scaler fit_scaler(std::span<const FeatureSeries> training) {
  std::vector<std::vector<double>> rows;
  for (const auto& fs : training)
    for (const auto& v : fs.vectors) rows.push_back(as_row(v));
  return Scaler::fit_rows(rows);
}

inline FeatureSeries apply_scaler(const Scaler& scaler, const FeatureSeries& fs) {
  FeatureSeries out = fs;
  for (auto& v : out.vectors) scaler.apply_in_place(v.values);
  return out;
}

// ---------------------------------------------------------------------------
// Feature CSV
// ---------------------------------------------------------------------------

/// Comment lines ("# key=value") first, then the header row and one row per vector.
inline void write_features_csv(std::ostream& os, const FeatureSeries& fs,
                               std::span<const std::pair<std::string, std::string>> comments = {}) {
  os << "# run_id=" << fs.run_id << '\n';
  os << "# stride_s=" << format_double(fs.stride_s) << '\n';
  for (const auto& [k, v] : comments) os << "# " << k << '=' << v << '\n';
  os << 't';
  for (const char* name : kFeatureNames) os << ',' << name;
  if (fs.has_h) os << ",h";
  os << '\n';
  for (const auto& v : fs.vectors) {
    os << format_double(v.t);
    for (double x : v.values) os << ',' << format_double(x);
    if (fs.has_h) os << ',' << format_double(v.h);
    os << '\n';
  }
}

inline FeatureSeries read_features_csv(std::istream& in, const std::string& default_id = {}) {
  FeatureSeries fs;
  fs.run_id = default_id;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto body = detail::trim(std::string_view(line).substr(1));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const auto key = detail::trim(std::string_view(body).substr(0, eq));
      const auto val = detail::trim(std::string_view(body).substr(eq + 1));
      if (key == "run_id" && !val.empty()) fs.run_id = val;
      if (key == "stride_s") {
        if (auto d = parse_double(val)) fs.stride_s = *d;
      }
      continue;
    }
    if (!header_seen) {
      std::string expect = "t";
      for (const char* name : kFeatureNames) expect += std::string(",") + name;
      std::string compact;
      for (char c : line)
        if (c != ' ') compact += c;
      if (compact == expect + ",h")
        fs.has_h = true;
      else if (compact != expect)
        throw LoadError(LoadError::Kind::malformed_header, "feature CSV header mismatch at line " + std::to_string(line_no));
      header_seen = true;
      continue;
    }
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      auto d = parse_double(cell);
      if (!d) throw LoadError(LoadError::Kind::malformed_header, "unparsable value at line " + std::to_string(line_no));
      cells.push_back(*d);
    }
    const std::size_t want = 1 + kFeatureCount + (fs.has_h ? 1 : 0);
    if (cells.size() != want)
      throw LoadError(LoadError::Kind::truncated, "expected " + std::to_string(want) + " columns at line " +
                                                      std::to_string(line_no));
    FeatureVector v;
    v.t = cells[0];
    for (std::size_t f = 0; f < kFeatureCount; ++f) v.values[f] = cells[1 + f];
    if (fs.has_h) v.h = cells[1 + kFeatureCount];
    fs.vectors.push_back(v);
  }
  if (!header_seen) throw LoadError(LoadError::Kind::empty, "feature CSV has no header row");
  return fs;
}

}  // namespace rqews
