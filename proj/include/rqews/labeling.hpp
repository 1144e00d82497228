#pragma once

// Instability intervals from the amplitude envelope, and per-vector class labels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rqews/error.hpp"
#include "rqews/features.hpp"
#include "rqews/numeric.hpp"
#include "rqews/signal.hpp"

namespace rqews {

enum class InstabilityKind { type1, type2 };

inline const char* to_string(InstabilityKind k) { return k == InstabilityKind::type1 ? "type1" : "type2"; }

inline InstabilityKind kind_from_string(const std::string& s) {
  if (s == "type1") return InstabilityKind::type1;
  if (s == "type2") return InstabilityKind::type2;
  throw ValidationError("unknown instability kind '" + s + "'");
}

struct InstabilityInterval {
  double onset_s = 0.0;
  double offset_s = 0.0;
  InstabilityKind kind = InstabilityKind::type1;

  bool operator==(const InstabilityInterval&) const = default;
};

/// Per-vector class: far from instability, transient (shortly before onset), or inside an interval.
enum Label : int { far_stable = -1, excluded = 0, transient = 1 };

struct LabelConfig {
  double thr1 = 6.25;   // percent of p_cc
  double thr2 = 20.0;   // percent of p_cc
  double hold_s = 0.5;  // time below thr1 that confirms the end of an interval
  double lead_s = 0.2;  // transient horizon before onset
  EnvelopeSpec envelope;
  FilterSpec filter;    // zero-phase by default

  void validate() const {
    if (!(thr1 > 0.0) || !(thr2 >= thr1)) throw ValidationError("label thresholds must satisfy 0 < thr1 <= thr2");
    if (!(hold_s >= 0.0)) throw ValidationError("hold_s must be >= 0");
    if (!(lead_s >= 0.0)) throw ValidationError("lead_s must be >= 0");
  }
};

/// Intervals where the envelope is above thr1. An interval ends at the first
/// drop to or below thr1 that then persists for hold_s; shorter dips do not
/// split it. Intervals still open at the end of the data end at the data end.
inline std::vector<InstabilityInterval> detect_intervals(const TimeSeries& envelope, double thr1 = 6.25,
                                                         double thr2 = 20.0, double hold_s = 0.5) {
  envelope.validate();
  std::vector<InstabilityInterval> out;
  const auto& e = envelope.samples;
  const double tol = 1e-9;
  bool inside = false, dropping = false;
  double onset = 0.0, drop = 0.0, peak = 0.0;
  const auto close = [&](double offset) {
    out.push_back({onset, offset, peak >= thr2 ? InstabilityKind::type2 : InstabilityKind::type1});
    inside = dropping = false;
  };
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double t = envelope.time_at(i);
    const bool above = e[i] > thr1;
    if (!inside) {
      if (above) {
        inside = true;
        dropping = false;
        onset = t;
        peak = e[i];
      }
      continue;
    }
    if (above) {
      dropping = false;
      peak = std::max(peak, e[i]);
      continue;
    }
    if (!dropping) {
      dropping = true;
      drop = t;
    }
    if (t - drop >= hold_s - tol) close(drop);
  }
  if (inside) close(envelope.time_at(e.size() - 1) + 1.0 / envelope.sample_rate);
  return out;
}

struct LabeledRun {
  std::string run_id;
  FeatureSeries features;
  std::vector<int> labels;  // Label values, one per feature vector
  std::vector<InstabilityInterval> intervals;

  std::size_t count(Label l) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), static_cast<int>(l)));
  }
};

/// Label of a single time stamp given sorted, disjoint intervals.
inline Label label_at(double t, const std::vector<InstabilityInterval>& intervals, double lead_s) {
  const double tol = 1e-9;
  for (const auto& iv : intervals)
    if (t >= iv.onset_s - tol && t <= iv.offset_s + tol) return Label::excluded;
  for (const auto& iv : intervals) {
    if (iv.onset_s > t) return iv.onset_s - t <= lead_s + tol ? Label::transient : Label::far_stable;
  }
  return Label::far_stable;
}

inline LabeledRun label_features(const FeatureSeries& features, std::vector<InstabilityInterval> intervals,
                                 double lead_s = 0.2) {
  if (!(lead_s >= 0.0)) throw ValidationError("lead_s must be >= 0");
  std::sort(intervals.begin(), intervals.end(),
            [](const auto& a, const auto& b) { return a.onset_s < b.onset_s; });
  LabeledRun run;
  run.run_id = features.run_id;
  run.features = features;
  run.intervals = std::move(intervals);
  run.labels.reserve(features.vectors.size());
  for (const auto& v : features.vectors) run.labels.push_back(label_at(v.t, run.intervals, lead_s));
  return run;
}

/// Zero-phase high-pass, peak-to-peak envelope in percent of p_cc, interval detection.
inline TimeSeries amplitude_envelope(const TimeSeries& raw, double p_cc, const LabelConfig& cfg) {
  FilterSpec spec = cfg.filter;
  const TimeSeries filtered = high_pass(raw, spec);
  return peak_to_peak_envelope(filtered, cfg.envelope.window_s, p_cc, cfg.envelope.stride_s);
}

inline std::vector<InstabilityInterval> run_intervals(const TimeSeries& raw, double p_cc, const LabelConfig& cfg) {
  cfg.validate();
  return detect_intervals(amplitude_envelope(raw, p_cc, cfg), cfg.thr1, cfg.thr2, cfg.hold_s);
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline void write_labels_csv(std::ostream& os, const LabeledRun& run) {
  os << "# run_id=" << run.run_id << '\n';
  os << "t,label\n";
  for (std::size_t i = 0; i < run.labels.size(); ++i)
    os << format_double(run.features.vectors[i].t) << ',' << run.labels[i] << '\n';
}

struct TimedLabel {
  double t = 0.0;
  int label = 0;
};

inline std::vector<TimedLabel> read_labels_csv(std::istream& in) {
  std::vector<TimedLabel> out;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (detail::trim(line) != "t,label") throw LoadError(LoadError::Kind::malformed_header, "label CSV header mismatch");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw LoadError(LoadError::Kind::truncated, "missing label at line " + std::to_string(line_no));
    const auto t = parse_double(std::string_view(line).substr(0, comma));
    const auto l = parse_double(std::string_view(line).substr(comma + 1));
    if (!t || !l || (*l != -1.0 && *l != 0.0 && *l != 1.0))
      throw LoadError(LoadError::Kind::malformed_header, "bad label row at line " + std::to_string(line_no));
    out.push_back({*t, static_cast<int>(*l)});
  }
  if (!header) throw LoadError(LoadError::Kind::empty, "label CSV has no header row");
  return out;
}

inline void write_intervals_jsonl(std::ostream& os, const std::string& run_id,
                                  const std::vector<InstabilityInterval>& intervals) {
  for (const auto& iv : intervals) {
    nlohmann::ordered_json j;
    j["run_id"] = run_id;
    j["onset_s"] = iv.onset_s;
    j["offset_s"] = iv.offset_s;
    j["kind"] = to_string(iv.kind);
    os << j.dump() << '\n';
  }
}

/// Reads interval lines, keeping those whose run_id matches (all when run_id is empty).
inline std::vector<InstabilityInterval> read_intervals_jsonl(std::istream& in, const std::string& run_id = {}) {
  std::vector<InstabilityInterval> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!run_id.empty() && j.at("run_id").get<std::string>() != run_id) continue;
      out.push_back({j.at("onset_s").get<double>(), j.at("offset_s").get<double>(),
                     kind_from_string(j.at("kind").get<std::string>())});
    } catch (const nlohmann::json::exception& ex) {
      throw LoadError(LoadError::Kind::schema, "interval line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace rqews
