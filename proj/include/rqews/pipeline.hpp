#pragma once

// Stage functions shared by the command-line tool and the end-to-end tests:
// per-run processing, training with a deployment threshold, evaluation
// reports, and causal prediction over a sample stream.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rqews/config.hpp"
#include "rqews/error.hpp"
#include "rqews/eval.hpp"
#include "rqews/features.hpp"
#include "rqews/labeling.hpp"
#include "rqews/numeric.hpp"
#include "rqews/signal.hpp"
#include "rqews/svm.hpp"

namespace rqews {

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Per-run processing
// ---------------------------------------------------------------------------

struct ProcessedRun {
  LabeledRun labeled;
  TimeSeries envelope;  // percent of p_cc, zero-phase
};

inline ProcessedRun process_run(const LoadedRun& run, const ExperimentConfig& cfg, bool hurst = false,
                                std::size_t threads = 0) {
  FeatureConfig fc = cfg.features;
  fc.hurst = hurst;
  ProcessedRun out;
  const FeatureSeries fs = extract_features(run.series, fc, run.metadata.run_id, threads);
  out.envelope = amplitude_envelope(run.series, run.metadata.p_cc(), cfg.labels);
  const auto intervals = detect_intervals(out.envelope, cfg.labels.thr1, cfg.labels.thr2, cfg.labels.hold_s);
  out.labeled = label_features(fs, intervals, cfg.labels.lead_s);
  return out;
}

/// Envelope value at time t: the latest envelope sample stamped at or before t.
inline double envelope_at(const TimeSeries& env, double t) {
  if (env.empty() || t < env.start_time) return std::numeric_limits<double>::quiet_NaN();
  const auto k = static_cast<std::size_t>(std::floor((t - env.start_time) * env.sample_rate + 1e-9));
  return env.samples[std::min(k, env.size() - 1)];
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainOutcome {
  SearchResult search;
  SvmModel model;
  std::vector<double> oof_scores;  // out-of-fold decision values at the chosen params
  std::vector<int> oof_labels;
};

/// Random search over leave-one-run-out folds, final model on all runs, and a
/// deployment threshold at the configured FPR budget on out-of-fold scores.
inline TrainOutcome train_pipeline(std::span<const LabeledRun> runs, const ExperimentConfig& cfg,
                                   std::size_t threads = 0) {
  if (runs.size() < 2) throw ValidationError("training needs at least 2 runs for cross-validation");
  TrainOutcome out;
  out.search = random_search(runs, cfg.search, cfg.svm, threads);
  const PointSet all = stable_points(runs, all_indices(runs.size()));
  out.model = fit_model(all, out.search.c, out.search.gamma, cfg.svm);
  out.oof_scores = out_of_fold_scores(runs, out.search.c, out.search.gamma, cfg.svm, threads);
  out.oof_labels = all.y;
  const auto roc = roc_curve(out.oof_scores, out.oof_labels);
  out.model.threshold = threshold_at_fpr(roc, cfg.evaluate.deploy_fpr);
  return out;
}

inline nlohmann::ordered_json search_to_json(const SearchResult& s) {
  nlohmann::ordered_json j;
  j["best"] = {{"c", s.c}, {"gamma", s.gamma}, {"mean_f_score", s.score}, {"index", s.best_index}};
  auto samples = nlohmann::ordered_json::array();
  for (const auto& smp : s.samples) {
    nlohmann::ordered_json e{{"c", smp.c}, {"gamma", smp.gamma}, {"ok", smp.ok}};
    if (smp.ok) {
      e["mean_f_score"] = smp.cv.mean;
      e["fold_f_scores"] = smp.cv.fold_scores;
    } else {
      e["error"] = smp.error;
    }
    samples.push_back(e);
  }
  j["samples"] = samples;
  return j;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalReport {
  double c = 0.0, gamma = 0.0;
  double threshold = 0.0;  // deployment threshold carried by the model
  std::vector<std::pair<std::string, double>> run_f_scores;
  double mean_f_score = 0.0;
  RocCurve roc;
  std::map<double, double> tpr_at_fpr;
  std::map<double, double> threshold_at_fpr;
  std::vector<double> importances;
  std::vector<EventAlarm> events;  // at the test-ROC threshold of the largest budget
  double event_threshold = 0.0;
  std::vector<BaselineRow> baselines;
  std::vector<std::vector<double>> run_scores;  // decision values per test run, every vector
};

inline std::vector<double> score_run(const SvmModel& model, const LabeledRun& run) {
  std::vector<double> s;
  s.reserve(run.features.vectors.size());
  for (const auto& v : run.features.vectors) s.push_back(decision_raw(model, as_row(v)));
  return s;
}

inline EvalReport evaluate_pipeline(const SvmModel& model, std::span<const LabeledRun> train_runs,
                                    std::span<const LabeledRun> test_runs, const ExperimentConfig& cfg) {
  if (test_runs.empty()) throw ValidationError("evaluation needs at least one test run");
  EvalReport r;
  r.c = model.params.c;
  r.gamma = model.params.gamma;
  r.threshold = model.threshold.value_or(0.0);

  for (const auto& run : test_runs) r.run_scores.push_back(score_run(model, run));

  std::vector<double> scores;
  std::vector<int> truth;
  double f_total = 0.0;
  std::size_t f_runs = 0;
  for (std::size_t k = 0; k < test_runs.size(); ++k) {
    const auto& run = test_runs[k];
    std::vector<int> pred, y;
    for (std::size_t i = 0; i < run.labels.size(); ++i) {
      if (run.labels[i] == Label::excluded) continue;
      scores.push_back(r.run_scores[k][i]);
      truth.push_back(run.labels[i]);
      pred.push_back(r.run_scores[k][i] >= r.threshold ? 1 : -1);
      y.push_back(run.labels[i]);
    }
    if (std::find(y.begin(), y.end(), 1) == y.end()) continue;
    const double f = f_score(pred, y);
    r.run_f_scores.emplace_back(run.run_id, f);
    f_total += f;
    ++f_runs;
  }
  r.mean_f_score = f_runs ? f_total / static_cast<double>(f_runs) : std::numeric_limits<double>::quiet_NaN();

  r.roc = roc_curve(scores, truth);
  for (double q : cfg.evaluate.fpr_budgets) {
    r.tpr_at_fpr[q] = tpr_at_fpr(r.roc, q);
    r.threshold_at_fpr[q] = threshold_at_fpr(r.roc, q);
  }

  const double q_max = *std::max_element(cfg.evaluate.fpr_budgets.begin(), cfg.evaluate.fpr_budgets.end());
  r.event_threshold = threshold_at_fpr(r.roc, q_max);
  for (std::size_t k = 0; k < test_runs.size(); ++k)
    for (const auto& ev : event_alarms(test_runs[k], r.run_scores[k], r.event_threshold, cfg.labels.lead_s))
      r.events.push_back(ev);

  const PointSet test_pts = stable_points(test_runs, all_indices(test_runs.size()));
  r.importances = permutation_importance(model, test_pts, r.threshold, cfg.evaluate.importance_repeats,
                                         cfg.evaluate.importance_seed);

  if (!train_runs.empty()) {
    for (std::size_t f = 0; f < 5; ++f)
      r.baselines.push_back(single_measure_baseline(kFeatureNames[f], static_cast<int>(f), train_runs, test_runs,
                                                    cfg.evaluate.fpr_budgets));
    const bool have_h = std::all_of(train_runs.begin(), train_runs.end(), [](const auto& x) { return x.features.has_h; }) &&
                        std::all_of(test_runs.begin(), test_runs.end(), [](const auto& x) { return x.features.has_h; });
    if (have_h) r.baselines.push_back(single_measure_baseline("h", -1, train_runs, test_runs, cfg.evaluate.fpr_budgets));
  }
  return r;
}

inline nlohmann::ordered_json rates_to_json(const std::map<double, double>& m) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [q, v] : m) j[format_double(q)] = v;
  return j;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["params"] = {{"c", r.c}, {"gamma", r.gamma}};
  j["deploy_threshold"] = r.threshold;
  auto runs = nlohmann::ordered_json::array();
  for (const auto& [id, f] : r.run_f_scores) runs.push_back({{"run_id", id}, {"f_score", f}});
  j["run_f_scores"] = runs;
  j["mean_f_score"] = std::isfinite(r.mean_f_score) ? nlohmann::ordered_json(r.mean_f_score) : nlohmann::ordered_json(nullptr);
  j["auc"] = r.roc.auc;
  j["tpr_at_fpr"] = rates_to_json(r.tpr_at_fpr);
  j["threshold_at_fpr"] = rates_to_json(r.threshold_at_fpr);
  auto imp = nlohmann::ordered_json::object();
  for (std::size_t f = 0; f < r.importances.size(); ++f)
    imp[f < kFeatureCount ? kFeatureNames[f] : std::to_string(f)] = r.importances[f];
  j["feature_importances"] = imp;
  j["event_threshold"] = r.event_threshold;
  auto events = nlohmann::ordered_json::array();
  std::size_t alarmed = 0;
  for (const auto& e : r.events) {
    alarmed += e.alarmed ? 1 : 0;
    events.push_back({{"run_id", e.run_id},
                      {"onset_s", e.onset_s},
                      {"kind", to_string(e.kind)},
                      {"alarmed", e.alarmed},
                      {"first_alarm_s", e.alarmed ? nlohmann::ordered_json(e.first_alarm_s) : nlohmann::ordered_json(nullptr)}});
  }
  j["events"] = events;
  j["events_alarmed"] = alarmed;
  auto base = nlohmann::ordered_json::array();
  for (const auto& b : r.baselines)
    base.push_back({{"measure", b.name}, {"direction", b.sign > 0 ? "high" : "low"}, {"auc", b.auc},
                    {"points", b.points}, {"tpr_at_fpr", rates_to_json(b.tpr_at_fpr)}});
  j["baselines"] = base;
  return j;
}

inline void write_roc_csv(std::ostream& os, const RocCurve& roc) {
  os << "threshold,fpr,tpr\n";
  for (std::size_t i = 0; i < roc.thresholds.size(); ++i)
    os << format_double(roc.thresholds[i]) << ',' << format_double(roc.fpr[i]) << ',' << format_double(roc.tpr[i]) << '\n';
}

inline void write_baselines_csv(std::ostream& os, const EvalReport& r) {
  os << "measure,direction,auc";
  for (const auto& [q, v] : r.tpr_at_fpr) os << ",tpr_at_fpr_" << format_double(q);
  os << '\n';
  os << "svm,high," << format_double(r.roc.auc);
  for (const auto& [q, v] : r.tpr_at_fpr) os << ',' << format_double(v);
  os << '\n';
  for (const auto& b : r.baselines) {
    os << b.name << ',' << (b.sign > 0 ? "high" : "low") << ',' << format_double(b.auc);
    for (const auto& [q, v] : b.tpr_at_fpr) os << ',' << format_double(v);
    os << '\n';
  }
}

/// Decision-function trace of one run: t, decision_value, threshold, envelope_pct, label.
inline void write_trace_csv(std::ostream& os, const LabeledRun& run, std::span<const double> scores, double threshold,
                            const TimeSeries* envelope) {
  os << "t,decision_value,threshold,envelope_pct,label\n";
  for (std::size_t i = 0; i < run.labels.size(); ++i) {
    const double t = run.features.vectors[i].t;
    const double env = envelope ? envelope_at(*envelope, t) : std::numeric_limits<double>::quiet_NaN();
    os << format_double(t) << ',' << format_double(scores[i]) << ',' << format_double(threshold) << ','
       << format_double(env) << ',' << run.labels[i] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Streaming prediction
// ---------------------------------------------------------------------------

/// Incremental reader over a run stream in either layout (binary is detected
/// by its magic bytes). A stream that ends mid-record simply ends: the partial
/// record, or a text line without its newline, is dropped.
class SampleStreamReader {
 public:
  explicit SampleStreamReader(std::istream& in) : in_(in) {
    char magic[4] = {0, 0, 0, 0};
    in_.read(magic, 4);
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got == 4 && std::memcmp(magic, detail::kRunMagic, 4) == 0) {
      binary_ = true;
      std::uint64_t count = 0;
      double rate = 0.0, pcc = 0.0;
      if (!detail::get_u64_le(in_, count) || !detail::get_f64_le(in_, rate) || !detail::get_f64_le(in_, pcc))
        throw LoadError(LoadError::Kind::truncated, "stream ended inside the binary header");
      if (!(rate > 0.0) || !std::isfinite(rate))
        throw LoadError(LoadError::Kind::malformed_header, "invalid sample_rate in binary header");
      rate_ = rate;
      if (pcc > 0.0 && std::isfinite(pcc)) p_cc_ = pcc;
      remaining_ = count;
    } else {
      pending_.assign(magic, got);
      read_csv_header();
    }
  }

  double sample_rate() const { return rate_; }
  std::optional<double> p_cc() const { return p_cc_; }
  const std::string& run_id() const { return run_id_; }
  double start_time() const { return start_; }

  /// Appends up to max samples to out; returns false once the stream is exhausted.
  bool next(std::vector<double>& out, std::size_t max) {
    out.clear();
    if (done_) return false;
    if (binary_) {
      while (out.size() < max && remaining_ > 0) {
        double v = 0.0;
        if (!detail::get_f64_le(in_, v)) {
          done_ = true;
          break;
        }
        if (!std::isfinite(v)) throw LoadError(LoadError::Kind::non_finite, "non-finite sample in stream");
        out.push_back(v);
        --remaining_;
      }
      if (remaining_ == 0) done_ = true;
    } else {
      std::string line;
      while (out.size() < max) {
        bool whole = true;
        if (have_line_) {
          line = std::move(held_);
          whole = held_whole_;
          have_line_ = false;
        } else if (!getline(line, whole)) {
          done_ = true;
          break;
        }
        // A last line without its newline may have been cut anywhere.
        if (!whole) {
          done_ = true;
          break;
        }
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto v = parse_double(t);
        if (!v) throw LoadError(LoadError::Kind::malformed_header, "unparsable sample '" + t + "' in stream");
        if (!std::isfinite(*v)) throw LoadError(LoadError::Kind::non_finite, "non-finite sample in stream");
        out.push_back(*v);
      }
    }
    return !out.empty() || !done_;
  }

 private:
  bool getline(std::string& line, bool& whole) {
    whole = true;
    if (pending_.empty()) {
      if (!std::getline(in_, line)) return false;
      whole = !in_.eof();
      return true;
    }
    const auto nl = pending_.find('\n');
    if (nl != std::string::npos) {
      line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return true;
    }
    std::string rest;
    std::getline(in_, rest);
    whole = !in_.eof();
    line = pending_ + rest;
    pending_.clear();
    return true;
  }

  void read_csv_header() {
    std::string line;
    bool whole = true;
    while (getline(line, whole)) {
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      if (t.front() != '#') {
        held_ = t;
        held_whole_ = whole;
        have_line_ = true;
        break;
      }
      const std::string body = detail::trim(std::string_view(t).substr(1));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = detail::trim(std::string_view(body).substr(0, eq));
      const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
      if (key == "sample_rate") {
        if (auto v = parse_double(value); v && *v > 0.0 && std::isfinite(*v)) rate_ = *v;
      } else if (key == "p_cc") {
        if (auto v = parse_double(value); v && *v > 0.0) p_cc_ = *v;
      } else if (key == "run_id") {
        run_id_ = value;
      } else if (key == "start_time") {
        if (auto v = parse_double(value)) start_ = *v;
      }
    }
    if (!(rate_ > 0.0)) throw LoadError(LoadError::Kind::malformed_header, "stream has no '# sample_rate=' header");
  }

  std::istream& in_;
  bool binary_ = false;
  bool done_ = false;
  std::uint64_t remaining_ = 0;
  double rate_ = 0.0;
  double start_ = 0.0;
  std::optional<double> p_cc_;
  std::string run_id_;
  std::string pending_;
  std::string held_;
  bool held_whole_ = true;
  bool have_line_ = false;
};

/// Causal warning-signal trace. Each row is written as soon as its window
/// completes; "crossing" marks the first vector of each run of alarms.
inline std::size_t predict_stream(const SvmModel& model, const FeatureConfig& fc, double threshold, std::istream& in,
                                  std::ostream& out) {
  SampleStreamReader reader(in);
  FeatureConfig cfg = fc;
  cfg.hurst = false;
  FeatureStream stream(cfg, reader.sample_rate(), reader.start_time());
  out << "t,decision_value,threshold,alarm,crossing\n";
  std::vector<double> chunk;
  bool prev = false;
  std::size_t rows = 0;
  while (reader.next(chunk, 4096)) {
    for (const auto& fv : stream.push(chunk)) {
      const double v = decision_raw(model, std::span<const double>(fv.values.data(), fv.values.size()));
      const bool alarm = v >= threshold;
      out << format_double(fv.t) << ',' << format_double(v) << ',' << format_double(threshold) << ','
          << (alarm ? 1 : 0) << ',' << (alarm && !prev ? 1 : 0) << '\n';
      prev = alarm;
      ++rows;
    }
    out.flush();
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Labeled-run files
// ---------------------------------------------------------------------------

/// Rebuilds a LabeledRun from its feature CSV, label CSV and interval lines.
inline LabeledRun load_labeled_run(const std::filesystem::path& dir, const std::string& run_id) {
  const auto fpath = dir / (run_id + ".features.csv");
  const auto lpath = dir / (run_id + ".labels.csv");
  const auto ipath = dir / (run_id + ".intervals.jsonl");
  std::ifstream fin(fpath), lin(lpath), iin(ipath);
  if (!fin) throw LoadError(LoadError::Kind::io, "missing feature file '" + fpath.string() + "'");
  if (!lin) throw LoadError(LoadError::Kind::io, "missing label file '" + lpath.string() + "'");
  if (!iin) throw LoadError(LoadError::Kind::io, "missing interval file '" + ipath.string() + "'");
  LabeledRun run;
  run.features = read_features_csv(fin, run_id);
  run.run_id = run.features.run_id;
  const auto labels = read_labels_csv(lin);
  if (labels.size() != run.features.vectors.size())
    throw LoadError(LoadError::Kind::schema, "label count does not match feature count for run '" + run_id + "'");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::fabs(labels[i].t - run.features.vectors[i].t) > 1e-9)
      throw LoadError(LoadError::Kind::schema, "label timestamps do not match features for run '" + run_id + "'");
    run.labels.push_back(labels[i].label);
  }
  run.intervals = read_intervals_jsonl(iin);
  return run;
}

}  // namespace rqews
