#pragma once

// Cross-validation, random search, ROC analysis, thresholds and feature importance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rqews/error.hpp"
#include "rqews/features.hpp"
#include "rqews/labeling.hpp"
#include "rqews/parallel.hpp"
#include "rqews/random.hpp"
#include "rqews/svm.hpp"

namespace rqews {

/// F-score of +1 predictions. Precision with no predicted positives counts as 0.
inline double f_score(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size()) throw ValidationError("f_score: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predictions[i] > 0, t = truth[i] > 0;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  if (tp + fn == 0) throw ValidationError("undefined recall: no positives in truth");
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

/// Stable-phase points of labeled runs: raw feature rows and +1/-1 targets.
struct PointSet {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  std::vector<double> t;
  std::vector<std::size_t> run;  // index into the source collection

  std::size_t size() const { return y.size(); }
};

inline PointSet stable_points(std::span<const LabeledRun> runs, std::span<const std::size_t> which) {
  PointSet ps;
  for (std::size_t r : which) {
    const auto& run = runs[r];
    for (std::size_t i = 0; i < run.labels.size(); ++i) {
      if (run.labels[i] == Label::excluded) continue;
      ps.rows.push_back(as_row(run.features.vectors[i]));
      ps.y.push_back(run.labels[i]);
      ps.t.push_back(run.features.vectors[i].t);
      ps.run.push_back(r);
    }
  }
  return ps;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

/// Scaler, balanced class weights and SVM fitted on the given points.
inline SvmModel fit_model(const PointSet& train_pts, double c, double gamma, const TrainOptions& opts = {}) {
  if (train_pts.size() == 0) throw ValidationError("no training points");
  const auto [wp, wn] = balanced_class_weights(train_pts.y);
  SvmParams params{c, gamma, wp, wn};
  const Scaler scaler = Scaler::fit_rows(train_pts.rows);
  TrainingSet ts;
  for (std::size_t i = 0; i < train_pts.size(); ++i) ts.add(scaler.apply(train_pts.rows[i]), train_pts.y[i]);
  SvmModel m = train(ts, params, opts);
  m.scaler = scaler;
  return m;
}

inline std::vector<double> decision_values(const SvmModel& m, const PointSet& pts) {
  std::vector<double> s(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) s[i] = decision_raw(m, pts.rows[i]);
  return s;
}

struct CvResult {
  std::vector<double> fold_scores;  // in run order
  double mean = 0.0;
};

namespace detail {

inline std::vector<std::size_t> without(std::size_t n, std::size_t held) {
  std::vector<std::size_t> v;
  for (std::size_t i = 0; i < n; ++i)
    if (i != held) v.push_back(i);
  return v;
}

/// One leave-one-run-out fold: F-score at the sign threshold on the held-out run.
inline double fold_score(std::span<const LabeledRun> runs, std::size_t held, double c, double gamma,
                         const TrainOptions& opts) {
  const auto train_idx = without(runs.size(), held);
  const std::size_t held_arr[] = {held};
  const PointSet tr = stable_points(runs, train_idx);
  const PointSet te = stable_points(runs, held_arr);
  if (std::find(tr.y.begin(), tr.y.end(), 1) == tr.y.end() || std::find(tr.y.begin(), tr.y.end(), -1) == tr.y.end())
    throw ValidationError("fold holding out run '" + runs[held].run_id + "' has single-class training data");
  const SvmModel m = fit_model(tr, c, gamma, opts);
  std::vector<int> pred(te.size());
  for (std::size_t i = 0; i < te.size(); ++i) pred[i] = decision_raw(m, te.rows[i]) >= 0.0 ? 1 : -1;
  return f_score(pred, te.y);
}

}  // namespace detail

/// Leave-one-run-out cross-validation; folds run in parallel, reduced in run order.
inline CvResult cross_validate(std::span<const LabeledRun> runs, double c, double gamma, const TrainOptions& opts = {},
                               std::size_t threads = 0) {
  if (runs.size() < 2) throw ValidationError("cross-validation needs at least 2 runs");
  CvResult res;
  res.fold_scores.assign(runs.size(), 0.0);
  parallel_for(runs.size(), threads,
               [&](std::size_t k) { res.fold_scores[k] = detail::fold_score(runs, k, c, gamma, opts); });
  res.mean = std::accumulate(res.fold_scores.begin(), res.fold_scores.end(), 0.0) / static_cast<double>(runs.size());
  return res;
}

struct SearchSpace {
  double c_lo = 1e-2, c_hi = 1e2;
  double gamma_lo = 1e-2, gamma_hi = 1e1;
  std::size_t n_samples = 60;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(c_lo > 0.0 && c_lo < c_hi)) throw ValidationError("search space: need 0 < c_lo < c_hi");
    if (!(gamma_lo > 0.0 && gamma_lo < gamma_hi)) throw ValidationError("search space: need 0 < gamma_lo < gamma_hi");
    if (n_samples < 1) throw ValidationError("search space: n_samples must be >= 1");
  }

  /// Candidate list, a pure function of the seed.
  std::vector<std::pair<double, double>> candidates() const {
    Rng rng(derive_seed(seed, 0x5e4c));
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < n_samples; ++i) {
      const double c = rng.log_uniform(c_lo, c_hi);
      const double g = rng.log_uniform(gamma_lo, gamma_hi);
      out.emplace_back(c, g);
    }
    return out;
  }
};

struct SearchSample {
  double c = 0.0, gamma = 0.0;
  bool ok = false;
  std::string error;
  CvResult cv;
};

struct SearchResult {
  double c = 0.0, gamma = 0.0;
  double score = 0.0;
  std::size_t best_index = 0;
  std::vector<SearchSample> samples;
};

/// Log-uniform random search maximising the mean leave-one-run-out F-score.
/// Samples whose folds fail are skipped; ties keep the earliest sample.
inline SearchResult random_search(std::span<const LabeledRun> runs, const SearchSpace& space,
                                  const TrainOptions& opts = {}, std::size_t threads = 0) {
  space.validate();
  if (runs.size() < 2) throw ValidationError("random search needs at least 2 runs");
  const auto cand = space.candidates();
  const std::size_t folds = runs.size();
  std::vector<double> scores(cand.size() * folds, 0.0);
  std::vector<std::string> errors(cand.size() * folds);
  parallel_for(cand.size() * folds, threads, [&](std::size_t job) {
    const std::size_t s = job / folds, k = job % folds;
    try {
      scores[job] = detail::fold_score(runs, k, cand[s].first, cand[s].second, opts);
    } catch (const Error& ex) {
      errors[job] = ex.what();
    }
  });
  SearchResult res;
  bool any = false;
  for (std::size_t s = 0; s < cand.size(); ++s) {
    SearchSample smp;
    smp.c = cand[s].first;
    smp.gamma = cand[s].second;
    smp.ok = true;
    for (std::size_t k = 0; k < folds; ++k) {
      if (!errors[s * folds + k].empty()) {
        smp.ok = false;
        smp.error = errors[s * folds + k];
        break;
      }
      smp.cv.fold_scores.push_back(scores[s * folds + k]);
    }
    if (smp.ok) {
      smp.cv.mean = std::accumulate(smp.cv.fold_scores.begin(), smp.cv.fold_scores.end(), 0.0) / static_cast<double>(folds);
      if (!any || smp.cv.mean > res.score) {
        res.score = smp.cv.mean;
        res.c = smp.c;
        res.gamma = smp.gamma;
        res.best_index = s;
        any = true;
      }
    }
    res.samples.push_back(std::move(smp));
  }
  if (!any) throw ValidationError("random search: every sample failed (" + res.samples.front().error + ")");
  return res;
}

// ---------------------------------------------------------------------------
// ROC
// ---------------------------------------------------------------------------

struct RocCurve {
  std::vector<double> thresholds;  // descending, first is +inf
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
};

/// Operating points for "alarm if score >= threshold" at every distinct score.
inline RocCurve roc_curve(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw ValidationError("roc_curve: length mismatch");
  std::size_t pos = 0, neg = 0;
  for (int t : truth) (t > 0 ? pos : neg)++;
  if (pos == 0 || neg == 0) throw ValidationError("roc_curve needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  RocCurve roc;
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.tpr.push_back(0.0);
  roc.fpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = scores[order[k]];
    while (k < order.size() && scores[order[k]] == s) {
      (truth[order[k]] > 0 ? tp : fp)++;
      ++k;
    }
    roc.thresholds.push_back(s);
    roc.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    roc.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
  }
  for (std::size_t k = 1; k < roc.tpr.size(); ++k)
    roc.auc += (roc.fpr[k] - roc.fpr[k - 1]) * (roc.tpr[k] + roc.tpr[k - 1]) / 2.0;
  return roc;
}

/// Index of the operating point with the highest TPR subject to FPR <= q
/// (the highest threshold among ties).
inline std::size_t operating_point(const RocCurve& roc, double q) {
  std::size_t best = 0;
  for (std::size_t k = 0; k < roc.fpr.size(); ++k)
    if (roc.fpr[k] <= q + 1e-12 && roc.tpr[k] > roc.tpr[best]) best = k;
  return best;
}

inline double tpr_at_fpr(const RocCurve& roc, double q) { return roc.tpr[operating_point(roc, q)]; }

inline double threshold_at_fpr(const RocCurve& roc, double q) { return roc.thresholds[operating_point(roc, q)]; }

// ---------------------------------------------------------------------------
// Deployment threshold and importance
// ---------------------------------------------------------------------------

/// Held-out decision values for every stable training point (each from the
/// fold model that did not see its run), in stable_points order.
inline std::vector<double> out_of_fold_scores(std::span<const LabeledRun> runs, double c, double gamma,
                                              const TrainOptions& opts = {}, std::size_t threads = 0) {
  std::vector<std::vector<double>> per_run(runs.size());
  parallel_for(runs.size(), threads, [&](std::size_t k) {
    const PointSet tr = stable_points(runs, detail::without(runs.size(), k));
    const std::size_t held[] = {k};
    const PointSet te = stable_points(runs, held);
    per_run[k] = decision_values(fit_model(tr, c, gamma, opts), te);
  });
  std::vector<double> out;
  for (const auto& v : per_run) out.insert(out.end(), v.begin(), v.end());
  return out;
}

/// Mean drop of the F-score at `threshold` when one feature column is shuffled.
inline std::vector<double> permutation_importance(const SvmModel& model, const PointSet& test, double threshold,
                                                  std::size_t n_repeats, std::uint64_t seed) {
  if (test.size() == 0) throw ValidationError("permutation importance needs test points");
  const std::size_t d = test.rows.front().size();
  const auto predict = [&](const std::vector<std::vector<double>>& rows) {
    std::vector<int> p(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) p[i] = decision_raw(model, rows[i]) >= threshold ? 1 : -1;
    return p;
  };
  const double base = f_score(predict(test.rows), test.y);
  std::vector<double> imp(d, 0.0);
  for (std::size_t f = 0; f < d; ++f) {
    Rng rng(derive_seed(seed, 0x1000 + f));
    double total = 0.0;
    for (std::size_t r = 0; r < n_repeats; ++r) {
      std::vector<double> col(test.size());
      for (std::size_t i = 0; i < test.size(); ++i) col[i] = test.rows[i][f];
      rng.shuffle(col);
      auto rows = test.rows;
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i][f] = col[i];
      total += base - f_score(predict(rows), test.y);
    }
    imp[f] = n_repeats > 0 ? total / static_cast<double>(n_repeats) : 0.0;
  }
  return imp;
}

// ---------------------------------------------------------------------------
// Event view and single-measure baselines
// ---------------------------------------------------------------------------

struct EventAlarm {
  std::string run_id;
  double onset_s = 0.0;
  InstabilityKind kind = InstabilityKind::type1;
  bool alarmed = false;
  double first_alarm_s = std::numeric_limits<double>::quiet_NaN();
};

/// For every interval onset: did any stable vector in [onset - lead, onset] reach the threshold?
inline std::vector<EventAlarm> event_alarms(const LabeledRun& run, std::span<const double> scores, double threshold,
                                            double lead_s = 0.2) {
  std::vector<EventAlarm> out;
  const double tol = 1e-9;
  for (const auto& iv : run.intervals) {
    EventAlarm ev{run.run_id, iv.onset_s, iv.kind, false, std::numeric_limits<double>::quiet_NaN()};
    for (std::size_t i = 0; i < run.labels.size(); ++i) {
      const double t = run.features.vectors[i].t;
      if (run.labels[i] == Label::excluded) continue;
      if (t >= iv.onset_s - lead_s - tol && t <= iv.onset_s + tol && scores[i] >= threshold) {
        ev.alarmed = true;
        ev.first_alarm_s = t;
        break;
      }
    }
    out.push_back(ev);
  }
  return out;
}

struct BaselineRow {
  std::string name;
  double sign = 1.0;  // +1: larger values alarm; -1: smaller values alarm
  double auc = 0.0;
  std::map<double, double> tpr_at_fpr;
  std::size_t points = 0;
};

/// Threshold detector on one scalar (feature column index, or -1 for the Hurst
/// column). The alarm direction is fixed on the training points; undefined
/// values are skipped.
inline BaselineRow single_measure_baseline(const std::string& name, int column, std::span<const LabeledRun> train_runs,
                                           std::span<const LabeledRun> test_runs, std::span<const double> budgets) {
  const auto collect = [&](std::span<const LabeledRun> runs, std::vector<double>& v, std::vector<int>& y) {
    for (const auto& run : runs)
      for (std::size_t i = 0; i < run.labels.size(); ++i) {
        if (run.labels[i] == Label::excluded) continue;
        const auto& fv = run.features.vectors[i];
        const double x = column < 0 ? fv.h : fv.values[static_cast<std::size_t>(column)];
        if (!std::isfinite(x)) continue;
        v.push_back(x);
        y.push_back(run.labels[i]);
      }
  };
  std::vector<double> tr, te;
  std::vector<int> ytr, yte;
  collect(train_runs, tr, ytr);
  collect(test_runs, te, yte);
  BaselineRow row;
  row.name = name;
  row.sign = roc_curve(tr, ytr).auc >= 0.5 ? 1.0 : -1.0;
  for (double& x : te) x *= row.sign;
  const auto roc = roc_curve(te, yte);
  row.auc = roc.auc;
  row.points = te.size();
  for (double q : budgets) row.tpr_at_fpr[q] = tpr_at_fpr(roc, q);
  return row;
}

}  // namespace rqews
