#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rqews/eval.hpp"
#include "rqews/random.hpp"

using namespace rqews;

namespace {

/// Labeled run with synthetic features: transient points are shifted along
/// the first two features by `sep`.
LabeledRun fake_run(const std::string& id, double sep, std::uint64_t seed, std::size_t n = 120) {
  Rng rng(seed);
  LabeledRun run;
  run.run_id = id;
  run.features.run_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector v;
    v.t = 0.3 + 0.01 * static_cast<double>(i);
    const int label = i % 5 == 0 ? 1 : (i % 17 == 3 ? 0 : -1);
    for (auto& x : v.values) x = rng.normal();
    if (label == 1) {
      v.values[0] += sep;
      v.values[1] -= sep;
    }
    v.h = v.values[0] * 0.5;
    run.features.vectors.push_back(v);
    run.labels.push_back(label);
  }
  return run;
}

std::vector<LabeledRun> fake_campaign(std::size_t n, double sep, std::uint64_t seed) {
  std::vector<LabeledRun> runs;
  for (std::size_t r = 0; r < n; ++r) runs.push_back(fake_run("run" + std::to_string(r), sep, seed + r));
  return runs;
}

}  // namespace

TEST_CASE("f_score") {
  const std::vector<int> truth{1, 1, -1, -1, 1, -1};
  CHECK(f_score(truth, truth) == 1.0);
  // P = 1, R = 0.5
  const std::vector<int> t2{1, 1, -1, -1};
  const std::vector<int> p2{1, -1, -1, -1};
  CHECK(f_score(p2, t2) == Catch::Approx(2.0 / 3.0));
  const std::vector<int> none{-1, -1, -1, -1};
  CHECK(f_score(none, t2) == 0.0);
  CHECK_THROWS_WITH(f_score(none, none), Catch::Matchers::ContainsSubstring("undefined recall"));
  CHECK_THROWS_AS(f_score(p2, truth), ValidationError);
}

TEST_CASE("roc_curve") {
  SECTION("perfect scores") {
    const std::vector<double> s{1, 1, -1, -1, 1};
    const std::vector<int> y{1, 1, -1, -1, 1};
    const auto roc = roc_curve(s, y);
    CHECK(roc.auc == 1.0);
    CHECK(tpr_at_fpr(roc, 0.0) == 1.0);
  }
  SECTION("uninformative scores") {
    Rng rng(1);
    std::vector<double> s(10000);
    std::vector<int> y(10000);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = rng.normal();
      y[i] = rng.uniform() < 0.3 ? 1 : -1;
    }
    CHECK(roc_curve(s, y).auc == Catch::Approx(0.5).margin(0.02));
  }
  SECTION("single class") {
    const std::vector<double> s{1, 2};
    const std::vector<int> y{1, 1};
    CHECK_THROWS_AS(roc_curve(s, y), ValidationError);
  }
  SECTION("properties on random score sets") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.below(500);
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = rng.uniform() < 0.4 ? 1 : -1;
        // ties on purpose
        s[i] = std::round((rng.normal() + 0.8 * y[i]) * 4.0) / 4.0;
      }
      y[0] = 1;
      y[1] = -1;
      const auto roc = roc_curve(s, y);
      CHECK(roc.tpr.front() == 0.0);
      CHECK(roc.fpr.front() == 0.0);
      CHECK(roc.tpr.back() == 1.0);
      CHECK(roc.fpr.back() == 1.0);
      CHECK(std::isinf(roc.thresholds.front()));
      for (std::size_t k = 1; k < roc.tpr.size(); ++k) {
        CHECK(roc.thresholds[k] < roc.thresholds[k - 1]);
        CHECK(roc.tpr[k] >= roc.tpr[k - 1]);
        CHECK(roc.fpr[k] >= roc.fpr[k - 1]);
      }
      CHECK(roc.auc >= 0.0);
      CHECK(roc.auc <= 1.0);
      // strictly monotone transform
      std::vector<double> t(n);
      for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(0.7 * s[i]) - 3.0;
      CHECK(roc_curve(t, y).auc == Catch::Approx(roc.auc).epsilon(1e-12));
      double prev = 0;
      for (double q : {0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.5, 1.0}) {
        const double v = tpr_at_fpr(roc, q);
        CHECK(v >= prev);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        const std::size_t k = operating_point(roc, q);
        CHECK(roc.fpr[k] <= q + 1e-12);
        // alarm rule reproduces the reported operating point
        std::size_t tp = 0, fp = 0, pos = 0, neg = 0;
        for (std::size_t i = 0; i < n; ++i) {
          (y[i] > 0 ? pos : neg)++;
          if (s[i] >= threshold_at_fpr(roc, q)) (y[i] > 0 ? tp : fp)++;
        }
        CHECK(static_cast<double>(tp) / pos == Catch::Approx(v));
        CHECK(static_cast<double>(fp) / neg <= q + 1e-12);
        prev = v;
      }
    }
  }
}

TEST_CASE("search space candidates are seeded") {
  SearchSpace a;
  a.n_samples = 20;
  a.seed = 5;
  const auto c1 = a.candidates(), c2 = a.candidates();
  CHECK(c1 == c2);
  for (auto [c, g] : c1) {
    CHECK(c >= a.c_lo);
    CHECK(c <= a.c_hi);
    CHECK(g >= a.gamma_lo);
    CHECK(g <= a.gamma_hi);
  }
  SearchSpace b = a;
  b.seed = 6;
  CHECK(b.candidates() != c1);
  SearchSpace bad;
  bad.c_lo = 2;
  bad.c_hi = 1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("cross-validation") {
  const auto runs = fake_campaign(6, 2.5, 100);
  SECTION("one fold per run") {
    const auto cv = cross_validate(runs, 1.0, 0.1);
    CHECK(cv.fold_scores.size() == 6);
    CHECK(cv.mean > 0.6);
  }
  SECTION("identical runs give equal fold scores") {
    std::vector<LabeledRun> same(4, runs[0]);
    for (std::size_t i = 0; i < same.size(); ++i) same[i].run_id = "copy" + std::to_string(i);
    const auto cv = cross_validate(same, 1.0, 0.1);
    for (double f : cv.fold_scores) CHECK(f == cv.fold_scores[0]);
  }
  SECTION("underfitting parameters score lower") {
    // A tiny gamma with a tiny C leaves an almost constant decision function.
    const auto tuned = cross_validate(runs, 1.0, 0.1);
    const auto flat = cross_validate(runs, 1e-3, 1e-6);
    CHECK(flat.mean < tuned.mean);
  }
  SECTION("a single run is rejected") {
    CHECK_THROWS_AS(cross_validate(std::span(runs).first(1), 1.0, 0.1), ValidationError);
  }
  SECTION("fold with single-class training data") {
    auto mixed = runs;
    for (std::size_t r = 1; r < mixed.size(); ++r)
      for (auto& l : mixed[r].labels)
        if (l == 1) l = -1;
    CHECK_THROWS_AS(cross_validate(mixed, 1.0, 0.1), ValidationError);
  }
  SECTION("held-out data never reaches the fold model") {
    // Perturbing run 0 must leave the fold that holds it out unchanged.
    auto moved = runs;
    for (auto& v : moved[0].features.vectors)
      for (auto& x : v.values) x += 100.0;
    const std::size_t train_idx[] = {1, 2, 3, 4, 5};
    const auto m1 = fit_model(stable_points(runs, train_idx), 1.0, 0.1);
    const auto m2 = fit_model(stable_points(moved, train_idx), 1.0, 0.1);
    CHECK(m1.dual_coefs == m2.dual_coefs);
    CHECK(m1.bias == m2.bias);
    CHECK(m1.scaler == m2.scaler);
  }
}

TEST_CASE("random search") {
  const auto runs = fake_campaign(4, 2.5, 200);
  SearchSpace space;
  space.n_samples = 1;
  space.seed = 3;
  const auto one = random_search(runs, space);
  CHECK(one.c == space.candidates()[0].first);
  CHECK(one.gamma == space.candidates()[0].second);
  space.n_samples = 6;
  const auto a = random_search(runs, space), b = random_search(runs, space);
  CHECK(a.c == b.c);
  CHECK(a.gamma == b.gamma);
  CHECK(a.score == b.score);
  for (const auto& s : a.samples) CHECK(s.cv.mean <= a.score);
}

TEST_CASE("out-of-fold scores and permutation importance") {
  const auto runs = fake_campaign(4, 3.0, 300);
  const auto oof = out_of_fold_scores(runs, 1.0, 0.1);
  const auto pts = stable_points(runs, all_indices(runs.size()));
  REQUIRE(oof.size() == pts.size());
  CHECK(roc_curve(oof, pts.y).auc > 0.8);

  auto model = fit_model(pts, 1.0, 0.1);
  // Make feature 9 constant in the test set and feature 8 equal to the label.
  auto test = pts;
  for (std::size_t i = 0; i < test.size(); ++i) {
    test.rows[i][9] = 0.25;
    test.rows[i][8] = test.y[i];
  }
  PointSet train_with_label = pts;
  for (std::size_t i = 0; i < train_with_label.size(); ++i) {
    train_with_label.rows[i][8] = train_with_label.y[i];
    train_with_label.rows[i][9] = 0.25 + 1e-3 * static_cast<double>(i % 7);
  }
  model = fit_model(train_with_label, 1.0, 0.1);
  const auto imp = permutation_importance(model, test, 0.0, 5, 11);
  REQUIRE(imp.size() == kFeatureCount);
  CHECK(imp[9] == 0.0);
  for (std::size_t f = 0; f < kFeatureCount; ++f)
    if (f != 8) CHECK(imp[8] > imp[f]);
}

TEST_CASE("event alarms") {
  LabeledRun run;
  run.run_id = "r";
  for (int i = 0; i < 300; ++i) {
    FeatureVector v;
    v.t = 0.01 * i;
    run.features.vectors.push_back(v);
  }
  run.intervals = {{1.0, 1.5, InstabilityKind::type1}, {2.5, 3.0, InstabilityKind::type2}};
  run = label_features(run.features, run.intervals);
  std::vector<double> scores(300, -1.0);
  scores[85] = 2.0;   // 0.85 s, inside the 200 ms lead of the first onset
  scores[200] = 2.0;  // 2.00 s, too early for the second
  const auto ev = event_alarms(run, scores, 1.0);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].alarmed);
  CHECK(ev[0].first_alarm_s == Catch::Approx(0.85));
  CHECK_FALSE(ev[1].alarmed);
  CHECK(ev[1].kind == InstabilityKind::type2);
}

TEST_CASE("single-measure baselines") {
  const auto train = fake_campaign(3, 2.0, 400), test = fake_campaign(2, 2.0, 500);
  const std::vector<double> budgets{0.01, 0.02, 0.5};
  const auto up = single_measure_baseline("rr", 0, train, test, budgets);
  CHECK(up.sign == 1.0);
  CHECK(up.auc > 0.8);
  const auto down = single_measure_baseline("det", 1, train, test, budgets);
  CHECK(down.sign == -1.0);
  CHECK(down.auc > 0.8);
  CHECK(down.tpr_at_fpr.at(0.5) >= down.tpr_at_fpr.at(0.01));
  const auto h = single_measure_baseline("h", -1, train, test, budgets);
  CHECK(h.auc == Catch::Approx(up.auc));
}
