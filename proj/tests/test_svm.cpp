#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "oracles/qp.hpp"
#include "rqews/random.hpp"
#include "rqews/svm.hpp"

using namespace rqews;

namespace {

TrainingSet blobs(std::size_t n, std::size_t dim, double shift, Rng& rng) {
  TrainingSet ts;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i % 3 == 0 ? 1 : -1;
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal() + (y > 0 ? shift : 0.0);
    ts.add(v, y);
  }
  return ts;
}

double decision_on_row(const SvmModel& m, const TrainingSet& ts, std::size_t i) { return decision_function(m, ts.row(i)); }

oracle::QpResult reference(const TrainingSet& ts, const SvmParams& p) {
  const std::size_t n = ts.size();
  std::vector<std::vector<double>> k(n, std::vector<double>(n));
  std::vector<double> y(n), ub(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = ts.y[i];
    ub[i] = p.box(ts.y[i]);
    for (std::size_t j = 0; j < n; ++j) k[i][j] = rbf_kernel(ts.row(i), ts.row(j), p.gamma);
  }
  return oracle::solve_dual(k, y, ub);
}

}  // namespace

TEST_CASE("two symmetric points") {
  TrainingSet ts;
  ts.add(std::vector<double>{-1.0}, -1);
  ts.add(std::vector<double>{1.0}, 1);
  const auto r = train_detailed(ts, {1e3, 0.5, 1.0, 1.0}, {1e-9});
  CHECK(r.model.support_count() == 2);
  CHECK(decision_function(r.model, std::vector<double>{0.0}) == Catch::Approx(0.0).margin(1e-9));
  CHECK(decision_function(r.model, std::vector<double>{1.0}) == Catch::Approx(1.0).margin(1e-6));
  CHECK(decision_function(r.model, std::vector<double>{-1.0}) == Catch::Approx(-1.0).margin(1e-6));
  CHECK(r.model.bias == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("XOR layout with RBF") {
  TrainingSet ts;
  ts.add(std::vector<double>{0, 0}, -1);
  ts.add(std::vector<double>{1, 1}, -1);
  ts.add(std::vector<double>{0, 1}, 1);
  ts.add(std::vector<double>{1, 0}, 1);
  const SvmParams p{10.0, 1.0, 1.0, 1.0};
  const auto r = train_detailed(ts, p, {1e-9});
  for (std::size_t i = 0; i < 4; ++i) CHECK(decision_on_row(r.model, ts, i) * ts.y[i] > 0);
  const auto ref = reference(ts, p);
  CHECK(r.objective == Catch::Approx(ref.objective).epsilon(1e-6));
}

TEST_CASE("balanced class weights") {
  std::vector<int> y(100, -1);
  for (int i = 0; i < 10; ++i) y[static_cast<std::size_t>(i)] = 1;
  const auto [wp, wn] = balanced_class_weights(y);
  CHECK(wp / wn == Catch::Approx(9.0));
  CHECK((10 * wp + 90 * wn) / 100 == Catch::Approx(1.0));
  CHECK_THROWS_AS(balanced_class_weights(std::vector<int>{1, 1}), ValidationError);
}

TEST_CASE("dual objective agrees with the projected-gradient oracle") {
  Rng rng(404);
  for (int trial = 0; trial < 8; ++trial) {
    const std::size_t n = 10 + rng.below(41);
    auto ts = blobs(n, 10, rng.uniform(0.0, 1.5), rng);
    const auto [wp, wn] = balanced_class_weights(ts.y);
    const SvmParams p{rng.log_uniform(0.05, 20), rng.log_uniform(0.01, 1.0), wp, wn};
    const auto r = train_detailed(ts, p, {1e-7});
    const auto ref = reference(ts, p);
    CHECK(std::fabs(r.objective - ref.objective) <= 1e-6 * std::fabs(ref.objective));
  }
}

TEST_CASE("KKT conditions and dual feasibility after training") {
  Rng rng(505);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 20 + rng.below(200);
    auto ts = blobs(n, 10, rng.uniform(0.0, 2.0), rng);
    const auto [wp, wn] = balanced_class_weights(ts.y);
    const SvmParams p{rng.log_uniform(0.05, 20), rng.log_uniform(0.01, 1.0), wp, wn};
    const double tol = 1e-3;
    const auto r = train_detailed(ts, p, {tol});
    double sum = 0;
    for (double v : r.model.dual_coefs) sum += v;
    CHECK(std::fabs(sum) < 1e-6);
    CHECK(r.model.support_count() >= 1);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = r.alpha[i], box = p.box(ts.y[i]);
      REQUIRE(a >= 0.0);
      REQUIRE(a <= box);
      const double yf = ts.y[i] * decision_on_row(r.model, ts, i);
      if (a == 0.0)
        CHECK(yf >= 1 - tol);
      else if (a < box)
        CHECK(std::fabs(yf - 1) <= tol);
      else
        CHECK(yf <= 1 + tol);
    }
    for (std::size_t k = 0; k < r.model.support_count(); ++k) {
      const double nu = r.model.dual_coefs[k];
      CHECK(std::fabs(nu) <= p.c * (nu > 0 ? p.weight_pos : p.weight_neg) * (1 + 1e-12));
    }
  }
}

TEST_CASE("decision function examples") {
  Rng rng(6);
  auto ts = blobs(60, 3, 4.0, rng);
  const SvmParams p{1.0, 0.5, 1.0, 1.0};
  const double tol = 1e-3;
  const auto r = train_detailed(ts, p, {tol});
  SECTION("unbounded support vectors sit on the margin") {
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (r.alpha[i] > 0 && r.alpha[i] < p.c) {
        const double f = decision_on_row(r.model, ts, i);
        CHECK(f * ts.y[i] > 0);
        CHECK(std::fabs(f) >= 1 - tol);
      }
    }
  }
  SECTION("gamma near zero makes the decision constant") {
    SvmModel m = r.model;
    m.params.gamma = 1e-300;
    const double expect = std::accumulate(m.dual_coefs.begin(), m.dual_coefs.end(), 0.0) + m.bias;
    for (int k = 0; k < 10; ++k) {
      std::vector<double> x{rng.normal() * 5, rng.normal(), rng.normal()};
      CHECK(decision_function(m, x) == Catch::Approx(expect).margin(1e-12));
    }
  }
  SECTION("deterministic and dimension-checked") {
    const std::vector<double> x{0.3, -0.2, 1.0};
    CHECK(decision_function(r.model, x) == decision_function(r.model, x));
    CHECK_THROWS_AS(decision_function(r.model, std::vector<double>{1.0}), ValidationError);
  }
}

TEST_CASE("training row order barely matters") {
  Rng rng(8);
  auto ts = blobs(120, 10, 1.0, rng);
  const auto [wp, wn] = balanced_class_weights(ts.y);
  const SvmParams p{2.0, 0.1, wp, wn};
  const TrainOptions opts{1e-12};
  const auto a = train(ts, p, opts);
  std::vector<std::size_t> perm(ts.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  TrainingSet sh;
  for (std::size_t i : perm) sh.add(ts.row(i), ts.y[i]);
  const auto b = train(sh, p, opts);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x(10);
    for (auto& v : x) v = rng.normal();
    CHECK(std::fabs(decision_function(a, x) - decision_function(b, x)) < 1e-9);
  }
}

TEST_CASE("training input errors") {
  TrainingSet one;
  one.add(std::vector<double>{1.0}, 1);
  CHECK_THROWS_AS(train(one, {}), ValidationError);
  TrainingSet same;
  same.add(std::vector<double>{1.0}, 1);
  same.add(std::vector<double>{2.0}, 1);
  CHECK_THROWS_AS(train(same, {}), ValidationError);
  TrainingSet ts;
  ts.add(std::vector<double>{1.0}, 1);
  CHECK_THROWS_AS(ts.add(std::vector<double>{1.0, 2.0}, -1), ValidationError);
  CHECK_THROWS_AS(ts.add(std::vector<double>{1.0}, 0), ValidationError);
  CHECK_THROWS_AS(train(ts, SvmParams{-1.0, 1.0}), ValidationError);
}

TEST_CASE("iteration cap raises a convergence error") {
  Rng rng(9);
  auto ts = blobs(200, 10, 0.3, rng);
  try {
    train(ts, {10.0, 0.5, 1.0, 1.0}, {1e-6, 3});
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.violation() > 1e-6);
    CHECK(e.iterations() == 3);
  }
}

TEST_CASE("model persistence") {
  Rng rng(10);
  auto ts = blobs(80, 4, 1.0, rng);
  SvmModel m = train(ts, {0.7, 0.3, 1.2, 0.8});
  m.scaler.means = {0.1, 0.2, 0.3, 0.4};
  m.scaler.stddevs = {1.5, 2.5, 0.5, 1.0 / 3.0};
  m.threshold = -0.123456789;
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "rqews_test_model.json";
  save_model(m, path, {{"note", "test"}});
  const auto back = load_model(path);
  CHECK(back.params.c == m.params.c);
  CHECK(back.params.gamma == m.params.gamma);
  CHECK(back.threshold == m.threshold);
  CHECK(back.scaler == m.scaler);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.normal() * 3;
    worst = std::max(worst, std::fabs(decision_raw(back, x) - decision_raw(m, x)));
  }
  CHECK(worst == 0.0);

  SECTION("different gamma is stored") {
    SvmModel g = m;
    g.params.gamma = 0.9;
    const auto a = model_to_json(m), b = model_to_json(g);
    CHECK(a["params"]["gamma"] != b["params"]["gamma"]);
    CHECK(a["params"]["c"] == b["params"]["c"]);
  }
  SECTION("truncated file") {
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto cut = dir / "rqews_test_model_cut.json";
    std::ofstream(cut) << text.substr(0, text.size() / 2);
    CHECK_THROWS_AS(load_model(cut), LoadError);
    std::filesystem::remove(cut);
  }
  SECTION("schema version mismatch") {
    auto j = model_to_json(m);
    j["version"] = 99;
    try {
      model_from_json(j);
      FAIL("expected error");
    } catch (const LoadError& e) {
      CHECK(e.kind() == LoadError::Kind::schema);
      CHECK(std::string(e.what()).find("version 99") != std::string::npos);
    }
  }
  SECTION("missing file") { CHECK_THROWS_AS(load_model(dir / "rqews_no_such_model.json"), LoadError); }
  std::filesystem::remove(path);
}
