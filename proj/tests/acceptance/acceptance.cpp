// Acceptance checks 1-8. One PASS/FAIL line per criterion; the exit code is 0
// once every line is printed, unless RQEWS_ACCEPTANCE_STRICT is set, in which
// case any FAIL makes it 1. Pass criterion numbers as arguments to run a subset.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/fgn.hpp"
#include "oracles/naive_rqa.hpp"
#include "oracles/qp.hpp"
#include "rqews/rqews.hpp"

namespace fs = std::filesystem;
using namespace rqews;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> white(std::size_t n, Rng& rng) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

bool same_counts(const LineCounts& c, const oracle::Lines& o) {
  if (c.points != o.points) return false;
  for (std::size_t l = 1; l < c.diagonal.size(); ++l) {
    const auto it = o.diagonal.find(l);
    if (c.diagonal[l] != (it == o.diagonal.end() ? 0u : it->second)) return false;
  }
  for (std::size_t l = 1; l < c.vertical.size(); ++l) {
    const auto it = o.vertical.find(l);
    if (c.vertical[l] != (it == o.vertical.end() ? 0u : it->second)) return false;
  }
  for (const auto& [len, cnt] : o.diagonal)
    if (len >= c.diagonal.size()) return false;
  for (const auto& [len, cnt] : o.vertical)
    if (len >= c.vertical.size()) return false;
  return true;
}

bool close(double a, double b) { return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::fabs(b)); }

bool same_measures(const RqaMeasures& m, const oracle::Measures& o) {
  return close(m.rr, o.rr) && close(m.det, o.det) && close(m.lam, o.lam) && close(m.entr, o.entr) &&
         close(m.ratio, o.ratio);
}

// ---------------------------------------------------------------------------

Outcome rqa_oracle() {
  Rng rng(20240601);
  std::size_t bad = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(200);
    const double density = rng.uniform(0.01, 0.99);
    oracle::Dense d{n, std::vector<std::uint8_t>(n * n, 0)};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) d.cells[i * n + j] = d.cells[j * n + i] = rng.uniform() < density ? 1 : 0;
    const auto m = RecurrenceMatrix::from_dense(d.cells, n);
    const auto o = oracle::scan(d);
    if (!same_counts(line_counts(m), o) || !same_measures(rqa_measures(m), oracle::measures(o, n, 2, 2))) ++bad;
  }
  std::size_t bad_windows = 0;
  for (int t = 0; t < 50; ++t) {
    EmbeddingConfig emb{1 + rng.below(4), 1 + rng.below(16)};
    RecurrenceConfig cfg;
    cfg.decimation = 1 + rng.below(6);
    cfg.epsilon = rng.uniform(0.3, 4.0);
    cfg.theiler_window = rng.below(3) == 0 ? rng.below(5) : 0;
    const std::size_t n_vec = 2 + rng.below(499);
    const std::size_t len = (n_vec - 1) * cfg.decimation + emb.span();
    auto x = white(len, rng);
    if (t % 2 == 0) {
      const double period = rng.uniform(8.0, 80.0);
      for (std::size_t i = 0; i < len; ++i) x[i] = std::sin(2 * std::numbers::pi * static_cast<double>(i) / period) + 0.1 * x[i];
    }
    const auto d = oracle::recurrence(x, emb.dimension, emb.delay_samples, cfg.decimation, cfg.epsilon, cfg.theiler_window);
    const auto o = oracle::scan(d);
    const auto om = oracle::measures(o, n_vec, cfg.l_min, cfg.v_min);
    RqaWorkspace ws;
    const auto counts = ws.window_counts(x, emb, cfg);
    bool ok = d.n == n_vec && same_counts(counts, o) &&
              same_measures(measures_from_counts(counts, cfg.l_min, cfg.v_min), om) &&
              recurrence_matrix(x, emb, cfg).to_dense() == d.cells;
    SlidingRqa sl(emb, cfg, len, cfg.decimation);
    ok = ok && same_measures(sl.measures(x), om);
    if (!ok) ++bad_windows;
  }
  return {bad == 0 && bad_windows == 0,
          fmt("%zu/200 matrices and %zu/50 windows differ from the naive scan", bad, bad_windows)};
}

// The sine runs through the pipeline settings (decimation 4, epsilon 3) on a
// 500-vector window, with at least 10 kept vectors per period. Decimating
// noise by the embedding span keeps its state vectors disjoint, so
// recurrences of neighbouring vectors are independent.
Outcome dynamics() {
  const double fs_hz = 100000.0;
  const std::size_t len = 20000;
  std::size_t ok = 0;
  double det_sine_min = 1.0, det_noise_max = 0.0, rr_dev = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(derive_seed(4242, seed));
    const double f = rng.uniform(500.0, 2500.0), phase = rng.uniform(0.0, 2 * std::numbers::pi);
    std::vector<double> sine(len);
    for (std::size_t i = 0; i < len; ++i) sine[i] = std::sin(2 * std::numbers::pi * f * static_cast<double>(i) / fs_hz + phase);

    EmbeddingConfig se{estimate_delay(sine, fs_hz).delay, 15};
    RecurrenceConfig sc;
    sine.resize(499 * sc.decimation + se.span());
    const double det_sine = window_measures(sine, se, sc).det;

    const auto noise = white(len, rng);
    EmbeddingConfig ne{estimate_delay(noise, fs_hz).delay, 15};
    RecurrenceConfig nc;
    nc.decimation = ne.span();
    // epsilon at the 10% quantile of the pairwise distances
    const auto sv = embed(noise, ne);
    const auto ms = mean_std(noise);
    std::vector<std::vector<double>> z;
    for (std::size_t i = 0; i < sv.rows; i += nc.decimation) {
      std::vector<double> v(ne.dimension);
      for (std::size_t m = 0; m < ne.dimension; ++m) v[m] = (sv.row(i)[m] - ms.mean) / ms.stddev;
      z.push_back(std::move(v));
    }
    std::vector<double> dist;
    for (std::size_t i = 0; i < z.size(); ++i)
      for (std::size_t j = i + 1; j < z.size(); ++j) {
        double s = 0;
        for (std::size_t m = 0; m < ne.dimension; ++m) s += (z[i][m] - z[j][m]) * (z[i][m] - z[j][m]);
        dist.push_back(std::sqrt(s));
      }
    const auto q = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 10);
    std::nth_element(dist.begin(), q, dist.end());
    nc.epsilon = *q;
    const auto mn = window_measures(noise, ne, nc);

    det_sine_min = std::min(det_sine_min, det_sine);
    det_noise_max = std::max(det_noise_max, mn.det);
    rr_dev = std::max(rr_dev, std::fabs(mn.rr - 0.1));
    if (det_sine > 0.99 && mn.det < 0.3 && std::fabs(mn.rr - 0.1) <= 0.01) ++ok;
  }
  return {ok == 20, fmt("%zu/20 seeds; min DET(sine) %.4f, max DET(noise) %.4f, max |RR(noise) - 0.1| %.4f", ok,
                        det_sine_min, det_noise_max, rr_dev)};
}

Outcome dfa_calibration() {
  const HurstConfig cfg{64, 8192, 12, 1};
  Rng rng(77);
  std::mt19937_64 gen(78);
  double h_white = 0.0, h_fgn = 0.0;
  for (int r = 0; r < 20; ++r) {
    h_white += hurst_exponent(white(200000, rng), cfg).h / 20.0;
    h_fgn += hurst_exponent(oracle::fgn(200000, 0.8, gen), cfg).h / 20.0;
  }
  return {std::fabs(h_white - 0.5) <= 0.05 && std::fabs(h_fgn - 0.8) <= 0.07,
          fmt("mean H(white) %.4f, mean H(fGn 0.8) %.4f", h_white, h_fgn)};
}

Outcome svm_oracle() {
  Rng rng(505);
  std::size_t obj_bad = 0, kkt_bad = 0, box_bad = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 10 + rng.below(41);
    const double shift = rng.uniform(0.0, 2.0);
    TrainingSet ts;
    for (std::size_t i = 0; i < n; ++i) {
      const int y = rng.uniform() < 0.35 ? 1 : -1;
      std::vector<double> v(10);
      for (auto& x : v) x = rng.normal() + (y > 0 ? shift : 0.0);
      ts.add(v, y);
    }
    if (std::count(ts.y.begin(), ts.y.end(), 1) == 0) ts.y[0] = 1;
    if (std::count(ts.y.begin(), ts.y.end(), -1) == 0) ts.y[0] = -1;
    const auto [wp, wn] = balanced_class_weights(ts.y);
    const SvmParams p{rng.log_uniform(0.05, 20), rng.log_uniform(0.01, 1.0), wp, wn};
    const double tol = 1e-3;
    TrainOptions opts;
    opts.tol = 1e-7;
    const auto r = train_detailed(ts, p, opts);

    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    std::vector<double> y(n), ub(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = ts.y[i];
      ub[i] = p.box(ts.y[i]);
      for (std::size_t j = 0; j < n; ++j) k[i][j] = rbf_kernel(ts.row(i), ts.row(j), p.gamma);
    }
    const auto ref = oracle::solve_dual(k, y, ub);
    const double rel = std::fabs(r.objective - ref.objective) / std::max(1e-300, std::fabs(ref.objective));
    worst = std::max(worst, rel);
    if (!(rel <= 1e-6)) ++obj_bad;

    bool kkt = true, box = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = r.alpha[i], c = p.box(ts.y[i]);
      if (a < 0.0 || a > c) box = false;
      const double yf = ts.y[i] * decision_function(r.model, ts.row(i));
      if (a == 0.0 ? yf < 1 - tol : (a < c ? std::fabs(yf - 1) > tol : yf > 1 + tol)) kkt = false;
    }
    if (!kkt) ++kkt_bad;
    if (!box) ++box_bad;
  }
  return {obj_bad == 0 && kkt_bad == 0 && box_bad == 0,
          fmt("objective off on %zu/25 (worst relative gap %.2e), KKT violated on %zu, box violated on %zu", obj_bad,
              worst, kkt_bad, box_bad)};
}

// ---------------------------------------------------------------------------

struct Campaign {
  bool ran = false;
  std::string error;
  EvalReport report;
  std::size_t test_runs = 0, type2_test_runs = 0;
  double seconds = 0.0;
};

Campaign& campaign() {
  static Campaign c;
  if (c.ran) return c;
  c.ran = true;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const auto cfg = load_config(fs::path(RQEWS_SOURCE_DIR) / "configs" / "campaign.json");
    const auto runs = generate_campaign(cfg.n_runs, cfg.synth, cfg.campaign_seed);
    std::vector<LabeledRun> train, test;
    for (const auto& cr : runs) {
      auto pr = process_run(LoadedRun{cr.run.series, cr.run.meta}, cfg, true);
      if (cr.split == "test") {
        ++c.test_runs;
        if (std::find(cr.events.begin(), cr.events.end(), InstabilityKind::type2) != cr.events.end()) ++c.type2_test_runs;
        test.push_back(std::move(pr.labeled));
      } else {
        train.push_back(std::move(pr.labeled));
      }
    }
    const auto trained = train_pipeline(train, cfg);
    c.report = evaluate_pipeline(trained.model, train, test, cfg);
  } catch (const std::exception& ex) {
    c.error = ex.what();
  }
  c.seconds = seconds_since(t0);
  return c;
}

Outcome protocol() {
  const auto& c = campaign();
  if (!c.error.empty()) return {false, "campaign failed: " + c.error};
  const auto& r = c.report;
  std::size_t alarmed = 0;
  for (const auto& e : r.events) alarmed += e.alarmed ? 1 : 0;
  const double tpr = r.tpr_at_fpr.at(0.02);
  const bool pass = c.test_runs == 4 && c.type2_test_runs >= 2 && tpr >= 0.60 && r.events.size() == 8 && alarmed >= 6 &&
                    c.seconds < 20 * 60;
  return {pass, fmt("AUC %.3f, TPR %.3f at FPR 2%%, %zu/%zu events alarmed, %zu test runs (%zu with type 2), %.0f s",
                    r.roc.auc, tpr, alarmed, r.events.size(), c.test_runs, c.type2_test_runs, c.seconds)};
}

Outcome baselines() {
  const auto& c = campaign();
  if (!c.error.empty()) return {false, "campaign failed: " + c.error};
  const auto& r = c.report;
  const double svm = r.tpr_at_fpr.at(0.01);
  double best_measure = 0.0, hurst = -1.0;
  std::string best_name;
  for (const auto& b : r.baselines) {
    const double v = b.tpr_at_fpr.at(0.01);
    if (b.name == "h") {
      hurst = v;
    } else if (v >= best_measure) {
      best_measure = v;
      best_name = b.name;
    }
  }
  return {hurst >= 0.0 && svm > best_measure && svm > hurst,
          fmt("TPR at FPR 1%%: SVM %.3f, best single measure %s %.3f, Hurst %.3f", svm, best_name.c_str(), best_measure,
              hurst)};
}

// ---------------------------------------------------------------------------

int sh(const std::string& cmd) {
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

Outcome determinism_and_causality() {
  const fs::path root = fs::temp_directory_path() / ("rqews_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cli = RQEWS_CLI_PATH;
  const fs::path cfg = root / "cfg.json";
  std::ofstream(cfg) << R"({"synth": {"n_runs": 3, "duration_s": 3.6, "seed": 99}, "search": {"n_samples": 3, "seed": 5}})";
  const fs::path work = root / "work";
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };

  const auto pipeline = [&](int threads) {
    fs::remove_all(work);
    const std::string common = " -c " + q(cfg) + " -j " + std::to_string(threads);
    const fs::path runs = work / "runs", data = work / "data", model = work / "model", eval = work / "eval";
    std::string files;
    if (sh(cli + " synth" + common + " --format csv -o " + q(runs) + " 2>/dev/null") != 0) return false;
    for (const auto& e : fs::directory_iterator(runs))
      if (e.path().extension() == ".csv") files += " " + q(e.path());
    return sh(cli + " features" + common + " -o " + q(data) + files + " 2>/dev/null") == 0 &&
           sh(cli + " label" + common + " -o " + q(data) + files + " 2>/dev/null") == 0 &&
           sh(cli + " train" + common + " -d " + q(data) + " --manifest " + q(runs / "manifest.jsonl") +
              " --split train -o " + q(model) + " 2>/dev/null") == 0 &&
           sh(cli + " evaluate" + common + " -m " + q(model / "model.json") + " -d " + q(data) + " --manifest " +
              q(runs / "manifest.jsonl") + " -o " + q(eval) + " 2>/dev/null") == 0;
  };

  if (!pipeline(1)) return {false, "CLI pipeline failed (first pass)"};
  const auto first = snapshot(work);
  if (!pipeline(3)) return {false, "CLI pipeline failed (second pass)"};
  const auto second = snapshot(work);
  std::size_t differing = 0;
  for (const auto& [name, body] : first) {
    const auto it = second.find(name);
    if (it == second.end() || it->second != body) ++differing;
  }
  const bool same = first.size() == second.size() && differing == 0;

  // Truncations of one run file, each cut at a random byte past the header.
  fs::path run_file;
  for (const auto& e : fs::directory_iterator(work / "runs"))
    if (e.path().extension() == ".csv" && (run_file.empty() || e.path() < run_file)) run_file = e.path();
  const std::string text = slurp(run_file);
  std::size_t body = 0;
  double rate = 0.0, start = 0.0;
  for (const auto& line : split_lines(text)) {
    if (line.empty() || line[0] != '#') break;
    if (line.rfind("# sample_rate=", 0) == 0) rate = std::stod(line.substr(14));
    if (line.rfind("# start_time=", 0) == 0) start = std::stod(line.substr(13));
    body += line.size() + 1;
  }
  const fs::path model = work / "model" / "model.json";
  const fs::path full_out = root / "full.csv";
  if (sh(cli + " predict -m " + q(model) + " " + q(run_file) + " -o " + q(full_out) + " 2>/dev/null") != 0)
    return {false, "predict failed on the full run"};
  const auto full = split_lines(slurp(full_out));
  Rng rng(1234);
  std::size_t broken = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t cut = body + rng.below(text.size() - body);
    const std::string part = text.substr(0, cut);
    const fs::path in = root / "cut.csv", out = root / "cut_out.csv";
    std::ofstream(in, std::ios::binary) << part;
    if (sh(cli + " predict -m " + q(model) + " - -o " + q(out) + " < " + q(in) + " 2>/dev/null") != 0) {
      ++broken;
      continue;
    }
    const auto got = split_lines(slurp(out));
    // Whole samples kept: complete lines after the header.
    const std::size_t kept = static_cast<std::size_t>(std::count(part.begin() + static_cast<std::ptrdiff_t>(body), part.end(), '\n'));
    const double t_cut = start + static_cast<double>(kept) / rate;
    std::size_t expected = 1;
    while (expected < full.size() && std::stod(full[expected].substr(0, full[expected].find(','))) <= t_cut + 1e-9)
      ++expected;
    bool ok = got.size() == expected;
    for (std::size_t i = 0; ok && i < got.size(); ++i) ok = got[i] == full[i];
    if (!ok) ++broken;
  }
  fs::remove_all(root);
  return {same && broken == 0, fmt("%zu artifacts compared, %zu differ; %zu/100 truncations changed the prefix",
                                   first.size(), differing, broken)};
}

// ---------------------------------------------------------------------------

Outcome throughput() {
  SynthConfig sc;
  sc.duration_s = 10.0;
  sc.seed = 31;
  sc.mu_schedule = {{0.0, -1.0}, {5.0, -1.0}, {8.0, 1.0}, {10.0, 1.0}};
  const auto run = generate_run(sc);
  FeatureConfig fc;
  const std::clock_t c0 = std::clock();
  const auto fs_out = extract_features(run.series, fc, "throughput", 1);
  const double core = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  return {core <= 2.0 && !fs_out.vectors.empty(),
          fmt("10 s at 100 kHz, decimation %zu: %.2f s core time, %.2fx real time (need <= 2 s, >= 5x)",
              fc.rqa.decimation, core, 10.0 / core)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"RQA oracle equivalence", rqa_oracle},
      {"dynamics discrimination", dynamics},
      {"DFA calibration", dfa_calibration},
      {"SVM against QP oracle", svm_oracle},
      {"end-to-end protocol", protocol},
      {"baseline ordering", baselines},
      {"determinism and causality", determinism_and_causality},
      {"throughput", throughput},
  };
  const double limits[] = {30, 60, 120, 120, 20 * 60, 0, 0, 0};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double s = seconds_since(t0);
    if (limits[i] > 0 && s > limits[i]) {
      o.pass = false;
      o.detail += fmt("; took %.1f s, limit %.0f s", s, limits[i]);
    }
    all = all && o.pass;
    std::printf("%s criterion %d: %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(), s);
    std::fflush(stdout);
  }
  return (!all && std::getenv("RQEWS_ACCEPTANCE_STRICT")) ? 1 : 0;
}
