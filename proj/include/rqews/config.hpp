#pragma once

// Experiment configuration: one JSON document, every key optional, unknown
// keys rejected. to_json() gives the fully resolved parameter set that is
// embedded as provenance in output artifacts.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rqews/error.hpp"
#include "rqews/eval.hpp"
#include "rqews/features.hpp"
#include "rqews/labeling.hpp"
#include "rqews/svm.hpp"
#include "rqews/synth.hpp"

namespace rqews {

struct EvaluateConfig {
  std::vector<double> fpr_budgets{0.005, 0.01, 0.02};
  double deploy_fpr = 0.02;        // threshold budget on out-of-fold training scores
  std::size_t importance_repeats = 10;
  std::uint64_t importance_seed = 7;

  void validate() const {
    if (fpr_budgets.empty()) throw ValidationError("evaluate.fpr_budgets must not be empty");
    for (double q : fpr_budgets)
      if (!(q > 0.0 && q < 1.0)) throw ValidationError("evaluate.fpr_budgets entries must lie in (0, 1)");
    if (!(deploy_fpr > 0.0 && deploy_fpr < 1.0)) throw ValidationError("evaluate.deploy_fpr must lie in (0, 1)");
  }
};

struct ExperimentConfig {
  std::size_t n_runs = 10;
  std::uint64_t campaign_seed = 20240601;
  SynthConfig synth;
  FeatureConfig features;
  LabelConfig labels;
  TrainOptions svm;
  SearchSpace search;
  EvaluateConfig evaluate;

  void validate() const {
    if (n_runs < 2) throw ValidationError("synth.n_runs must be >= 2");
    synth.validate();
    features.embedding.validate();
    features.rqa.validate();
    features.hurst_cfg.validate();
    features.filter.validate(synth.sample_rate);
    labels.validate();
    search.validate();
    evaluate.validate();
    if (!(svm.tol > 0.0)) throw ValidationError("svm.tol must be positive");
    if (svm.max_iter < 1) throw ValidationError("svm.max_iter must be >= 1");
  }
};

namespace detail {

/// Reads keys from one JSON object, remembering which were consumed so that
/// leftovers can be reported by their dotted path.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config section '" + path_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("config key '" + dotted(key) + "' has the wrong type");
    }
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, dotted(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ValidationError("unknown config key '" + dotted(k.c_str()) + "'");
  }

 private:
  std::string dotted(const char* key) const { return path_.empty() ? std::string(key) : path_ + "." + key; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::Section root(j, "");

  auto s = root.sub("synth");
  s.get("n_runs", c.n_runs);
  s.get("seed", c.campaign_seed);
  s.get("duration_s", c.synth.duration_s);
  s.get("sample_rate", c.synth.sample_rate);
  s.get("p_cc", c.synth.p_cc);
  s.get("f0_hz", c.synth.f0_hz);
  s.get("noise_level", c.synth.noise_level);
  s.get("drift_level", c.synth.drift_level);
  s.get("mode_noise", c.synth.mode_noise);
  s.get("mu_rate", c.synth.mu_rate);
  s.get("beta", c.synth.beta);
  s.get("burst_rate", c.synth.burst_rate);
  s.get("burst_amplitude", c.synth.burst_amplitude);
  s.get("type1_amplitude_pct", c.synth.type1_amplitude_pct);
  s.get("type2_amplitude_pct", c.synth.type2_amplitude_pct);
  s.get("substeps", c.synth.substeps);
  s.finish();

  auto f = root.sub("filter");
  f.get("cutoff_hz", c.features.filter.cutoff_hz);
  f.get("order", c.features.filter.order);
  f.finish();
  c.labels.filter.cutoff_hz = c.features.filter.cutoff_hz;
  c.labels.filter.order = c.features.filter.order;

  auto e = root.sub("embedding");
  e.get("delay", c.features.embedding.delay_samples);
  e.get("dimension", c.features.embedding.dimension);
  e.finish();

  auto r = root.sub("rqa");
  r.get("epsilon", c.features.rqa.epsilon);
  r.get("l_min", c.features.rqa.l_min);
  r.get("v_min", c.features.rqa.v_min);
  r.get("theiler_window", c.features.rqa.theiler_window);
  r.get("decimation", c.features.rqa.decimation);
  r.finish();

  auto w = root.sub("sweep");
  w.get("window_s", c.features.sweep.window_s);
  w.get("stride_s", c.features.sweep.stride_s);
  w.get("trend_span_s", c.features.sweep.trend_span_s);
  w.finish();

  auto h = root.sub("hurst");
  h.get("scale_min", c.features.hurst_cfg.scale_min);
  h.get("scale_max", c.features.hurst_cfg.scale_max);
  h.get("n_scales", c.features.hurst_cfg.n_scales);
  h.get("order", c.features.hurst_cfg.order);
  h.finish();

  auto l = root.sub("labels");
  l.get("thr1", c.labels.thr1);
  l.get("thr2", c.labels.thr2);
  l.get("hold_s", c.labels.hold_s);
  l.get("lead_s", c.labels.lead_s);
  l.get("envelope_window_s", c.labels.envelope.window_s);
  l.get("envelope_stride_s", c.labels.envelope.stride_s);
  l.finish();

  auto v = root.sub("svm");
  v.get("tol", c.svm.tol);
  v.get("max_iter", c.svm.max_iter);
  std::size_t cache_mb = c.svm.cache_bytes >> 20;
  v.get("cache_mb", cache_mb);
  c.svm.cache_bytes = cache_mb << 20;
  v.finish();

  auto q = root.sub("search");
  q.get("c_min", c.search.c_lo);
  q.get("c_max", c.search.c_hi);
  q.get("gamma_min", c.search.gamma_lo);
  q.get("gamma_max", c.search.gamma_hi);
  q.get("n_samples", c.search.n_samples);
  q.get("seed", c.search.seed);
  q.finish();

  auto ev = root.sub("evaluate");
  ev.get("fpr_budgets", c.evaluate.fpr_budgets);
  ev.get("deploy_fpr", c.evaluate.deploy_fpr);
  ev.get("importance_repeats", c.evaluate.importance_repeats);
  ev.get("importance_seed", c.evaluate.importance_seed);
  ev.finish();

  root.finish();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + ex.what());
  }
  return config_from_json(j);
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["synth"] = {{"n_runs", c.n_runs},
                {"seed", c.campaign_seed},
                {"duration_s", c.synth.duration_s},
                {"sample_rate", c.synth.sample_rate},
                {"p_cc", c.synth.p_cc},
                {"f0_hz", c.synth.f0_hz},
                {"noise_level", c.synth.noise_level},
                {"drift_level", c.synth.drift_level},
                {"mode_noise", c.synth.mode_noise},
                {"mu_rate", c.synth.mu_rate},
                {"beta", c.synth.beta},
                {"burst_rate", c.synth.burst_rate},
                {"burst_amplitude", c.synth.burst_amplitude},
                {"type1_amplitude_pct", c.synth.type1_amplitude_pct},
                {"type2_amplitude_pct", c.synth.type2_amplitude_pct},
                {"substeps", c.synth.substeps}};
  j["filter"] = {{"cutoff_hz", c.features.filter.cutoff_hz}, {"order", c.features.filter.order}};
  j["embedding"] = {{"delay", c.features.embedding.delay_samples}, {"dimension", c.features.embedding.dimension}};
  j["rqa"] = {{"epsilon", c.features.rqa.epsilon},
              {"l_min", c.features.rqa.l_min},
              {"v_min", c.features.rqa.v_min},
              {"theiler_window", c.features.rqa.theiler_window},
              {"decimation", c.features.rqa.decimation}};
  j["sweep"] = {{"window_s", c.features.sweep.window_s},
                {"stride_s", c.features.sweep.stride_s},
                {"trend_span_s", c.features.sweep.trend_span_s}};
  j["hurst"] = {{"scale_min", c.features.hurst_cfg.scale_min},
                {"scale_max", c.features.hurst_cfg.scale_max},
                {"n_scales", c.features.hurst_cfg.n_scales},
                {"order", c.features.hurst_cfg.order}};
  j["labels"] = {{"thr1", c.labels.thr1},
                 {"thr2", c.labels.thr2},
                 {"hold_s", c.labels.hold_s},
                 {"lead_s", c.labels.lead_s},
                 {"envelope_window_s", c.labels.envelope.window_s},
                 {"envelope_stride_s", c.labels.envelope.stride_s}};
  j["svm"] = {{"tol", c.svm.tol}, {"max_iter", c.svm.max_iter}, {"cache_mb", c.svm.cache_bytes >> 20}};
  j["search"] = {{"c_min", c.search.c_lo},
                 {"c_max", c.search.c_hi},
                 {"gamma_min", c.search.gamma_lo},
                 {"gamma_max", c.search.gamma_hi},
                 {"n_samples", c.search.n_samples},
                 {"seed", c.search.seed}};
  j["evaluate"] = {{"fpr_budgets", c.evaluate.fpr_budgets},
                   {"deploy_fpr", c.evaluate.deploy_fpr},
                   {"importance_repeats", c.evaluate.importance_repeats},
                   {"importance_seed", c.evaluate.importance_seed}};
  return j;
}

}  // namespace rqews
