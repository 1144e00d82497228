// rqews command-line tool: synth, features, label, train, evaluate, predict.
// Exit codes: 0 success, 2 validation error, 3 runtime or data error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rqews/config.hpp"
#include "rqews/pipeline.hpp"
#include "rqews/synth.hpp"

namespace fs = std::filesystem;
using namespace rqews;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config_path;
  std::size_t threads = 0;
};

ExperimentConfig resolve_config(const Common& c) {
  return c.config_path.empty() ? config_from_json(nlohmann::json::object()) : load_config(c.config_path);
}

nlohmann::ordered_json provenance(const std::string& subcommand, const ExperimentConfig& cfg) {
  nlohmann::ordered_json p;
  p["tool"] = "rqews";
  p["version"] = kToolVersion;
  p["subcommand"] = subcommand;
  const SvmParams defaults;
  p["svm_default_params"] = {{"c", defaults.c}, {"gamma", defaults.gamma}};
  p["config"] = config_to_json(cfg);
  return p;
}

fs::path temp_dir_for(const fs::path& target) {
  if (const char* env = std::getenv("RQEWS_TMPDIR"); env && *env) return fs::path(env);
  return target.parent_path().empty() ? fs::path(".") : target.parent_path();
}

/// Writes through a temporary file and renames it into place.
void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  const fs::path tmp = temp_dir_for(path) / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError(LoadError::Kind::io, "cannot write '" + tmp.string() + "'");
    body(out);
    out.flush();
    if (!out) throw LoadError(LoadError::Kind::io, "write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::copy_file(tmp, path, fs::copy_options::overwrite_existing);
    fs::remove(tmp);
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw LoadError(LoadError::Kind::io, "cannot create directory '" + dir.string() + "'");
}

std::vector<std::pair<std::string, std::string>> provenance_comments(const nlohmann::ordered_json& p) {
  return {{"provenance", p.dump()}};
}

/// Run ids from the manifest whose split matches.
std::vector<std::string> manifest_runs(const fs::path& manifest, const std::string& split) {
  std::ifstream in(manifest);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open manifest '" + manifest.string() + "'");
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("split").get<std::string>() == split) ids.push_back(j.at("run_id").get<std::string>());
    } catch (const nlohmann::json::exception& ex) {
      throw LoadError(LoadError::Kind::schema, "manifest: " + std::string(ex.what()));
    }
  }
  return ids;
}

std::vector<LabeledRun> load_runs(const fs::path& dir, const std::vector<std::string>& ids) {
  std::vector<LabeledRun> out;
  for (const auto& id : ids) out.push_back(load_labeled_run(dir, id));
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::string format = "binary";
  std::size_t runs = 0;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const Common& c, const SynthArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  if (a.runs > 0) cfg.n_runs = a.runs;
  if (a.seed) cfg.campaign_seed = *a.seed;
  cfg.validate();
  const fs::path dir(a.out);
  ensure_dir(dir);
  const bool csv = a.format == "csv";
  const auto prov = provenance("synth", cfg);

  // Runs are independent; generate in parallel, write in order.
  std::vector<CampaignRun> runs(cfg.n_runs);
  std::vector<std::string> errors(cfg.n_runs);
  parallel_for(cfg.n_runs, c.threads, [&](std::size_t i) {
    try {
      runs[i] = generate_campaign_run(i + 1, cfg.n_runs, cfg.synth, cfg.campaign_seed);
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw IntegrationError(e);

  std::ostringstream manifest;
  for (const auto& cr : runs) {
    const std::string file = cr.config.run_id + (csv ? ".csv" : ".bin");
    write_file(dir / file, [&](std::ostream& os) {
      if (csv) {
        write_run_csv(os, cr.run.series, cr.run.meta);
      } else {
        write_run_binary(os, cr.run.series, cr.run.meta);
      }
    });
    manifest << manifest_entry(cr, file).dump() << '\n';
  }
  write_file(dir / "manifest.jsonl", [&](std::ostream& os) { os << manifest.str(); });
  write_file(dir / "provenance.json", [&](std::ostream& os) { os << prov.dump(1) << '\n'; });
  std::cerr << "synth: wrote " << runs.size() << " runs to " << dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct FeaturesArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string measure;
};

int cmd_features(const Common& c, const FeaturesArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  if (!a.measure.empty() && a.measure != "hurst") throw ValidationError("--measure accepts only 'hurst'");
  const bool hurst = a.measure == "hurst";
  const fs::path dir(a.out);
  ensure_dir(dir);
  auto prov = provenance("features", cfg);
  prov["hurst"] = hurst;
  for (const auto& input : a.inputs) {
    const LoadedRun run = load_run(input);
    FeatureConfig fc = cfg.features;
    fc.hurst = hurst;
    const FeatureSeries feats = extract_features(run.series, fc, run.metadata.run_id, c.threads);
    const auto comments = provenance_comments(prov);
    write_file(dir / (feats.run_id + ".features.csv"), [&](std::ostream& os) { write_features_csv(os, feats, comments); });
    std::cerr << "features: " << feats.run_id << " -> " << feats.vectors.size() << " vectors\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct LabelArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::string features;
  std::optional<double> p_cc;
};

int cmd_label(const Common& c, const LabelArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  const fs::path dir(a.out);
  ensure_dir(dir);
  const fs::path feat_dir = a.features.empty() ? dir : fs::path(a.features);
  for (const auto& input : a.inputs) {
    LoadedRun run = load_run(input);
    if (a.p_cc) run.metadata.mean_chamber_pressure = *a.p_cc;
    const double p_cc = run.metadata.p_cc();
    const auto fpath = feat_dir / (run.metadata.run_id + ".features.csv");
    std::ifstream fin(fpath);
    if (!fin) throw LoadError(LoadError::Kind::io, "missing feature file '" + fpath.string() + "'");
    const FeatureSeries feats = read_features_csv(fin, run.metadata.run_id);
    const TimeSeries env = amplitude_envelope(run.series, p_cc, cfg.labels);
    const auto intervals = detect_intervals(env, cfg.labels.thr1, cfg.labels.thr2, cfg.labels.hold_s);
    const LabeledRun labeled = label_features(feats, intervals, cfg.labels.lead_s);
    const std::string id = labeled.run_id;
    write_file(dir / (id + ".labels.csv"), [&](std::ostream& os) { write_labels_csv(os, labeled); });
    write_file(dir / (id + ".intervals.jsonl"), [&](std::ostream& os) { write_intervals_jsonl(os, id, intervals); });
    write_file(dir / (id + ".envelope.csv"), [&](std::ostream& os) {
      os << "t,envelope_pct\n";
      for (std::size_t i = 0; i < env.size(); ++i) os << format_double(env.time_at(i)) << ',' << format_double(env.samples[i]) << '\n';
    });
    std::cerr << "label: " << id << " intervals=" << intervals.size() << " transient=" << labeled.count(Label::transient)
              << " far_stable=" << labeled.count(Label::far_stable) << " excluded=" << labeled.count(Label::excluded) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::vector<std::string> runs;
  std::string data;
  std::string manifest;
  std::string split = "train";
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_samples;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  if (a.seed) cfg.search.seed = *a.seed;
  if (a.n_samples) cfg.search.n_samples = *a.n_samples;
  cfg.validate();
  std::vector<std::string> ids = a.runs;
  if (ids.empty() && !a.manifest.empty()) ids = manifest_runs(a.manifest, a.split);
  if (ids.size() < 2) throw ValidationError("train needs at least 2 runs (cross-validation holds one out)");
  const fs::path dir(a.out);
  ensure_dir(dir);
  const auto runs = load_runs(a.data, ids);
  const TrainOutcome t = train_pipeline(runs, cfg, c.threads);
  auto prov = provenance("train", cfg);
  prov["train_runs"] = ids;
  write_file(dir / "model.json", [&](std::ostream& os) { os << model_to_json(t.model, prov).dump(1) << '\n'; });
  nlohmann::ordered_json report;
  report["train_runs"] = ids;
  report["search"] = search_to_json(t.search);
  report["deploy_fpr"] = cfg.evaluate.deploy_fpr;
  report["deploy_threshold"] = *t.model.threshold;
  report["support_vectors"] = t.model.support_count();
  report["provenance"] = prov;
  write_file(dir / "train_report.json", [&](std::ostream& os) { os << report.dump(1) << '\n'; });
  std::cerr << "train: C=" << format_double(t.search.c) << " gamma=" << format_double(t.search.gamma)
            << " mean F=" << format_double(t.search.score) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string data;
  std::string manifest;
  std::vector<std::string> test;
  std::vector<std::string> train;
  std::string out;
};

int cmd_evaluate(const Common& c, const EvaluateArgs& a) {
  ExperimentConfig cfg = resolve_config(c);
  std::vector<std::string> test = a.test, train = a.train;
  if (!a.manifest.empty()) {
    if (test.empty()) test = manifest_runs(a.manifest, "test");
    if (train.empty()) train = manifest_runs(a.manifest, "train");
  }
  if (test.empty()) throw ValidationError("evaluate needs test runs (--test or --manifest)");
  const SvmModel model = load_model(a.model);
  const fs::path dir(a.out);
  ensure_dir(dir);
  const auto test_runs = load_runs(a.data, test);
  const auto train_runs = load_runs(a.data, train);
  const EvalReport r = evaluate_pipeline(model, train_runs, test_runs, cfg);
  auto prov = provenance("evaluate", cfg);
  prov["test_runs"] = test;
  prov["train_runs"] = train;
  auto j = report_to_json(r);
  j["provenance"] = prov;
  write_file(dir / "report.json", [&](std::ostream& os) { os << j.dump(1) << '\n'; });
  write_file(dir / "roc.csv", [&](std::ostream& os) { write_roc_csv(os, r.roc); });
  write_file(dir / "baselines.csv", [&](std::ostream& os) { write_baselines_csv(os, r); });
  for (std::size_t k = 0; k < test_runs.size(); ++k) {
    std::optional<TimeSeries> env;
    const auto epath = fs::path(a.data) / (test_runs[k].run_id + ".envelope.csv");
    if (std::ifstream ein(epath); ein) {
      TimeSeries e;
      std::string line;
      std::vector<double> ts;
      while (std::getline(ein, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        const auto t = parse_double(std::string_view(line).substr(0, comma));
        const auto v = parse_double(std::string_view(line).substr(comma + 1));
        if (!t || !v) continue;
        ts.push_back(*t);
        e.samples.push_back(*v);
      }
      if (ts.size() >= 2) {
        e.start_time = ts.front();
        e.sample_rate = 1.0 / (ts[1] - ts[0]);
        env = std::move(e);
      }
    }
    write_file(dir / ("trace_" + test_runs[k].run_id + ".csv"), [&](std::ostream& os) {
      write_trace_csv(os, test_runs[k], r.run_scores[k], r.threshold, env ? &*env : nullptr);
    });
  }
  std::cerr << "evaluate: AUC=" << format_double(r.roc.auc);
  for (const auto& [q, v] : r.tpr_at_fpr) std::cerr << " TPR@" << format_double(q) << "=" << format_double(v);
  std::cerr << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string input = "-";
  std::string out;
  std::optional<double> threshold;
};

int cmd_predict(const Common& c, const PredictArgs& a) {
  const SvmModel model = load_model(a.model);
  ExperimentConfig cfg;
  if (!c.config_path.empty()) {
    cfg = load_config(c.config_path);
  } else {
    // Fall back to the configuration recorded when the model was trained.
    std::ifstream in(a.model);
    const auto j = nlohmann::json::parse(in);
    cfg = j.contains("provenance") && j["provenance"].contains("config") ? config_from_json(j["provenance"]["config"])
                                                                         : config_from_json(nlohmann::json::object());
  }
  const double threshold = a.threshold ? *a.threshold : model.threshold.value_or(0.0);
  std::ifstream file;
  std::istream* in = &std::cin;
  if (a.input != "-") {
    file.open(a.input, std::ios::binary);
    if (!file) throw LoadError(LoadError::Kind::io, "cannot open run file '" + a.input + "'");
    in = &file;
  }
  std::ofstream ofile;
  std::ostream* out = &std::cout;
  if (!a.out.empty()) {
    ofile.open(a.out, std::ios::binary | std::ios::trunc);
    if (!ofile) throw LoadError(LoadError::Kind::io, "cannot write '" + a.out + "'");
    out = &ofile;
  }
  predict_stream(model, cfg.features, threshold, *in, *out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rqews: recurrence-based early warning of oscillatory instabilities"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "experiment config (JSON); defaults apply when omitted");
    sub->add_option("-j,--threads", common.threads, "worker threads (default: RQEWS_THREADS or all cores)");
  };

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a surrogate campaign: run files and manifest.jsonl");
  add_common(s);
  s->add_option("-o,--out", synth.out, "output directory")->required();
  s->add_option("--format", synth.format, "run file layout")->check(CLI::IsMember({"binary", "csv"}));
  s->add_option("--runs", synth.runs, "number of runs (overrides synth.n_runs)");
  s->add_option("--seed", synth.seed, "campaign seed (overrides synth.seed)");

  FeaturesArgs feats;
  auto* f = app.add_subcommand("features", "windowed RQA features and trends for each run file");
  add_common(f);
  f->add_option("runs", feats.inputs, "run files (.bin or .csv)")->required();
  f->add_option("-o,--out", feats.out, "output directory")->required();
  f->add_option("--measure", feats.measure, "extra measure column; 'hurst' adds the Hurst exponent");

  LabelArgs label;
  auto* l = app.add_subcommand("label", "amplitude envelopes, instability intervals and per-vector labels");
  add_common(l);
  l->add_option("runs", label.inputs, "run files (.bin or .csv)")->required();
  l->add_option("-o,--out", label.out, "output directory")->required();
  l->add_option("--features", label.features, "directory holding <run_id>.features.csv (default: --out)");
  l->add_option("--p-cc", label.p_cc, "mean chamber pressure in bar (overrides run metadata)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "random search with leave-one-run-out CV, final model and threshold");
  add_common(t);
  t->add_option("runs", train.runs, "run ids to train on");
  t->add_option("-d,--data", train.data, "directory with features, labels and intervals")->required();
  t->add_option("--manifest", train.manifest, "campaign manifest; selects runs by --split when no ids are given");
  t->add_option("--split", train.split, "manifest split to train on");
  t->add_option("-o,--out", train.out, "output directory")->required();
  t->add_option("--seed", train.seed, "search seed (overrides search.seed)");
  t->add_option("--samples", train.n_samples, "search samples (overrides search.n_samples)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "test-set ROC, rates, importances, baselines and traces");
  add_common(e);
  e->add_option("-m,--model", ev.model, "model file")->required();
  e->add_option("-d,--data", ev.data, "directory with features, labels and intervals")->required();
  e->add_option("--manifest", ev.manifest, "campaign manifest; supplies test and train ids");
  e->add_option("--test", ev.test, "test run ids");
  e->add_option("--train", ev.train, "training run ids (for the single-measure baselines)");
  e->add_option("-o,--out", ev.out, "output directory")->required();

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "causal warning-signal trace for one run (file or '-' for stdin)");
  add_common(p);
  p->add_option("-m,--model", pr.model, "model file")->required();
  p->add_option("input", pr.input, "run file, or '-' to read standard input");
  p->add_option("-o,--out", pr.out, "trace CSV (default: standard output)");
  p->add_option("--threshold", pr.threshold, "alarm threshold (default: the model's deployment threshold)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitValidation;
  }

  try {
    if (*s) return cmd_synth(common, synth);
    if (*f) return cmd_features(common, feats);
    if (*l) return cmd_label(common, label);
    if (*t) return cmd_train(common, train);
    if (*e) return cmd_evaluate(common, ev);
    if (*p) return cmd_predict(common, pr);
  } catch (const ValidationError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}
