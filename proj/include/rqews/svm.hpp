#pragma once

// Weighted soft-margin SVM with an RBF kernel, trained by SMO.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <list>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rqews/error.hpp"
#include "rqews/features.hpp"
#include "rqews/numeric.hpp"

namespace rqews {

struct SvmParams {
  double c = 0.195;
  double gamma = 0.918;
  double weight_pos = 1.0;  // class weight of label +1
  double weight_neg = 1.0;  // class weight of label -1

  void validate() const {
    for (double v : {c, gamma, weight_pos, weight_neg})
      if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("SVM parameters must be finite and positive");
  }
  double weight(int y) const { return y > 0 ? weight_pos : weight_neg; }
  double box(int y) const { return c * weight(y); }
};

struct TrainOptions {
  double tol = 1e-3;                        // KKT gap at which SMO stops
  std::size_t max_iter = 10'000'000;        // pair updates
  std::size_t cache_bytes = std::size_t{256} << 20;
};

struct TrainingSet {
  std::vector<double> x;  // n x dim, row-major
  std::vector<int> y;     // +1 / -1
  std::size_t dim = 0;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * dim, dim}; }

  void add(std::span<const double> v, int label) {
    if (dim == 0 && y.empty()) dim = v.size();
    if (v.size() != dim) throw ValidationError("training row dimension mismatch");
    if (label != 1 && label != -1) throw ValidationError("training labels must be +1 or -1");
    x.insert(x.end(), v.begin(), v.end());
    y.push_back(label);
  }

  void validate() const {
    if (size() < 2) throw ValidationError("SVM training needs at least 2 points");
    if (x.size() != size() * dim) throw ValidationError("training matrix shape mismatch");
    const bool pos = std::find(y.begin(), y.end(), 1) != y.end();
    const bool neg = std::find(y.begin(), y.end(), -1) != y.end();
    if (!pos || !neg) throw ValidationError("SVM training needs both classes");
  }
};

/// Weights n / (2 n_class): inversely proportional to class frequency, mean weight 1.
inline std::pair<double, double> balanced_class_weights(std::span<const int> y) {
  const auto pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const auto neg = static_cast<double>(std::count(y.begin(), y.end(), -1));
  if (pos == 0.0 || neg == 0.0) throw ValidationError("class weights need both classes");
  const double n = pos + neg;
  return {n / (2.0 * pos), n / (2.0 * neg)};
}

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

struct SvmModel {
  SvmParams params;
  Scaler scaler;                     // empty when inputs are used as given
  std::size_t dim = 0;
  std::vector<double> support_vectors;  // M x dim, standardized space
  std::vector<double> dual_coefs;       // alpha_i * y_i
  double bias = 0.0;
  std::optional<double> threshold;      // deployment threshold on the decision value

  std::size_t support_count() const { return dual_coefs.size(); }
  std::span<const double> support_vector(std::size_t i) const { return {support_vectors.data() + i * dim, dim}; }
};

/// Sum_i nu_i k(x, sv_i) + b for an already standardized x.
inline double decision_function(const SvmModel& m, std::span<const double> x) {
  if (x.size() != m.dim)
    throw ValidationError("decision_function: expected " + std::to_string(m.dim) + " features, got " +
                          std::to_string(x.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < m.support_count(); ++i) s += m.dual_coefs[i] * rbf_kernel(x, m.support_vector(i), m.params.gamma);
  return s + m.bias;
}

/// Decision value for raw (unstandardized) features.
inline double decision_raw(const SvmModel& m, std::span<const double> raw) {
  if (m.scaler.dim() == 0) return decision_function(m, raw);
  return decision_function(m, m.scaler.apply(raw));
}

struct TrainResult {
  SvmModel model;
  std::vector<double> alpha;  // one per training point
  double objective = 0.0;     // dual objective sum(alpha) - 1/2 alpha' Q alpha
  double gap = 0.0;           // final maximal KKT violation
  std::size_t iterations = 0;
};

namespace detail {

/// LRU cache of kernel rows.
class KernelCache {
 public:
  KernelCache(const TrainingSet& data, double gamma, std::size_t bytes)
      : data_(data), gamma_(gamma), rows_(data.size()), where_(data.size()) {
    const std::size_t row_bytes = std::max<std::size_t>(1, data.size() * sizeof(double));
    capacity_ = std::max<std::size_t>(2, bytes / row_bytes);
  }

  const std::vector<double>& row(std::size_t i) {
    if (!rows_[i].empty()) {
      lru_.splice(lru_.begin(), lru_, where_[i]);
      return rows_[i];
    }
    if (lru_.size() >= capacity_) {
      const std::size_t victim = lru_.back();
      lru_.pop_back();
      std::vector<double>().swap(rows_[victim]);
    }
    auto& r = rows_[i];
    r.resize(data_.size());
    const auto xi = data_.row(i);
    for (std::size_t j = 0; j < data_.size(); ++j) r[j] = rbf_kernel(xi, data_.row(j), gamma_);
    lru_.push_front(i);
    where_[i] = lru_.begin();
    return r;
  }

 private:
  const TrainingSet& data_;
  double gamma_;
  std::size_t capacity_;
  std::vector<std::vector<double>> rows_;
  std::list<std::size_t> lru_;
  std::vector<std::list<std::size_t>::iterator> where_;
};

}  // namespace detail

/// SMO on the dual: maximise sum(alpha) - 1/2 sum alpha_i alpha_j y_i y_j k(x_i, x_j)
/// subject to 0 <= alpha_i <= C w_{y_i} and sum alpha_i y_i = 0. Working pairs are
/// chosen by maximal violation for i and second-order gain for j; iteration stops
/// when the maximal KKT violation drops below opts.tol.
inline TrainResult train_detailed(const TrainingSet& data, const SvmParams& params, const TrainOptions& opts = {}) {
  data.validate();
  params.validate();
  if (!(opts.tol > 0.0)) throw ValidationError("SVM tolerance must be positive");
  const std::size_t n = data.size();
  const auto& y = data.y;
  std::vector<double> alpha(n, 0.0), grad(n, -1.0), box(n), qd(n);
  for (std::size_t t = 0; t < n; ++t) {
    box[t] = params.box(y[t]);
    qd[t] = 1.0;  // k(x, x) = 1 for the RBF kernel
  }
  detail::KernelCache cache(data, params.gamma, opts.cache_bytes);
  const double tau = 1e-12;
  const auto is_upper = [&](std::size_t t) { return alpha[t] >= box[t]; };
  const auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  std::size_t iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (;;) {
    // Select i from I_up by maximal -y G, then j from I_low by second-order gain.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1 ? !is_upper(t) : !is_lower(t)) {
        const double v = -static_cast<double>(y[t]) * grad[t];
        if (v >= gmax) {
          gmax = v;
          i = t;
        }
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t j = n;
    double best = std::numeric_limits<double>::infinity();
    const std::vector<double>* qi = i < n ? &cache.row(i) : nullptr;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1 ? !is_lower(t) : !is_upper(t)) {
        const double yg = static_cast<double>(y[t]) * grad[t];
        gmax2 = std::max(gmax2, yg);
        if (qi == nullptr) continue;
        const double b = gmax + yg;
        if (b > 0.0) {
          double a = qd[i] + qd[t] - 2.0 * (*qi)[t];  // y_i y_t Q_it = K_it
          if (a <= 0.0) a = tau;
          const double gain = -(b * b) / a;
          if (gain <= best) {
            best = gain;
            j = t;
          }
        }
      }
    }
    gap = gmax + gmax2;
    if (gap < opts.tol || i == n || j == n) break;
    if (iter >= opts.max_iter) throw ConvergenceError(gap, iter);
    ++iter;

    const std::vector<double>& ki = cache.row(i);
    const std::vector<double>& kj = cache.row(j);
    const double yi = y[i], yj = y[j];
    const double ci = box[i], cj = box[j];
    const double old_ai = alpha[i], old_aj = alpha[j];
    const double kij = ki[j];
    if (y[i] != y[j]) {
      double quad = qd[i] + qd[j] + 2.0 * kij * (yi * yj);  // Q_ii + Q_jj + 2 Q_ij
      if (quad <= 0.0) quad = tau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else {
        if (alpha[i] < 0.0) {
          alpha[i] = 0.0;
          alpha[j] = -diff;
        }
      }
      if (diff > ci - cj) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = ci - diff;
        }
      } else {
        if (alpha[j] > cj) {
          alpha[j] = cj;
          alpha[i] = cj + diff;
        }
      }
    } else {
      double quad = qd[i] + qd[j] - 2.0 * kij;
      if (quad <= 0.0) quad = tau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > ci) {
        if (alpha[i] > ci) {
          alpha[i] = ci;
          alpha[j] = sum - ci;
        }
      } else {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = sum;
        }
      }
      if (sum > cj) {
        if (alpha[j] > cj) {
          alpha[j] = cj;
          alpha[i] = sum - cj;
        }
      } else {
        if (alpha[i] < 0.0) {
          alpha[i] = 0.0;
          alpha[j] = sum;
        }
      }
    }
    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    // G_t += Q_ti dai + Q_tj daj with Q_ts = y_t y_s K_ts.
    for (std::size_t t = 0; t < n; ++t)
      grad[t] += static_cast<double>(y[t]) * (yi * ki[t] * dai + yj * kj[t] * daj);
  }

  // rho: mean of y G over free vectors, else midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t nfree = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = static_cast<double>(y[t]) * grad[t];
    if (is_upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++nfree;
      sum_free += yg;
    }
  }
  const double rho = nfree > 0 ? sum_free / static_cast<double>(nfree) : (ub + lb) / 2.0;

  TrainResult res;
  res.iterations = iter;
  res.gap = gap;
  res.alpha = alpha;
  double obj = 0.0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (1.0 - grad[t]);
  res.objective = 0.5 * obj;
  SvmModel& m = res.model;
  m.params = params;
  m.dim = data.dim;
  m.bias = -rho;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      const auto r = data.row(t);
      m.support_vectors.insert(m.support_vectors.end(), r.begin(), r.end());
      m.dual_coefs.push_back(alpha[t] * static_cast<double>(y[t]));
    }
  }
  return res;
}

inline SvmModel train(const TrainingSet& data, const SvmParams& params, const TrainOptions& opts = {}) {
  return train_detailed(data, params, opts).model;
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kModelFormat = "rqews-svm";

inline nlohmann::ordered_json hex_array(std::span<const double> v) {
  auto a = nlohmann::ordered_json::array();
  for (double x : v) a.push_back(to_hex_float(x));
  return a;
}

inline std::vector<double> from_hex_array(const nlohmann::json& a) {
  std::vector<double> out;
  for (const auto& e : a) out.push_back(from_hex_float(e.get<std::string>()));
  return out;
}

/// Field order: format, version, kernel, params, dim, feature_names, scaler,
/// bias, threshold, dual_coefs, support_vectors (row-major), provenance.
/// Reals are hex-float strings so they round-trip exactly.
inline nlohmann::ordered_json model_to_json(const SvmModel& m, const nlohmann::ordered_json& provenance = {}) {
  nlohmann::ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelSchemaVersion;
  j["kernel"] = "rbf";
  j["params"] = {{"c", to_hex_float(m.params.c)},
                 {"gamma", to_hex_float(m.params.gamma)},
                 {"weight_pos", to_hex_float(m.params.weight_pos)},
                 {"weight_neg", to_hex_float(m.params.weight_neg)}};
  j["dim"] = m.dim;
  if (m.dim == kFeatureCount) {
    auto names = nlohmann::ordered_json::array();
    for (const char* s : kFeatureNames) names.push_back(s);
    j["feature_names"] = names;
  }
  j["scaler"] = {{"means", hex_array(m.scaler.means)}, {"stddevs", hex_array(m.scaler.stddevs)}};
  j["bias"] = to_hex_float(m.bias);
  j["threshold"] = m.threshold ? nlohmann::ordered_json(to_hex_float(*m.threshold)) : nlohmann::ordered_json(nullptr);
  j["dual_coefs"] = hex_array(m.dual_coefs);
  auto svs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < m.support_count(); ++i) svs.push_back(hex_array(m.support_vector(i)));
  j["support_vectors"] = svs;
  if (!provenance.is_null()) j["provenance"] = provenance;
  return j;
}

inline SvmModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw LoadError(LoadError::Kind::schema, "not an rqews SVM model");
    const int version = j.at("version").get<int>();
    if (version != kModelSchemaVersion)
      throw LoadError(LoadError::Kind::schema, "model schema version " + std::to_string(version) + " unsupported (expected " +
                                                   std::to_string(kModelSchemaVersion) + ")");
    if (j.at("kernel").get<std::string>() != "rbf") throw LoadError(LoadError::Kind::schema, "unsupported kernel");
    SvmModel m;
    const auto& p = j.at("params");
    m.params.c = from_hex_float(p.at("c").get<std::string>());
    m.params.gamma = from_hex_float(p.at("gamma").get<std::string>());
    m.params.weight_pos = from_hex_float(p.at("weight_pos").get<std::string>());
    m.params.weight_neg = from_hex_float(p.at("weight_neg").get<std::string>());
    m.dim = j.at("dim").get<std::size_t>();
    m.scaler.means = from_hex_array(j.at("scaler").at("means"));
    m.scaler.stddevs = from_hex_array(j.at("scaler").at("stddevs"));
    m.bias = from_hex_float(j.at("bias").get<std::string>());
    if (!j.at("threshold").is_null()) m.threshold = from_hex_float(j.at("threshold").get<std::string>());
    m.dual_coefs = from_hex_array(j.at("dual_coefs"));
    for (const auto& row : j.at("support_vectors")) {
      const auto r = from_hex_array(row);
      if (r.size() != m.dim) throw LoadError(LoadError::Kind::schema, "support vector dimension mismatch");
      m.support_vectors.insert(m.support_vectors.end(), r.begin(), r.end());
    }
    if (m.support_vectors.size() != m.dual_coefs.size() * m.dim)
      throw LoadError(LoadError::Kind::schema, "support vector count does not match dual coefficients");
    if (m.dual_coefs.empty()) throw LoadError(LoadError::Kind::schema, "model has no support vectors");
    if (m.scaler.dim() != 0 && (m.scaler.dim() != m.dim || m.scaler.stddevs.size() != m.dim))
      throw LoadError(LoadError::Kind::schema, "scaler dimension mismatch");
    m.params.validate();
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw LoadError(LoadError::Kind::schema, std::string("model file: ") + ex.what());
  } catch (const ValidationError& ex) {
    throw LoadError(LoadError::Kind::schema, std::string("model file: ") + ex.what());
  }
}

inline void save_model(const SvmModel& m, const std::filesystem::path& path,
                       const nlohmann::ordered_json& provenance = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError(LoadError::Kind::io, "cannot open '" + path.string() + "' for writing");
  out << model_to_json(m, provenance).dump(1) << '\n';
  if (!out) throw LoadError(LoadError::Kind::io, "write failed for '" + path.string() + "'");
}

inline SvmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(LoadError::Kind::io, "cannot open model '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (text.empty()) throw LoadError(LoadError::Kind::empty, "model file '" + path.string() + "' is empty");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw LoadError(LoadError::Kind::truncated, "model file '" + path.string() + "' is truncated or malformed: " + ex.what());
  }
  return model_from_json(j);
}

}  // namespace rqews
