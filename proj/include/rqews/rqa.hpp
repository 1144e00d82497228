#pragma once

// Recurrence matrices and recurrence quantification measures.
//
// Layout: the thresholding kernel walks the upper diagonals of the matrix
// (pairs (i, i + k)), which keeps both operands contiguous in memory. Each
// diagonal is stored as a packed bitset; full rows are then rebuilt by
// scattering the set bits. Diagonal line lengths are run lengths of the
// diagonal bitsets, vertical line lengths are run lengths of the rows
// (columns equal rows by symmetry).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rqews/embedding.hpp"
#include "rqews/error.hpp"
#include "rqews/numeric.hpp"

namespace rqews {

struct RecurrenceConfig {
  double epsilon = 3.0;              // threshold in units of window standard deviations
  std::size_t l_min = 2;             // minimal diagonal line length
  std::size_t v_min = 2;             // minimal vertical line length
  std::size_t theiler_window = 0;    // pairs with |i - j| <= w are cleared when w > 0
  std::size_t decimation = 4;        // keep every k-th state vector

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("recurrence epsilon must be positive");
    if (l_min < 2) throw ValidationError("l_min must be >= 2");
    if (v_min < 2) throw ValidationError("v_min must be >= 2");
    if (decimation < 1) throw ValidationError("decimation must be >= 1");
  }
};

struct RqaMeasures {
  double rr = 0.0;
  double det = 0.0;
  double lam = 0.0;
  double entr = 0.0;
  double ratio = 0.0;
};

/// Exact integer statistics of one recurrence matrix. Histograms are indexed by line length.
struct LineCounts {
  std::size_t n = 0;
  std::uint64_t points = 0;
  std::vector<std::uint64_t> diagonal;
  std::vector<std::uint64_t> vertical;

  bool operator==(const LineCounts&) const = default;
};

/// Square, symmetric, bit-packed recurrence matrix (rows of 64-bit words).
class RecurrenceMatrix {
 public:
  RecurrenceMatrix() = default;
  explicit RecurrenceMatrix(std::size_t n, RecurrenceConfig config = {})
      : n_(n), wpr_((n + 63) / 64), bits_(n * ((n + 63) / 64), 0), config_(config) {}

  /// Builds from a dense row-major 0/1 matrix; throws if it is not square and symmetric.
  static RecurrenceMatrix from_dense(std::span<const std::uint8_t> dense, std::size_t n, RecurrenceConfig config = {}) {
    if (dense.size() != n * n) throw ValidationError("dense matrix size mismatch");
    RecurrenceMatrix m(n, config);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if ((dense[i * n + j] != 0) != (dense[j * n + i] != 0)) throw ValidationError("recurrence matrix must be symmetric");
        if (dense[i * n + j]) m.set(i, j);
      }
    return m;
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t words_per_row() const noexcept { return wpr_; }
  const RecurrenceConfig& config() const noexcept { return config_; }

  bool test(std::size_t i, std::size_t j) const { return (bits_[i * wpr_ + j / 64] >> (j % 64)) & 1u; }
  void set(std::size_t i, std::size_t j) { bits_[i * wpr_ + j / 64] |= std::uint64_t{1} << (j % 64); }

  std::span<const std::uint64_t> row(std::size_t i) const { return {bits_.data() + i * wpr_, wpr_}; }
  std::span<std::uint64_t> row(std::size_t i) { return {bits_.data() + i * wpr_, wpr_}; }

  std::uint64_t count() const {
    std::uint64_t c = 0;
    for (auto w : bits_) c += static_cast<std::uint64_t>(std::popcount(w));
    return c;
  }

  std::vector<std::uint8_t> to_dense() const {
    std::vector<std::uint8_t> d(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) d[i * n_ + j] = test(i, j) ? 1 : 0;
    return d;
  }

  bool operator==(const RecurrenceMatrix& o) const { return n_ == o.n_ && bits_ == o.bits_; }

 private:
  std::size_t n_ = 0;
  std::size_t wpr_ = 0;
  std::vector<std::uint64_t> bits_;
  RecurrenceConfig config_;
};

/// Largest double s with sqrt(s) <= eps, so "s <= threshold" is exactly "sqrt(s) <= eps".
inline double squared_threshold(double eps) {
  double t = eps * eps;
  while (t > 0.0 && std::sqrt(t) > eps) t = std::nextafter(t, 0.0);
  for (;;) {
    const double up = std::nextafter(t, std::numeric_limits<double>::infinity());
    if (std::sqrt(up) <= eps)
      t = up;
    else
      break;
  }
  return t;
}

namespace detail {

/// Final assembly shared by every path. diag_hist only needs entries l >= l_min.
inline RqaMeasures assemble_measures(std::size_t n, std::uint64_t points, std::uint64_t diag_all, std::uint64_t diag_long,
                                     std::span<const std::uint64_t> diag_hist, std::size_t l_min, std::uint64_t vert_all,
                                     std::uint64_t vert_long) {
  RqaMeasures m;
  if (n == 0 || points == 0) return m;
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  m.rr = static_cast<double>(points) / n2;
  std::uint64_t lines_long = 0;
  for (std::size_t l = l_min; l < diag_hist.size(); ++l) lines_long += diag_hist[l];
  m.det = diag_all > 0 ? static_cast<double>(diag_long) / static_cast<double>(diag_all) : 0.0;
  m.lam = vert_all > 0 ? static_cast<double>(vert_long) / static_cast<double>(vert_all) : 0.0;
  if (lines_long > 0) {
    double h = 0.0;
    for (std::size_t l = l_min; l < diag_hist.size(); ++l) {
      if (diag_hist[l] == 0) continue;
      const double p = static_cast<double>(diag_hist[l]) / static_cast<double>(lines_long);
      h -= p * std::log(p);
    }
    m.entr = h;
  }
  m.ratio = m.rr > 0.0 ? m.det / m.rr : 0.0;
  return m;
}

}  // namespace detail

/// Measures from exact line counts. Empty histograms yield zeros.
inline RqaMeasures measures_from_counts(const LineCounts& c, std::size_t l_min, std::size_t v_min) {
  std::uint64_t diag_all = 0, diag_long = 0, vert_all = 0, vert_long = 0;
  for (std::size_t l = 1; l < c.diagonal.size(); ++l) {
    diag_all += l * c.diagonal[l];
    if (l >= l_min) diag_long += l * c.diagonal[l];
  }
  for (std::size_t v = 1; v < c.vertical.size(); ++v) {
    vert_all += v * c.vertical[v];
    if (v >= v_min) vert_long += v * c.vertical[v];
  }
  return detail::assemble_measures(c.n, c.points, diag_all, diag_long, c.diagonal, l_min, vert_all, vert_long);
}

namespace detail {

/// Adds the lengths of all maximal runs of ones in a packed bitset of nbits bits to hist.
inline void accumulate_runs(const std::uint64_t* words, std::size_t nbits, std::uint64_t weight,
                            std::vector<std::uint64_t>& hist) {
  if (nbits == 0) return;
  const std::size_t nwords = (nbits + 63) / 64;
  const std::uint64_t last_mask = (nbits % 64 == 0) ? ~std::uint64_t{0} : ((std::uint64_t{1} << (nbits % 64)) - 1);
  bool open = false;
  std::size_t start = 0;
  std::uint64_t prev_top = 0;  // bit 63 of the previous word
  for (std::size_t w = 0; w < nwords; ++w) {
    std::uint64_t x = words[w];
    if (w + 1 == nwords) x &= last_mask;
    std::uint64_t next = 0;
    if (w + 1 < nwords) {
      next = words[w + 1];
      if (w + 2 == nwords) next &= last_mask;
    }
    std::uint64_t starts = x & ~((x << 1) | prev_top);
    std::uint64_t ends = x & ~((x >> 1) | ((next & 1u) << 63));
    prev_top = x >> 63;
    for (;;) {
      if (!open) {
        if (!starts) break;
        start = w * 64 + static_cast<std::size_t>(std::countr_zero(starts));
        starts &= starts - 1;
        open = true;
      } else {
        if (!ends) break;
        const std::size_t end = w * 64 + static_cast<std::size_t>(std::countr_zero(ends));
        ends &= ends - 1;
        hist[end - start + 1] += weight;
        open = false;
      }
    }
  }
}

}  // namespace detail

/// Reusable per-thread buffers for the windowed recurrence computation.
///
/// Raw windows take a fast path. Coordinate m of decimated state vector i is
/// z[i*dec + m*tau]; writing m*tau = q*dec + r splits the coordinates into
/// residue classes r, and within a class coordinate m reads the lattice
/// A_r[u] = z[u*dec + r] at u = i + q. Along one diagonal k the squared
/// distance is then a sum of sliding windows over s_r[u] = (A_r[u] - A_r[u+k])^2,
/// which are evaluated with a doubling scheme in single precision. Pairs whose
/// single-precision distance falls inside a rigorous error band around the
/// threshold are recomputed exactly in double precision, coordinate by
/// coordinate, so the result is identical to the direct definition.
class RqaWorkspace {
 public:
  /// Exact line counts for one raw window: z-score, embed, decimate, threshold.
  /// Throws DegenerateSignal for zero-variance windows.
  LineCounts window_counts(std::span<const double> window, const EmbeddingConfig& emb, const RecurrenceConfig& cfg) {
    prepare(window, emb, cfg);
    threshold_lattice(cfg);
    return count_lines();
  }

  RqaMeasures window_measures(std::span<const double> window, const EmbeddingConfig& emb, const RecurrenceConfig& cfg) {
    return measures_from_counts(window_counts(window, emb, cfg), cfg.l_min, cfg.v_min);
  }

  RecurrenceMatrix window_matrix(std::span<const double> window, const EmbeddingConfig& emb, const RecurrenceConfig& cfg) {
    prepare(window, emb, cfg);
    threshold_lattice(cfg);
    return to_matrix(cfg);
  }

  /// Thresholds pre-built state vectors (no rescaling), keeping every
  /// cfg.decimation-th row.
  RecurrenceMatrix vectors_matrix(const StateVectors& states, const RecurrenceConfig& cfg) {
    cfg.validate();
    const std::size_t n = (states.rows + cfg.decimation - 1) / cfg.decimation;
    if (n < 2) throw ValidationError("recurrence matrix needs at least 2 state vectors");
    set_size(n);
    dim_ = states.dim();
    stride_ = (n_ + 64 + 7) / 8 * 8;
    comp_.assign(dim_ * stride_, 0.0);
    for (std::size_t m = 0; m < dim_; ++m) {
      double* c = comp_.data() + m * stride_;
      for (std::size_t i = 0; i < n_; ++i) c[i] = states(i * cfg.decimation, m);
    }
    threshold_direct(cfg);
    return to_matrix(cfg);
  }

  /// Line counts of an arbitrary symmetric matrix.
  LineCounts matrix_counts(const RecurrenceMatrix& m) {
    set_size(m.size());
    std::fill(diag_.begin(), diag_.end(), 0);
    for (std::size_t i = 0; i < n_; ++i) {
      auto r = m.row(i);
      // Set bits j >= i go to diagonal j - i at position i.
      for (std::size_t w = i / 64; w < wpr_; ++w) {
        std::uint64_t x = r[w];
        if (w == i / 64) x &= ~std::uint64_t{0} << (i % 64);
        while (x) {
          const std::size_t j = w * 64 + static_cast<std::size_t>(std::countr_zero(x));
          x &= x - 1;
          const std::size_t k = j - i;
          diag_[diag_offset_[k] + i / 64] |= std::uint64_t{1} << (i % 64);
        }
      }
    }
    return count_lines();
  }

  std::size_t size() const noexcept { return n_; }

  /// Pairs resolved by the exact double-precision check in the last window.
  std::size_t exact_checks() const noexcept { return exact_checks_; }

 private:
  struct CoordClass {
    std::size_t r = 0;   // residue of m*tau modulo the decimation
    std::size_t q0 = 0;  // lattice offset of the first coordinate in the class
    std::size_t g = 1;   // lattice step between consecutive coordinates
    std::size_t c = 0;   // number of coordinates
    std::size_t base = 0;  // start of A_r in lattice_
  };

  void set_size(std::size_t n) {
    if (n == n_ && !diag_offset_.empty()) return;
    n_ = n;
    wpr_ = (n + 63) / 64;
    diag_offset_.assign(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k) diag_offset_[k + 1] = diag_offset_[k] + (n - k + 63) / 64;
    diag_.assign(diag_offset_[n], 0);
  }

  void prepare(std::span<const double> window, const EmbeddingConfig& emb, const RecurrenceConfig& cfg) {
    emb.validate();
    cfg.validate();
    const std::size_t len = window.size();
    if (len < emb.span())
      throw ValidationError("window of " + std::to_string(len) + " samples too short for embedding; need at least " +
                            std::to_string(emb.span()));
    const std::size_t n = (len - emb.span()) / cfg.decimation + 1;
    if (n < 2) throw ValidationError("recurrence matrix needs at least 2 state vectors");
    const auto ms = mean_std(window);
    if (!(ms.stddev > 0.0) || !std::isfinite(ms.stddev)) throw DegenerateSignal("zero-variance window");
    z_.resize(len);
    zmax_ = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      z_[i] = (window[i] - ms.mean) / ms.stddev;
      zmax_ = std::max(zmax_, std::fabs(z_[i]));
    }
    set_size(n);
    dim_ = emb.dimension;
    tau_ = emb.delay_samples;
    dec_ = cfg.decimation;

    classes_.clear();
    for (std::size_t m = 0; m < dim_; ++m) {
      const std::size_t off = m * tau_;
      const std::size_t r = off % dec_, q = off / dec_;
      auto it = std::find_if(classes_.begin(), classes_.end(), [&](const CoordClass& c) { return c.r == r; });
      if (it == classes_.end()) {
        classes_.push_back({r, q, 1, 1, 0});
      } else {
        if (it->c == 1) it->g = q - it->q0;
        ++it->c;
      }
    }
    std::size_t total = 0, widest = 0;
    for (auto& c : classes_) {
      c.base = total;
      total += n_ + c.q0 + (c.c - 1) * c.g + 64;
      widest = std::max(widest, 64 + (c.c - 1) * c.g);
    }
    lattice_.assign(total, 0.0f);
    for (const auto& c : classes_) {
      float* a = lattice_.data() + c.base;
      const std::size_t count = n_ + c.q0 + (c.c - 1) * c.g + 64;
      for (std::size_t u = 0; u < count; ++u) {
        const std::size_t idx = u * dec_ + c.r;
        if (idx >= len) break;
        a[u] = static_cast<float>(z_[idx]);
      }
    }
    int levels = 1;
    while ((std::size_t{1} << levels) <= dim_) ++levels;
    levels_.assign(static_cast<std::size_t>(levels) * widest, 0.0f);
    level_stride_ = widest;
  }

  void threshold_lattice(const RecurrenceConfig& cfg) {
    const double thr = squared_threshold(cfg.epsilon);
    // Rounding the z-scores and the arithmetic to single precision perturbs a
    // term by at most u*(21 Z^2 + 8 Z + 1) for |z| <= Z; the sum of d terms
    // adds a relative (d - 1) u. The band is twice that, which also absorbs
    // the rounding of the double-precision reference.
    const double u = 0x1.0p-24;
    const double d = static_cast<double>(dim_);
    const double abs_band = 2.0 * d * u * (21.0 * zmax_ * zmax_ + 8.0 * zmax_ + 1.0);
    const double rel_band = 2.0 * d * u;
    const float lo = static_cast<float>(std::nextafter(thr * (1.0 - rel_band) - abs_band, 0.0));
    const float hi = static_cast<float>(thr * (1.0 + rel_band) + abs_band);
    exact_checks_ = 0;

    std::fill(diag_.begin(), diag_.end(), 0);
    const std::size_t first_k = cfg.theiler_window > 0 ? cfg.theiler_window + 1 : 0;
    for (std::size_t k = first_k; k < n_; ++k) {
      std::uint64_t* out = diag_.data() + diag_offset_[k];
      const std::size_t len = n_ - k;
      if (k == 0) {
        fill_main_diagonal(out);
        continue;
      }
      for (std::size_t i0 = 0; i0 < len; i0 += 64) {
        const std::size_t cnt = std::min<std::size_t>(64, len - i0);
        alignas(64) float acc[64];
        lattice_tile(i0, k, acc);
        std::uint64_t ones = 0, unsure = 0;
        for (std::size_t t = 0; t < 64; ++t) {
          ones |= static_cast<std::uint64_t>(acc[t] <= lo) << t;
          unsure |= static_cast<std::uint64_t>(acc[t] <= hi) << t;
        }
        const std::uint64_t valid = cnt == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << cnt) - 1);
        ones &= valid;
        unsure &= valid & ~ones;
        while (unsure) {
          const std::size_t t = static_cast<std::size_t>(std::countr_zero(unsure));
          unsure &= unsure - 1;
          ++exact_checks_;
          if (exact_distance2(i0 + t, i0 + t + k) <= thr) ones |= std::uint64_t{1} << t;
        }
        out[i0 / 64] = ones;
      }
    }
  }

  // Single-precision squared distances of pairs (i0 + t, i0 + t + k), t < 64.
  void lattice_tile(std::size_t i0, std::size_t k, float* __restrict acc) {
    for (std::size_t t = 0; t < 64; ++t) acc[t] = 0.0f;
    for (const auto& cls : classes_) {
      const float* __restrict a = lattice_.data() + cls.base + i0 + cls.q0;
      const float* __restrict b = a + k;
      const std::size_t g = cls.g;
      const std::size_t width = 64 + (cls.c - 1) * g;
      float* __restrict s = levels_.data();
      for (std::size_t t = 0; t < width; ++t) {
        const float diff = a[t] - b[t];
        s[t] = diff * diff;
      }
      // Level l holds sums of 2^l terms spaced g apart.
      std::size_t span = 1, valid = width;
      int top = 0;
      while (2 * span <= cls.c) {
        const float* __restrict prev = levels_.data() + static_cast<std::size_t>(top) * level_stride_;
        float* __restrict next = levels_.data() + static_cast<std::size_t>(top + 1) * level_stride_;
        const std::size_t shift = span * g;
        valid -= shift;
        for (std::size_t t = 0; t < valid; ++t) next[t] = prev[t] + prev[t + shift];
        span *= 2;
        ++top;
      }
      std::size_t offset = 0;
      for (int l = top; l >= 0; --l) {
        if (!((cls.c >> l) & 1u)) continue;
        const float* __restrict lv = levels_.data() + static_cast<std::size_t>(l) * level_stride_ + offset;
        for (std::size_t t = 0; t < 64; ++t) acc[t] += lv[t];
        offset += (std::size_t{1} << l) * g;
      }
    }
  }

  double exact_distance2(std::size_t i, std::size_t j) const {
    double s = 0.0;
    const double* a = z_.data() + i * dec_;
    const double* b = z_.data() + j * dec_;
    for (std::size_t m = 0; m < dim_; ++m) {
      const double diff = a[m * tau_] - b[m * tau_];
      s += diff * diff;
    }
    return s;
  }

  void fill_main_diagonal(std::uint64_t* out) const {
    for (std::size_t w = 0; w * 64 < n_; ++w) {
      const std::size_t cnt = std::min<std::size_t>(64, n_ - w * 64);
      out[w] = cnt == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << cnt) - 1);
    }
  }

  // Direct double-precision kernel for arbitrary state vectors.
  void threshold_direct(const RecurrenceConfig& cfg) {
    const double thr = squared_threshold(cfg.epsilon);
    std::fill(diag_.begin(), diag_.end(), 0);
    const std::size_t first_k = cfg.theiler_window > 0 ? cfg.theiler_window + 1 : 0;
    for (std::size_t k = first_k; k < n_; ++k) {
      std::uint64_t* out = diag_.data() + diag_offset_[k];
      const std::size_t len = n_ - k;
      if (k == 0) {
        fill_main_diagonal(out);
        continue;
      }
      for (std::size_t i0 = 0; i0 < len; i0 += 64) {
        const std::size_t cnt = std::min<std::size_t>(64, len - i0);
        alignas(64) double acc[64] = {};
        for (std::size_t m = 0; m < dim_; ++m) {
          const double* __restrict a = comp_.data() + m * stride_ + i0;
          const double* __restrict b = a + k;
          for (std::size_t t = 0; t < 64; ++t) {
            const double diff = a[t] - b[t];
            acc[t] += diff * diff;
          }
        }
        std::uint64_t bits = 0;
        for (std::size_t t = 0; t < cnt; ++t) bits |= static_cast<std::uint64_t>(acc[t] <= thr) << t;
        out[i0 / 64] = bits;
      }
    }
  }

  RecurrenceMatrix to_matrix(const RecurrenceConfig& cfg) const {
    RecurrenceMatrix m(n_, cfg);
    for (std::size_t k = 0; k < n_; ++k) {
      const std::uint64_t* d = diag_.data() + diag_offset_[k];
      for (std::size_t w = 0; w * 64 < n_ - k; ++w) {
        std::uint64_t x = d[w];
        while (x) {
          const std::size_t i = w * 64 + static_cast<std::size_t>(std::countr_zero(x));
          x &= x - 1;
          m.set(i, i + k);
          m.set(i + k, i);
        }
      }
    }
    return m;
  }

  // Word w of the column-aligned view of diagonal k: bit b is R[j - k][j] for
  // column j = 64 w + b (zero where j < k).
  std::uint64_t column_word(std::size_t k, std::size_t w) const {
    const std::uint64_t* d = diag_.data() + diag_offset_[k];
    const std::size_t words = diag_offset_[k + 1] - diag_offset_[k];
    const std::ptrdiff_t o = static_cast<std::ptrdiff_t>(64 * w) - static_cast<std::ptrdiff_t>(k);
    if (o < 0) return d[0] << static_cast<unsigned>(-o);
    const std::size_t lw = static_cast<std::size_t>(o) / 64, sh = static_cast<std::size_t>(o) % 64;
    if (lw >= words) return 0;
    std::uint64_t x = d[lw] >> sh;
    if (sh != 0 && lw + 1 < words) x |= d[lw + 1] << (64 - sh);
    return x;
  }

  LineCounts count_lines() const {
    LineCounts c;
    c.n = n_;
    c.diagonal.assign(n_ + 1, 0);
    c.vertical.assign(n_ + 1, 0);
    for (std::size_t k = 0; k < n_; ++k) {
      const std::uint64_t weight = k == 0 ? 1 : 2;
      const std::uint64_t* d = diag_.data() + diag_offset_[k];
      const std::size_t words = diag_offset_[k + 1] - diag_offset_[k];
      std::uint64_t pop = 0;
      for (std::size_t w = 0; w < words; ++w) pop += static_cast<std::uint64_t>(std::popcount(d[w]));
      c.points += weight * pop;
      if (pop) detail::accumulate_runs(d, n_ - k, weight, c.diagonal);
    }
    count_vertical(c.vertical);
    return c;
  }

  // Column j of the full matrix, top to bottom, reads R[j-k][j] for
  // k = j, ..., 1, then R[j][j], then R[j+k][j] = D_k[j] for k = 1, 2, ....
  // Sixty-four columns advance together; only run boundaries cost extra.
  void count_vertical(std::vector<std::uint64_t>& hist) const {
    std::uint32_t start[64];
    for (std::size_t w = 0; w < wpr_; ++w) {
      const std::size_t j0 = 64 * w;
      std::uint64_t prev = 0;
      std::uint32_t step = 0;
      auto feed = [&](std::uint64_t x) {
        std::uint64_t ends = prev & ~x;
        while (ends) {
          const int b = std::countr_zero(ends);
          ends &= ends - 1;
          hist[step - start[b]] += 1;
        }
        std::uint64_t starts = x & ~prev;
        while (starts) {
          const int b = std::countr_zero(starts);
          starts &= starts - 1;
          start[b] = step;
        }
        prev = x;
        ++step;
      };
      const std::size_t kmax = std::min(n_ - 1, j0 + 63);
      for (std::size_t k = kmax; k >= 1; --k) feed(column_word(k, w));
      feed(diag_[diag_offset_[0] + w]);
      for (std::size_t k = 1; k < n_ && j0 + k < n_; ++k) feed(diag_[diag_offset_[k] + w]);
      feed(0);
    }
  }

  std::vector<double> z_;
  double zmax_ = 0.0;
  std::size_t dim_ = 0;
  std::size_t tau_ = 1;
  std::size_t dec_ = 1;
  std::vector<CoordClass> classes_;
  std::vector<float> lattice_;
  std::vector<float> levels_;
  std::size_t level_stride_ = 0;
  std::size_t exact_checks_ = 0;
  std::vector<double> comp_;
  std::size_t stride_ = 0;
  std::size_t n_ = 0;
  std::size_t wpr_ = 0;
  std::vector<std::size_t> diag_offset_;
  std::vector<std::uint64_t> diag_;
};

/// Recurrence matrix of a raw window (z-scored, embedded, decimated).
inline RecurrenceMatrix recurrence_matrix(std::span<const double> window, const EmbeddingConfig& emb,
                                          const RecurrenceConfig& cfg = {}) {
  RqaWorkspace ws;
  return ws.window_matrix(window, emb, cfg);
}

/// Recurrence matrix of already-built state vectors, with no rescaling.
inline RecurrenceMatrix recurrence_matrix(const StateVectors& states, const RecurrenceConfig& cfg) {
  RqaWorkspace ws;
  return ws.vectors_matrix(states, cfg);
}

inline LineCounts line_counts(const RecurrenceMatrix& m) {
  RqaWorkspace ws;
  return ws.matrix_counts(m);
}

inline RqaMeasures rqa_measures(const RecurrenceMatrix& m) {
  return measures_from_counts(line_counts(m), m.config().l_min, m.config().v_min);
}

inline RqaMeasures window_measures(std::span<const double> window, const EmbeddingConfig& emb,
                                   const RecurrenceConfig& cfg = {}) {
  RqaWorkspace ws;
  return ws.window_measures(window, emb, cfg);
}

/// Binary PBM (P4); a recurrence is a black pixel.
inline void write_pbm(std::ostream& os, const RecurrenceMatrix& m) {
  const std::size_t n = m.size();
  os << "P4\n" << n << ' ' << n << '\n';
  std::vector<unsigned char> line((n + 7) / 8);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(line.begin(), line.end(), 0);
    for (std::size_t j = 0; j < n; ++j)
      if (m.test(i, j)) line[j / 8] |= static_cast<unsigned char>(0x80u >> (j % 8));
    os.write(reinterpret_cast<const char*>(line.data()), static_cast<std::streamsize>(line.size()));
  }
}

}  // namespace rqews
