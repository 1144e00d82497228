#pragma once

// RQA measures for a run of windows that advance by a fixed stride.
//
// Consecutive windows share most of their state vectors, and z-scoring only
// rescales pair distances: |z_i - z_j|^2 = |x_i - x_j|^2 / sigma^2. Each raw
// squared distance is computed once, in single precision, and stored as a
// 16-bit monotone code (the high bits of its float pattern) in a ring per
// diagonal. A window then compares the stored codes against its own
// threshold. Codes inside a rigorous error band around the threshold are
// settled by the exact double-precision rule, so the results equal those of
// RqaWorkspace bit for bit.
//
// The measures need no vertical histogram: LAM only counts points on
// vertical lines of length >= v_min. Column j of the symmetric matrix is
// its upper part (read along the diagonals with a shift of one bit per
// diagonal), the main-diagonal point, and its lower part (the same bit
// position on every diagonal). Both parts are counted with word-parallel
// sliding ANDs; the run through the main diagonal is patched per column.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <vector>

#if defined(__AVX512BW__)
#include <immintrin.h>
#endif

#include "rqews/embedding.hpp"
#include "rqews/error.hpp"
#include "rqews/numeric.hpp"
#include "rqews/rqa.hpp"

namespace rqews {

class SlidingRqa {
 public:
  /// Largest matrix the code arena is sized for (about 2 n^2 / 2 bytes).
  static constexpr std::size_t kMaxVectors = 8192;

  /// True when windows of this shape fit the code arena.
  static bool fits(const EmbeddingConfig& emb, const RecurrenceConfig& cfg, std::size_t window) {
    if (cfg.decimation == 0 || window < emb.span()) return false;
    const std::size_t n = (window - emb.span()) / cfg.decimation + 1;
    return n >= 2 && n <= kMaxVectors;
  }

  /// window and stride in samples. A stride that is not a multiple of the
  /// decimation still works, every window is then computed from scratch.
  SlidingRqa(const EmbeddingConfig& emb, const RecurrenceConfig& cfg, std::size_t window, std::size_t stride)
      : cfg_(cfg), len_(window), stride_(stride) {
    emb.validate();
    cfg.validate();
    if (window < emb.span())
      throw ValidationError("window of " + std::to_string(window) + " samples too short for embedding; need at least " +
                            std::to_string(emb.span()));
    n_ = (window - emb.span()) / cfg.decimation + 1;
    if (n_ < 2) throw ValidationError("recurrence matrix needs at least 2 state vectors");
    dim_ = emb.dimension;
    tau_ = emb.delay_samples;
    dec_ = cfg.decimation;
    if (stride > 0 && stride % dec_ == 0 && stride / dec_ < n_) step_ = stride / dec_;
    thr_ = squared_threshold(cfg.epsilon);
    wpr_ = (n_ + 63) / 64;
    first_k_ = cfg.theiler_window > 0 ? cfg.theiler_window + 1 : 1;

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
      widest = std::max(widest, (c.c - 1) * c.g);
    }
    lattice_.assign(total, 0.0f);
    int levels = 1;
    while ((std::size_t{1} << levels) <= dim_) ++levels;
    level_stride_ = kChunk + widest + 64;
    levels_.assign(static_cast<std::size_t>(levels) * level_stride_, 0.0f);
    dist_.assign(kChunk, 0.0f);
    code_buf_.assign(kChunk, 0);

    ring_off_.assign(n_ + 1, 0);
    for (std::size_t k = 1; k < n_; ++k) ring_off_[k + 1] = ring_off_[k] + (k >= first_k_ ? n_ - k + 64 : 0);
    codes_.assign(ring_off_[n_], 0);

    row_.assign(wpr_ + 1, 0);
    col_.assign(wpr_, 0);
    const std::size_t v = cfg.v_min;
    al_hist_.assign((v - 1) * wpr_, 0);
    co_hist_.assign((v - 1) * wpr_, 0);
    al_prev_.assign(wpr_, 0);
    co_prev_.assign(wpr_, 0);
    head_rows_.assign(v * wpr_, 0);
    diag_hist_.assign(n_ + 1, 0);
  }

  /// Measures of one window; throws DegenerateSignal for zero-variance windows.
  RqaMeasures measures(std::span<const double> window) {
    if (window.size() != len_) throw ValidationError("window length differs from the configured length");
    const auto ms = mean_std(window);
    if (!(ms.stddev > 0.0) || !std::isfinite(ms.stddev)) {
      warm_ = false;
      throw DegenerateSignal("zero-variance window");
    }
    window_ = window;
    z_ready_ = false;
    mean_ = ms.mean;
    sd_ = ms.stddev;

    const bool slide = warm_ && step_ > 0 &&
                       std::memcmp(window.data(), prev_.data() + stride_, (len_ - stride_) * sizeof(double)) == 0;
    Band band;
    bool ok = false;
    if (slide) {
      origin_ += step_;
      track_range(window);
      band = make_band();
      if (band.usable) {
        build_lattice(window);
        fill_codes(n_ - step_);
        ok = true;
      }
    }
    if (!ok) {
      cold_start(window);
      band = make_band();
      if (!band.usable) {
        warm_ = false;
        prev_.clear();
        RqaWorkspace ws;
        return ws.window_measures(window, EmbeddingConfig{tau_, dim_}, cfg_);
      }
    }
    prev_.assign(window.begin(), window.end());
    warm_ = true;
    return threshold_and_count(band);
  }

  /// Windows that had to be computed without reuse.
  std::size_t cold_starts() const noexcept { return cold_starts_; }
  /// Pairs settled by the exact rule in the last window.
  std::size_t exact_checks() const noexcept { return exact_checks_; }

 private:
  static constexpr std::size_t kChunk = 1024;

  struct CoordClass {
    std::size_t r = 0;
    std::size_t q0 = 0;
    std::size_t g = 1;
    std::size_t c = 0;
    std::size_t base = 0;
  };

  struct Band {
    bool usable = false;
    std::uint16_t lo = 0;  // codes below are recurrences
    std::uint16_t hi = 0;  // codes above are not
  };

  // Bound on |computed - exact| for a sum of dim squared differences whose
  // operands each carry an absolute error of at most e/2, at exact value d2.
  double sum_error(double d2, double e, double unit) const {
    const double n = static_cast<double>(dim_ + 2);
    const double gamma = n * unit / (1.0 - n * unit);
    const double dd = static_cast<double>(dim_);
    return ((2.0 * e * std::sqrt(dd * d2) + dd * e * e) * (1.0 + gamma) + gamma * d2) * 1.01;
  }

  std::int64_t code_of(float v) const {
    const auto b = static_cast<std::int64_t>(std::bit_cast<std::uint32_t>(v) >> 12);
    return std::clamp<std::int64_t>(b - base_, 0, 65535);
  }

  Band make_band() const {
    Band b;
    const double ud = 0x1.0p-53, uf = 0x1.0p-24;
    double zmax = 0.0;
    for (double x : window_) zmax = std::max(zmax, std::fabs(x - mean_));
    zmax /= sd_;
    // Exact rule in z units: decided when the true distance is clear of thr by err_z.
    const double ez = 4.001 * ud * zmax;
    const double lo_z = thr_ - sum_error(thr_, ez, ud);
    const double err2 = sum_error(2.0 * thr_, ez, ud);
    if (!(lo_z > 0.0) || !(err2 <= thr_)) return b;
    const double hi_z = thr_ + err2;
    const double var = sd_ * sd_;
    const double lo_raw = lo_z * var * (1.0 - 1e-12), hi_raw = hi_z * var * (1.0 + 1e-12);
    // Stored single-precision distances against the raw thresholds.
    const double ef = 2.0 * xmax_ * (uf + 2.0 * ud) * 1.0001;
    const double n = static_cast<double>(dim_ + 2);
    const double gamma = n * uf / (1.0 - n * uf);
    if (!(ef * std::sqrt(static_cast<double>(dim_) / lo_raw) * (1.0 + gamma) + gamma < 0.5)) return b;
    const double lo = (lo_raw - sum_error(lo_raw, ef, uf)) * (1.0 - 1e-12);
    const double hi = (hi_raw + sum_error(hi_raw, ef, uf)) * (1.0 + 1e-12);
    if (!(lo > 0.0) || !(hi < 1e37)) return b;
    float lf = static_cast<float>(lo);
    if (static_cast<double>(lf) > lo) lf = std::nextafter(lf, 0.0f);
    float hf = static_cast<float>(hi);
    if (static_cast<double>(hf) < hi) hf = std::nextafter(hf, std::numeric_limits<float>::infinity());
    const auto cl = code_of(lf), ch = code_of(hf);
    if (cl <= 0 || ch >= 65535) return b;
    b.usable = true;
    b.lo = static_cast<std::uint16_t>(cl);
    b.hi = static_cast<std::uint16_t>(ch);
    return b;
  }

  void track_range(std::span<const double> window) {
    for (double x : window) xmax_ = std::max(xmax_, std::fabs(x - center_));
  }

  void cold_start(std::span<const double> window) {
    ++cold_starts_;
    center_ = mean_;
    xmax_ = 0.0;
    track_range(window);
    const float t0 = static_cast<float>(thr_ * sd_ * sd_);
    base_ = static_cast<std::int64_t>(std::bit_cast<std::uint32_t>(t0) >> 12) - 32768;
    origin_ = 0;
    build_lattice(window);
    fill_codes(0);
  }

  void build_lattice(std::span<const double> window) {
    for (const auto& c : classes_) {
      float* a = lattice_.data() + c.base;
      const std::size_t count = n_ + c.q0 + (c.c - 1) * c.g + 64;
      for (std::size_t u = 0; u < count; ++u) {
        const std::size_t idx = u * dec_ + c.r;
        a[u] = idx < len_ ? static_cast<float>(window[idx] - center_) : 0.0f;
      }
    }
  }

  // Codes for every pair (i, i + k) with i + k >= from, all diagonals.
  void fill_codes(std::size_t from) {
    for (std::size_t k = first_k_; k < n_; ++k) {
      const std::size_t cap = n_ - k;
      const std::size_t i_lo = from > k ? from - k : 0;
      std::uint16_t* ring = codes_.data() + ring_off_[k];
      std::size_t idx = origin_ % cap + i_lo;
      if (idx >= cap) idx -= cap;
      const std::size_t cnt = cap - i_lo;
      for (std::size_t done = 0; done < cnt;) {
        const std::size_t m = std::min(kChunk, cnt - done);
        distances(k, i_lo + done, m);
        const auto base = static_cast<std::int32_t>(base_);
        for (std::size_t t = 0; t < m; ++t) code_buf_[t] = to_code(dist_[t], base);
        std::size_t at = idx + done;
        if (at >= cap) at -= cap;
        const std::size_t part = std::min(m, cap - at);
        std::memcpy(ring + at, code_buf_.data(), part * sizeof(std::uint16_t));
        std::memcpy(ring, code_buf_.data() + part, (m - part) * sizeof(std::uint16_t));
        done += m;
      }
      // Mirror the ring head past its end so 64 codes can be read from any index.
      if (idx < 64 || idx + cnt > cap) std::memcpy(ring + cap, ring, std::min<std::size_t>(64, cap) * sizeof(std::uint16_t));
    }
  }

  static std::uint16_t to_code(float d, std::int32_t base) {
    const auto b = static_cast<std::int32_t>(std::bit_cast<std::uint32_t>(d) >> 12) - base;
    return static_cast<std::uint16_t>(std::clamp<std::int32_t>(b, 0, 65535));
  }

  // acc[t] += s[t] + s[t + 1] + ... + s[t + C - 1]
  template <std::size_t C>
  static void add_run(float* __restrict acc, const float* __restrict s, std::size_t cnt) {
    for (std::size_t t = 0; t < cnt; ++t) {
      float x = s[t];
      for (std::size_t q = 1; q < C; ++q) x += s[t + q];
      acc[t] += x;
    }
  }

  static bool add_run(float* acc, const float* s, std::size_t c, std::size_t cnt) {
    switch (c) {
      case 1: add_run<1>(acc, s, cnt); return true;
      case 2: add_run<2>(acc, s, cnt); return true;
      case 3: add_run<3>(acc, s, cnt); return true;
      case 4: add_run<4>(acc, s, cnt); return true;
      case 5: add_run<5>(acc, s, cnt); return true;
      case 6: add_run<6>(acc, s, cnt); return true;
      case 7: add_run<7>(acc, s, cnt); return true;
      case 8: add_run<8>(acc, s, cnt); return true;
      case 9: add_run<9>(acc, s, cnt); return true;
      case 10: add_run<10>(acc, s, cnt); return true;
      case 11: add_run<11>(acc, s, cnt); return true;
      case 12: add_run<12>(acc, s, cnt); return true;
      default: return false;
    }
  }

  // Single-precision raw squared distances of pairs (i0 + t, i0 + t + k), t < cnt.
  void distances(std::size_t k, std::size_t i0, std::size_t cnt) {
    float* __restrict acc = dist_.data();
    for (std::size_t t = 0; t < cnt; ++t) acc[t] = 0.0f;
    for (const auto& cls : classes_) {
      const float* __restrict a = lattice_.data() + cls.base + i0 + cls.q0;
      const float* __restrict b = a + k;
      const std::size_t g = cls.g;
      const std::size_t width = cnt + (cls.c - 1) * g;
      float* __restrict s = levels_.data();
      for (std::size_t t = 0; t < width; ++t) {
        const float diff = a[t] - b[t];
        s[t] = diff * diff;
      }
      if (g == 1 && add_run(acc, s, cls.c, cnt)) continue;
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
        for (std::size_t t = 0; t < cnt; ++t) acc[t] += lv[t];
        offset += (std::size_t{1} << l) * g;
      }
    }
  }

  double exact_distance2(std::size_t i, std::size_t j) {
    if (!z_ready_) {
      z_.resize(len_);
      for (std::size_t t = 0; t < len_; ++t) z_[t] = (window_[t] - mean_) / sd_;
      z_ready_ = true;
    }
    double s = 0.0;
    const double* a = z_.data() + i * dec_;
    const double* b = z_.data() + j * dec_;
    for (std::size_t m = 0; m < dim_; ++m) {
      const double diff = a[m * tau_] - b[m * tau_];
      s += diff * diff;
    }
    return s;
  }

  // Bits of 64 consecutive codes: below lo, and within [lo, hi].
  static void classify(const std::uint16_t* c, std::uint16_t lo, std::uint16_t hi, std::uint64_t& below,
                       std::uint64_t& unsure) {
#if defined(__AVX512BW__)
    const __m512i vlo = _mm512_set1_epi16(static_cast<short>(lo));
    const __m512i vhi = _mm512_set1_epi16(static_cast<short>(hi));
    const __m512i x0 = _mm512_loadu_si512(c);
    const __m512i x1 = _mm512_loadu_si512(c + 32);
    const std::uint64_t b0 = _mm512_cmplt_epu16_mask(x0, vlo), b1 = _mm512_cmplt_epu16_mask(x1, vlo);
    const std::uint64_t h0 = _mm512_cmple_epu16_mask(x0, vhi), h1 = _mm512_cmple_epu16_mask(x1, vhi);
    below = b0 | (b1 << 32);
    unsure = (h0 | (h1 << 32)) & ~below;
#else
    below = 0;
    unsure = 0;
    for (std::size_t t = 0; t < 64; ++t) {
      below |= static_cast<std::uint64_t>(c[t] < lo) << t;
      unsure |= static_cast<std::uint64_t>(c[t] >= lo && c[t] <= hi) << t;
    }
#endif
  }

  // Points on sequences of >= v consecutive ones, fed one row per step over
  // words [lo, hi); hist holds the previous v - 1 rows, prev the previous
  // mask of v ones. Words outside the range must stay zero from here on.
  static std::uint64_t feed_long(const std::uint64_t* row, std::uint64_t* hist, std::size_t& head, std::uint64_t* prev,
                                 std::size_t words, std::size_t lo, std::size_t hi, std::size_t v) {
    std::uint64_t fresh = 0, cont = 0;
    std::uint64_t* dst = hist + head * words;
    if (v == 2) {
      for (std::size_t i = lo; i < hi; ++i) {
        const std::uint64_t x = row[i] & dst[i];
        fresh += static_cast<std::uint64_t>(std::popcount(x & ~prev[i]));
        cont += static_cast<std::uint64_t>(std::popcount(x & prev[i]));
        prev[i] = x;
        dst[i] = row[i];
      }
    } else {
      for (std::size_t i = lo; i < hi; ++i) {
        std::uint64_t x = row[i];
        for (std::size_t r = 0; r + 1 < v; ++r) x &= hist[r * words + i];
        fresh += static_cast<std::uint64_t>(std::popcount(x & ~prev[i]));
        cont += static_cast<std::uint64_t>(std::popcount(x & prev[i]));
        prev[i] = x;
        dst[i] = row[i];
      }
    }
    head = (head + 1) % (v - 1);
    return v * fresh + cont;
  }

  // Runs of length >= 2 in a packed bitset (zero past its end), added to the
  // histogram with the given weight. Starts and ends alternate, so they pair up in order.
  void long_runs(const std::uint64_t* words, std::size_t nwords, std::uint64_t weight) {
    std::uint64_t prev_top = 0;
    std::size_t open_at = 0;
    bool open = false;
    for (std::size_t w = 0; w < nwords; ++w) {
      const std::uint64_t x = words[w];
      if (!x) {
        prev_top = 0;
        continue;
      }
      const std::uint64_t next = words[w + 1];
      std::uint64_t starts = x & ~((x << 1) | prev_top);
      std::uint64_t ends = x & ~((x >> 1) | (next << 63));
      const std::uint64_t single = starts & ends;
      starts ^= single;
      ends ^= single;
      prev_top = x >> 63;
      const std::size_t base = 64 * w;
      if (open && ends) {
        diag_hist_[base + static_cast<std::size_t>(std::countr_zero(ends)) - open_at + 1] += weight;
        ends &= ends - 1;
        open = false;
      }
      while (starts) {
        const auto s0 = static_cast<std::size_t>(std::countr_zero(starts));
        starts &= starts - 1;
        if (!ends) {
          open_at = base + s0;
          open = true;
          break;
        }
        diag_hist_[static_cast<std::size_t>(std::countr_zero(ends)) - s0 + 1] += weight;
        ends &= ends - 1;
      }
    }
  }

  RqaMeasures threshold_and_count(const Band& band) {
    exact_checks_ = 0;
    std::fill(diag_hist_.begin(), diag_hist_.end(), 0);
    std::fill(al_hist_.begin(), al_hist_.end(), 0);
    std::fill(co_hist_.begin(), co_hist_.end(), 0);
    std::fill(al_prev_.begin(), al_prev_.end(), 0);
    std::fill(co_prev_.begin(), co_prev_.end(), 0);
    std::fill(head_rows_.begin(), head_rows_.end(), 0);
    std::size_t al_head = 0, co_head = 0;
    const std::size_t v = cfg_.v_min;
    const bool main_diag = cfg_.theiler_window == 0;

    std::uint64_t points = main_diag ? n_ : 0;
    std::uint64_t diag_long = 0, vert_long = 0;
    if (main_diag) diag_hist_[n_] += 1;
    const std::uint16_t lo = band.lo, hi = band.hi;
    for (std::size_t k = first_k_; k < n_; ++k) {
      const std::size_t cap = n_ - k;
      const std::uint16_t* ring = codes_.data() + ring_off_[k];
      const std::size_t start = origin_ % cap;
      const std::size_t words = (cap + 63) / 64;
      std::uint64_t pop = 0;
      // The next diagonal starts somewhere else; fetch it alongside this one.
      const bool ahead = k + 1 < n_;
      const std::uint16_t* next_ring = ahead ? codes_.data() + ring_off_[k + 1] : ring;
      const std::size_t next_cap = ahead ? cap - 1 : cap;
      const std::size_t next_start = ahead ? origin_ % next_cap : 0;
      for (std::size_t w = 0; w < words; ++w) {
        std::size_t idx = start + 64 * w;
        if (idx >= cap) idx -= cap;
        if (ahead) {
          std::size_t nidx = next_start + 64 * w;
          if (nidx >= next_cap) nidx -= next_cap;
          __builtin_prefetch(next_ring + nidx, 0, 2);
          __builtin_prefetch(next_ring + nidx + 32, 0, 2);
        }
        std::uint64_t below, unsure;
        classify(ring + idx, lo, hi, below, unsure);
        const std::size_t cnt = std::min<std::size_t>(64, cap - 64 * w);
        const std::uint64_t valid = cnt == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << cnt) - 1);
        below &= valid;
        unsure &= valid;
        while (unsure) {
          const std::size_t t = static_cast<std::size_t>(std::countr_zero(unsure));
          unsure &= unsure - 1;
          ++exact_checks_;
          const std::size_t i = 64 * w + t;
          if (exact_distance2(i, i + k) <= thr_) below |= std::uint64_t{1} << t;
        }
        row_[w] = below;
        pop += static_cast<std::uint64_t>(std::popcount(below));
      }
      for (std::size_t w = words; w < wpr_; ++w) row_[w] = 0;
      points += 2 * pop;
      if (pop) long_runs(row_.data(), words, 2);

      // Lower parts of the columns: same position on every diagonal.
      vert_long += feed_long(row_.data(), al_hist_.data(), al_head, al_prev_.data(), wpr_, 0, words, v);
      // Upper parts: diagonal k shifted up by k bits.
      const std::size_t q = k / 64, r = k % 64;
      col_[q] = row_[0] << r;
      if (r == 0)
        for (std::size_t w = q + 1; w < wpr_; ++w) col_[w] = row_[w - q];
      else
        for (std::size_t w = q + 1; w < wpr_; ++w) col_[w] = (row_[w - q] << r) | (row_[w - q - 1] >> (64 - r));
      vert_long += feed_long(col_.data(), co_hist_.data(), co_head, co_prev_.data(), wpr_, q, wpr_, v);
      if (main_diag && k <= v) std::memcpy(head_rows_.data() + (k - 1) * wpr_, row_.data(), wpr_ * sizeof(std::uint64_t));
    }
    if (main_diag) vert_long += diagonal_correction();
    for (std::size_t l = cfg_.l_min; l <= n_; ++l) diag_long += l * diag_hist_[l];
    return detail::assemble_measures(n_, points, points, diag_long, diag_hist_, cfg_.l_min, points, vert_long);
  }

  // Each column's run through the main diagonal joins a runs above and b
  // below; the sliding counts saw those pieces separately.
  std::uint64_t diagonal_correction() const {
    const std::size_t v = cfg_.v_min;
    const auto bit = [&](std::size_t m, std::size_t p) {
      return (head_rows_[(m - 1) * wpr_ + p / 64] >> (p % 64)) & 1u;
    };
    const auto f = [&](std::uint64_t x) { return x >= v ? x : 0; };
    std::uint64_t total = 0;
    for (std::size_t j = 0; j < n_; ++j) {
      std::uint64_t a = 0, b = 0;
      while (a < v && a + 1 <= j && a + 1 < n_ && bit(a + 1, j - a - 1)) ++a;
      while (b < v && j + b + 1 < n_ && bit(b + 1, j)) ++b;
      std::uint64_t add;
      if (a >= v && b >= v)
        add = 1;
      else if (a >= v)
        add = b + 1;
      else if (b >= v)
        add = a + 1;
      else
        add = f(a + b + 1) - f(a) - f(b);
      total += add;
    }
    return total;
  }

  RecurrenceConfig cfg_;
  std::size_t len_ = 0;
  std::size_t stride_ = 0;
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::size_t tau_ = 1;
  std::size_t dec_ = 1;
  std::size_t step_ = 0;
  std::size_t wpr_ = 0;
  std::size_t first_k_ = 1;
  double thr_ = 0.0;

  std::vector<CoordClass> classes_;
  std::vector<float> lattice_;
  std::vector<float> levels_;
  std::size_t level_stride_ = 0;
  std::vector<float> dist_;
  std::vector<std::uint16_t> code_buf_;

  std::vector<std::size_t> ring_off_;
  std::vector<std::uint16_t> codes_;
  std::size_t origin_ = 0;
  std::int64_t base_ = 0;
  double center_ = 0.0;
  double xmax_ = 0.0;

  bool warm_ = false;
  std::vector<double> prev_;
  std::span<const double> window_;
  double mean_ = 0.0, sd_ = 1.0;
  bool z_ready_ = false;
  std::vector<double> z_;

  std::vector<std::uint64_t> row_, col_;
  std::vector<std::uint64_t> al_hist_, co_hist_, al_prev_, co_prev_;
  std::vector<std::uint64_t> head_rows_;
  std::vector<std::uint64_t> diag_hist_;
  std::size_t cold_starts_ = 0;
  std::size_t exact_checks_ = 0;
};

}  // namespace rqews
