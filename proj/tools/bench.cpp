// Throughput of the windowed RQA sweep on a synthetic 100 kHz signal.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "CLI11.hpp"
#include "rqews/random.hpp"
#include "rqews/rqa.hpp"
#include "rqews/rqa_sliding.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rqews_bench: single-core windowed RQA throughput"};
  double seconds = 1.0;
  double fs = 100000.0;
  double window_s = 0.2;
  double stride_s = 0.01;
  std::size_t decimation = 4;
  double tone = 0.5;
  bool direct = false;
  app.add_option("--seconds", seconds, "signal length to sweep");
  app.add_option("--decimation", decimation, "state-vector decimation");
  app.add_option("--tone", tone, "amplitude of the 10 kHz tone relative to unit noise");
  app.add_flag("--direct", direct, "compute every window from scratch");
  CLI11_PARSE(app, argc, argv);

  const std::size_t n = static_cast<std::size_t>(seconds * fs);
  const std::size_t w = static_cast<std::size_t>(window_s * fs);
  const std::size_t s = static_cast<std::size_t>(stride_s * fs);
  rqews::Rng rng(7);
  std::vector<double> x(n);
  double red = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    red = 0.95 * red + rng.normal();
    x[i] = 0.2 * red + tone * std::sin(2.0 * std::numbers::pi * 10000.0 * static_cast<double>(i) / fs) + 0.5 * rng.normal();
  }

  rqews::EmbeddingConfig emb{2, 15};
  rqews::RecurrenceConfig cfg;
  cfg.decimation = decimation;
  rqews::RqaWorkspace ws;
  rqews::SlidingRqa sliding(emb, cfg, w, s);
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t windows = 0;
  double det_sum = 0.0, rr_sum = 0.0;
  for (std::size_t start = 0; start + w <= n; start += s, ++windows) {
    const auto win = std::span<const double>(x).subspan(start, w);
    const auto m = direct ? ws.window_measures(win, emb, cfg) : sliding.measures(win);
    det_sum += m.det;
    rr_sum += m.rr;
  }
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("windows=%zu elapsed=%.3fs per_window=%.3fms realtime_factor=%.2f mean_rr=%.4f mean_det=%.4f\n", windows,
              elapsed, 1e3 * elapsed / static_cast<double>(windows), seconds / elapsed,
              rr_sum / static_cast<double>(windows), det_sum / static_cast<double>(windows));
  return 0;
}
