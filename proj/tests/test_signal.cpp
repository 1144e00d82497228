#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rqews/random.hpp"
#include "rqews/signal.hpp"

using namespace rqews;
using Catch::Approx;

namespace {

TimeSeries sine(double f, double amp, double fs, std::size_t n, double phase = 0.0) {
  TimeSeries s;
  s.sample_rate = fs;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.samples[i] = amp * std::sin(2 * std::numbers::pi * f * i / fs + phase);
  return s;
}

double rms(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rqews_test_" + name);
}

}  // namespace

TEST_CASE("CSV run with sample_rate header") {
  std::stringstream ss;
  ss << "# sample_rate=100000\n# p_cc=80\n# run_id=r1\n";
  for (int i = 0; i < 10; ++i) ss << i * 0.5 << "\n";
  const auto run = read_run_csv(ss);
  CHECK(run.series.size() == 10);
  CHECK(run.series.sample_rate == 100000.0);
  CHECK(run.metadata.run_id == "r1");
  CHECK(run.metadata.p_cc() == 80.0);
  CHECK(run.series.samples[3] == 1.5);
}

TEST_CASE("load errors are distinct") {
  SECTION("non-finite sample names its index") {
    std::stringstream ss("# sample_rate=1000\n1.0\n2.0\nnan\n");
    try {
      read_run_csv(ss);
      FAIL("expected error");
    } catch (const LoadError& e) {
      CHECK(e.kind() == LoadError::Kind::non_finite);
      CHECK(std::string(e.what()).find("non-finite sample at index 2") != std::string::npos);
    }
  }
  SECTION("missing header") {
    std::stringstream ss("1.0\n2.0\n");
    try {
      read_run_csv(ss);
      FAIL("expected error");
    } catch (const LoadError& e) {
      CHECK(e.kind() == LoadError::Kind::malformed_header);
    }
  }
  SECTION("zero-length file") {
    const auto p = temp_file("empty.bin");
    { std::ofstream out(p, std::ios::binary); }
    try {
      load_run(p);
      FAIL("expected error");
    } catch (const LoadError& e) {
      CHECK(e.kind() == LoadError::Kind::empty);
    }
    std::filesystem::remove(p);
  }
  SECTION("truncated binary") {
    std::stringstream ss;
    TimeSeries s = sine(10, 1, 1000, 100);
    write_run_binary(ss, s, {});
    std::string bytes = ss.str();
    bytes.resize(bytes.size() - 5);
    std::stringstream in(bytes);
    try {
      read_run_binary(in);
      FAIL("expected error");
    } catch (const LoadError& e) {
      CHECK(e.kind() == LoadError::Kind::truncated);
    }
  }
}

TEST_CASE("binary run of 2e6 samples round-trips bit-exactly") {
  Rng rng(3);
  TimeSeries s;
  s.sample_rate = 100000;
  s.samples.resize(2'000'000);
  for (auto& v : s.samples) v = rng.normal() * 1e3;
  RunMetadata meta;
  meta.run_id = "big";
  meta.mean_chamber_pressure = 80.0;
  const auto p = temp_file("big.bin");
  save_run(p, s, meta, RunFormat::binary);
  const auto back = load_run(p);
  CHECK(back.series.size() == 2'000'000);
  CHECK(back.series.samples == s.samples);
  CHECK(back.series.sample_rate == s.sample_rate);
  CHECK(back.metadata.p_cc() == 80.0);
  std::filesystem::remove(p);
}

TEST_CASE("CSV run round-trips exactly") {
  Rng rng(4);
  TimeSeries s;
  s.sample_rate = 51200;
  s.samples.resize(1000);
  for (auto& v : s.samples) v = rng.normal();
  RunMetadata meta;
  meta.run_id = "c";
  meta.mean_chamber_pressure = 12.5;
  std::stringstream ss;
  write_run_csv(ss, s, meta);
  const auto back = read_run_csv(ss);
  CHECK(back.series.samples == s.samples);
  CHECK(back.metadata.run_id == "c");
}

TEST_CASE("high-pass rejects cutoff at or above Nyquist") {
  TimeSeries s = sine(10, 1, 1000, 100);
  FilterSpec spec;
  spec.cutoff_hz = 500;
  CHECK_THROWS_AS(high_pass(s, spec), ValidationError);
  spec.cutoff_hz = 800;
  CHECK_THROWS_AS(high_pass(s, spec), ValidationError);
}

TEST_CASE("high-pass removes DC") {
  for (bool zp : {true, false}) {
    TimeSeries s;
    s.sample_rate = 100000;
    s.samples.assign(50000, 3.7);
    FilterSpec spec;
    spec.zero_phase = zp;
    const auto y = high_pass(s, spec);
    double mx = 0;
    for (std::size_t i = 5000; i < 45000; ++i) mx = std::max(mx, std::fabs(y.samples[i]));
    CHECK(mx < 1e-6 * 3.7);
  }
}

TEST_CASE("high-pass gain at the cutoff and in the passband") {
  const double fs = 100000, fc = 1000;
  for (bool zp : {true, false}) {
    FilterSpec spec;
    spec.cutoff_hz = fc;
    spec.zero_phase = zp;
    const auto at_cut = high_pass(sine(fc, 1.0, fs, 200000), spec);
    const std::span<const double> mid(at_cut.samples.data() + 50000, 100000);
    CHECK(rms(mid) == Approx(std::sqrt(0.5) / std::sqrt(2.0)).epsilon(0.05));
    const auto pass = high_pass(sine(10 * fc, 1.0, fs, 200000), spec);
    const std::span<const double> mid2(pass.samples.data() + 50000, 100000);
    CHECK(rms(mid2) == Approx(std::sqrt(0.5)).epsilon(0.02));
  }
}

TEST_CASE("single-pass response matches the digital Butterworth magnitude within 0.5 dB") {
  const double fs = 100000, fc = 1000;
  const int order = 4;
  const auto sos = butterworth_highpass(order, fc, fs);
  for (double f : {200.0, 500.0, 800.0, 1000.0, 1500.0, 3000.0, 10000.0, 30000.0}) {
    // Bilinear-transformed analog prototype: |H|^2 = 1 / (1 + (tan(pi fc/fs) / tan(pi f/fs))^(2n)).
    const double ratio = std::tan(std::numbers::pi * fc / fs) / std::tan(std::numbers::pi * f / fs);
    const double analytic = 1.0 / std::sqrt(1.0 + std::pow(ratio, 2 * order));
    const double got = sos_magnitude(sos, f, fs);
    CHECK(std::fabs(20 * std::log10(got / analytic)) < 0.5);
  }
  CHECK(sos_magnitude(sos, fc, fs) == Approx(1 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("zero-phase cascade is -3 dB at the cutoff") {
  const double fs = 100000, fc = 1000;
  const double edge = zero_phase_design_edge(4, fc, fs);
  const auto sos = butterworth_highpass(4, edge, fs);
  const double g = sos_magnitude(sos, fc, fs);
  CHECK(g * g == Approx(1 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("high-pass is linear") {
  Rng rng(11);
  TimeSeries x, y, z;
  x.sample_rate = y.sample_rate = z.sample_rate = 100000;
  for (int i = 0; i < 20000; ++i) {
    x.samples.push_back(rng.normal());
    y.samples.push_back(rng.normal() + 2.0);
  }
  const double a = 1.7, b = -0.3;
  for (int i = 0; i < 20000; ++i) z.samples.push_back(a * x.samples[i] + b * y.samples[i]);
  for (bool zp : {true, false}) {
    FilterSpec spec;
    spec.zero_phase = zp;
    const auto fx = high_pass(x, spec), fy = high_pass(y, spec), fz = high_pass(z, spec);
    double worst = 0, scale = 0;
    for (int i = 0; i < 20000; ++i) {
      worst = std::max(worst, std::fabs(fz.samples[i] - (a * fx.samples[i] + b * fy.samples[i])));
      scale = std::max(scale, std::fabs(fz.samples[i]));
    }
    CHECK(worst <= 1e-9 * scale);
  }
}

TEST_CASE("causal high-pass output depends only on the past") {
  Rng rng(5);
  TimeSeries x;
  x.sample_rate = 100000;
  for (int i = 0; i < 5000; ++i) x.samples.push_back(rng.normal());
  FilterSpec spec;
  spec.zero_phase = false;
  const auto full = high_pass(x, spec);
  TimeSeries cut = x;
  cut.samples.resize(3000);
  const auto part = high_pass(cut, spec);
  for (int i = 0; i < 3000; ++i) REQUIRE(part.samples[i] == full.samples[i]);
}

TEST_CASE("peak-to-peak envelope") {
  SECTION("sine of amplitude A -> 200 A / P percent") {
    const auto s = sine(10000, 2.5, 100000, 10000, 0.3);
    const auto env = peak_to_peak_envelope(s, 0.010, 80.0);
    for (double v : env.samples) CHECK(v == Approx(200 * 2.5 / 80.0).epsilon(0.01));
  }
  SECTION("constant signal -> 0") {
    TimeSeries s;
    s.sample_rate = 1000;
    s.samples.assign(100, 4.0);
    for (double v : peak_to_peak_envelope(s, 0.01, 80.0).samples) CHECK(v == 0.0);
  }
  SECTION("square wave +-1 bar at p_cc 80 -> 2.5 percent") {
    TimeSeries s;
    s.sample_rate = 100000;
    for (int i = 0; i < 10000; ++i) s.samples.push_back((i / 5) % 2 ? 1.0 : -1.0);
    for (double v : peak_to_peak_envelope(s, 0.010, 80.0).samples) CHECK(v == Approx(2.5).epsilon(1e-12));
  }
  SECTION("window longer than series") {
    TimeSeries s;
    s.sample_rate = 1000;
    s.samples.assign(5, 1.0);
    CHECK_THROWS_AS(peak_to_peak_envelope(s, 0.01, 80.0), ValidationError);
  }
  SECTION("stamps and stride") {
    TimeSeries s;
    s.sample_rate = 1000;
    s.samples.assign(100, 0.0);
    const auto env = peak_to_peak_envelope(s, 0.010, 80.0, 0.002);
    CHECK(env.size() == 46);
    CHECK(env.start_time == Approx(0.010));
    CHECK(env.sample_rate == Approx(500.0));
  }
  SECTION("scale covariance") {
    Rng rng(8);
    TimeSeries s;
    s.sample_rate = 10000;
    for (int i = 0; i < 3000; ++i) s.samples.push_back(rng.normal());
    TimeSeries t = s;
    for (auto& v : t.samples) v *= 4.0;
    const auto a = peak_to_peak_envelope(s, 0.01, 80.0), b = peak_to_peak_envelope(t, 0.01, 80.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.samples[i] == Approx(4.0 * a.samples[i]).epsilon(1e-12));
  }
}
