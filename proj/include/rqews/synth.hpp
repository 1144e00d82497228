#pragma once

// Surrogate combustor pressure runs: a noisy Hopf oscillator driven through
// its bifurcation by a scheduled control parameter, on top of a coloured
// broadband floor and low-frequency drift.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rqews/error.hpp"
#include "rqews/labeling.hpp"
#include "rqews/random.hpp"
#include "rqews/signal.hpp"

namespace rqews {

struct MuKnot {
  double t = 0.0;
  double mu = -1.0;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::string run_id = "run";
  double duration_s = 7.0;
  double sample_rate = 100000.0;
  double p_cc = 80.0;               // bar
  double f0_hz = 10000.0;           // oscillator frequency
  double noise_level = 0.3;         // bar RMS of the broadband floor
  double drift_level = 0.5;         // bar amplitude of sub-kHz content
  double mode_noise = 0.35;         // bar; E|B|^2 = mode_noise^2/2 at mu = -1
  double mu_rate = 1000.0;          // 1/s per unit of mu
  double beta = 0.5;                // amplitude-dependent frequency shift
  std::vector<MuKnot> mu_schedule{{0.0, -1.0}};
  double burst_rate = 0.0;          // random kicks per second
  double burst_amplitude = 2.0;     // bar
  InstabilityKind target_kind = InstabilityKind::type1;
  double type1_amplitude_pct = 12.0;  // peak-to-peak percent of p_cc at mu = +1
  double type2_amplitude_pct = 30.0;
  std::size_t substeps = 1;         // integration steps per output sample

  void validate() const {
    if (!(duration_s > 0.0)) throw ValidationError("synth duration must be positive");
    if (!(sample_rate > 2.0 * f0_hz)) throw ValidationError("synth sample_rate must exceed 2*f0");
    if (!(f0_hz > 0.0)) throw ValidationError("synth f0 must be positive");
    if (!(p_cc > 0.0)) throw ValidationError("synth p_cc must be positive");
    if (noise_level < 0.0 || drift_level < 0.0 || !(mode_noise > 0.0))
      throw ValidationError("synth noise levels must be non-negative (mode_noise positive)");
    if (!(mu_rate > 0.0)) throw ValidationError("synth mu_rate must be positive");
    if (burst_rate < 0.0) throw ValidationError("synth burst_rate must be >= 0");
    if (mu_schedule.empty()) throw ValidationError("synth mu_schedule must have at least one knot");
    for (std::size_t i = 1; i < mu_schedule.size(); ++i)
      if (!(mu_schedule[i].t > mu_schedule[i - 1].t)) throw ValidationError("synth mu_schedule times must increase");
    if (substeps < 1) throw ValidationError("synth substeps must be >= 1");
    if (!(type1_amplitude_pct > 0.0 && type2_amplitude_pct > 0.0))
      throw ValidationError("synth target amplitudes must be positive");
  }

  /// Limit-cycle |B| reached at mu = +1 for the target kind, bar.
  double target_amplitude() const {
    const double pct = target_kind == InstabilityKind::type1 ? type1_amplitude_pct : type2_amplitude_pct;
    return pct / 100.0 * p_cc / 2.0;
  }
};

/// Piecewise-linear schedule, held constant outside the knots.
inline double mu_at(const std::vector<MuKnot>& s, double t) {
  if (t <= s.front().t) return s.front().mu;
  if (t >= s.back().t) return s.back().mu;
  const auto it = std::upper_bound(s.begin(), s.end(), t, [](double v, const MuKnot& k) { return v < k.t; });
  const MuKnot& b = *it;
  const MuKnot& a = *(it - 1);
  return a.mu + (b.mu - a.mu) * (t - a.t) / (b.t - a.t);
}

/// Times where the schedule crosses zero upwards.
inline std::vector<double> mu_upcrossings(const std::vector<MuKnot>& s) {
  std::vector<double> out;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const auto& a = s[i - 1];
    const auto& b = s[i];
    if (a.mu <= 0.0 && b.mu > 0.0) out.push_back(a.t + (b.t - a.t) * (0.0 - a.mu) / (b.mu - a.mu));
  }
  return out;
}

struct SynthRun {
  TimeSeries series;
  RunMetadata meta;
  std::vector<InstabilityInterval> truth;  // detector applied to the noise-free mode envelope
  std::vector<double> mu_crossings;
};

/// Euler-Maruyama on the rotating-frame amplitude
///   dB = mu_rate*mu(t)*B dt - kappa*(1 + i*beta)*|B|^2*B dt + sigma dW,
/// pressure p = Re(B exp(i*2*pi*f0*t)) + floor + drift. kappa places the
/// mu = +1 limit cycle at the target amplitude; sigma sets the mu = -1 noise level.
inline SynthRun generate_run(const SynthConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate));
  if (n < 2) throw ValidationError("synth duration shorter than two samples");
  const double dt = 1.0 / (cfg.sample_rate * static_cast<double>(cfg.substeps));
  const double a_target = cfg.target_amplitude();
  const double kappa = cfg.mu_rate / (a_target * a_target);
  // Stationary complex OU at mu = -1 with E|dW|^2 = dt: E|B|^2 = sigma^2 / (2*mu_rate).
  const double sigma = cfg.mode_noise * std::sqrt(cfg.mu_rate);

  double mu_max = 0.0;
  for (const auto& k : cfg.mu_schedule) mu_max = std::max(mu_max, std::fabs(k.mu));
  if (cfg.mu_rate * mu_max * dt > 0.25)
    throw IntegrationError("integration step too large for the mu schedule (mu_rate*|mu|*dt > 0.25)");

  Rng mode_rng(derive_seed(cfg.seed, 1));
  Rng floor_rng(derive_seed(cfg.seed, 2));
  Rng drift_rng(derive_seed(cfg.seed, 3));
  Rng burst_rng(derive_seed(cfg.seed, 4));

  SynthRun out;
  out.series.sample_rate = cfg.sample_rate;
  out.series.channel_id = "p";
  out.series.samples.resize(n);
  out.meta.run_id = cfg.run_id;
  out.meta.mean_chamber_pressure = cfg.p_cc;
  out.mu_crossings = mu_upcrossings(cfg.mu_schedule);

  // Mode amplitude envelope (peak-to-peak percent), sampled every millisecond.
  const auto env_stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.sample_rate / 1000.0)));
  TimeSeries clean_env;
  clean_env.sample_rate = cfg.sample_rate / static_cast<double>(env_stride);

  std::complex<double> b(0.0, 0.0);
  const double omega = 2.0 * std::numbers::pi * cfg.f0_hz;
  const double sq_dt = std::sqrt(dt);
  const double blow_up = 100.0 * cfg.p_cc;
  double next_burst = cfg.burst_rate > 0.0 ? burst_rng.exponential(cfg.burst_rate) : cfg.duration_s + 1.0;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < cfg.substeps; ++s) {
      const double t = (static_cast<double>(i) * static_cast<double>(cfg.substeps) + static_cast<double>(s)) * dt;
      const double mu = cfg.mu_rate * mu_at(cfg.mu_schedule, t);
      const double r2 = std::norm(b);
      const std::complex<double> drift = mu * b - kappa * std::complex<double>(1.0, cfg.beta) * r2 * b;
      const std::complex<double> dw(mode_rng.normal(), mode_rng.normal());
      b += drift * dt + sigma * sq_dt * dw * (std::numbers::sqrt2 / 2.0);
      while (t >= next_burst) {
        const double phase = 2.0 * std::numbers::pi * burst_rng.uniform();
        b += cfg.burst_amplitude * std::polar(1.0, phase);
        next_burst += burst_rng.exponential(cfg.burst_rate);
      }
    }
    if (!std::isfinite(b.real()) || !std::isfinite(b.imag()) || std::abs(b) > blow_up)
      throw IntegrationError("oscillator amplitude diverged at t = " + std::to_string(static_cast<double>(i) / cfg.sample_rate) + " s");
    const double t = static_cast<double>(i) / cfg.sample_rate;
    out.series.samples[i] = (b * std::polar(1.0, omega * t)).real();
    if (i % env_stride == 0) clean_env.samples.push_back(200.0 * std::abs(b) / cfg.p_cc);
  }

  // Coloured floor: pinking filter on white noise, scaled to the requested RMS.
  if (cfg.noise_level > 0.0) {
    std::vector<double> floor(n);
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = floor_rng.normal();
      b0 = 0.99765 * b0 + w * 0.0990460;
      b1 = 0.96300 * b1 + w * 0.2965164;
      b2 = 0.57000 * b2 + w * 1.0526913;
      floor[i] = b0 + b1 + b2 + w * 0.1848;
    }
    const auto ms = mean_std(floor);
    for (std::size_t i = 0; i < n; ++i) out.series.samples[i] += cfg.noise_level * (floor[i] - ms.mean) / ms.stddev;
  }
  if (cfg.drift_level > 0.0) {
    const double ph1 = 2.0 * std::numbers::pi * drift_rng.uniform();
    const double ph2 = 2.0 * std::numbers::pi * drift_rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / cfg.sample_rate;
      out.series.samples[i] += cfg.drift_level * (std::sin(2.0 * std::numbers::pi * 30.0 * t + ph1) +
                                                  0.5 * std::sin(2.0 * std::numbers::pi * 120.0 * t + ph2));
    }
  }

  out.truth = detect_intervals(clean_env);
  return out;
}

// ---------------------------------------------------------------------------
// Campaign
// ---------------------------------------------------------------------------

struct CampaignRun {
  SynthConfig config;
  SynthRun run;
  std::string split;  // "train" or "test"
  std::vector<InstabilityKind> events;
};

/// Event kinds per run. Ten-run campaigns use a fixed table so the test split
/// holds eight events, three of them type 2; other sizes alternate.
inline std::vector<InstabilityKind> campaign_events(std::size_t run_number, std::size_t n_runs) {
  using K = InstabilityKind;
  if (n_runs == 10) {
    switch (run_number) {
      case 6: case 9: case 10: return {K::type1, K::type2};
      case 7: case 8: return {K::type2, K::type1};
      default: return {K::type1, K::type1};
    }
  }
  return run_number % 2 == 0 ? std::vector<K>{K::type1, K::type2} : std::vector<K>{K::type1, K::type1};
}

inline std::string campaign_split(std::size_t run_number, std::size_t n_runs) {
  if (n_runs == 10) {
    static constexpr std::size_t test_runs[] = {3, 7, 8, 10};
    return std::find(std::begin(test_runs), std::end(test_runs), run_number) != std::end(test_runs) ? "test" : "train";
  }
  const std::size_t train = std::min((6 * n_runs + 9) / 10, n_runs - 1);
  return run_number <= train ? "train" : "test";
}

/// Builds the mu schedule for two events placed in the run; randomised ramp
/// and plateau lengths.
inline std::vector<MuKnot> campaign_schedule(const std::vector<InstabilityKind>& events, double duration, double mu_low,
                                             double type2_mu, Rng& rng) {
  std::vector<MuKnot> s{{0.0, mu_low}};
  const double slot = duration / static_cast<double>(events.size());
  // longest event is 1.6 s and may start 0.28 slot in; the next starts at 1.2 slot
  constexpr double kLongest = 0.65 + 0.05 + 0.75 + 0.15;
  if (!(0.92 * slot > kLongest))
    throw ValidationError("synth duration_s too short for a campaign run: need more than " +
                          format_double(static_cast<double>(events.size()) * kLongest / 0.92) + " s");
  for (std::size_t e = 0; e < events.size(); ++e) {
    const double start = slot * static_cast<double>(e) + 0.2 * slot + rng.uniform(0.0, 0.08 * slot);
    const double ramp = rng.uniform(0.35, 0.65);
    const double plateau = rng.uniform(0.45, 0.75);
    const double down = 0.15;
    const double mu_high = events[e] == InstabilityKind::type2 ? type2_mu : 1.0;
    s.push_back({start, mu_low});
    // Ramp crosses zero then continues to the plateau value.
    s.push_back({start + ramp, 1.0});
    if (mu_high > 1.0) s.push_back({start + ramp + 0.05, mu_high});
    s.push_back({start + ramp + plateau, mu_high});
    s.push_back({start + ramp + plateau + down, mu_low});
  }
  return s;
}

/// Run number r (1-based) of an n-run campaign; a pure function of its arguments.
inline CampaignRun generate_campaign_run(std::size_t r, std::size_t n_runs, const SynthConfig& tmpl, std::uint64_t seed) {
  if (n_runs < 2) throw ValidationError("a campaign needs at least 2 runs");
  if (r < 1 || r > n_runs) throw ValidationError("campaign run number out of range");
  tmpl.validate();
  const double a1 = tmpl.type1_amplitude_pct, a2 = tmpl.type2_amplitude_pct;
  const double type2_mu = (a2 / a1) * (a2 / a1);
  Rng rng(derive_seed(seed, 0xca00 + r));
  CampaignRun cr;
  cr.events = campaign_events(r, n_runs);
  cr.split = campaign_split(r, n_runs);
  SynthConfig cfg = tmpl;
  cfg.seed = derive_seed(seed, r);
  cfg.run_id = "run" + std::string(r < 10 ? "0" : "") + std::to_string(r);
  cfg.target_kind = InstabilityKind::type1;
  const double mu_low = -rng.uniform(0.8, 1.2);
  cfg.noise_level = tmpl.noise_level * rng.uniform(0.8, 1.2);
  cfg.mode_noise = tmpl.mode_noise * rng.uniform(0.85, 1.15);
  cfg.mu_schedule = campaign_schedule(cr.events, tmpl.duration_s, mu_low, type2_mu, rng);
  cr.config = cfg;
  cr.run = generate_run(cfg);
  return cr;
}

inline std::vector<CampaignRun> generate_campaign(std::size_t n_runs, const SynthConfig& tmpl, std::uint64_t seed) {
  std::vector<CampaignRun> out;
  for (std::size_t r = 1; r <= n_runs; ++r) out.push_back(generate_campaign_run(r, n_runs, tmpl, seed));
  return out;
}

inline nlohmann::ordered_json manifest_entry(const CampaignRun& cr, const std::string& file) {
  nlohmann::ordered_json j;
  j["run_id"] = cr.config.run_id;
  j["file"] = file;
  j["split"] = cr.split;
  const bool any2 = std::find(cr.events.begin(), cr.events.end(), InstabilityKind::type2) != cr.events.end();
  j["kind"] = any2 ? "type2" : "type1";
  auto ev = nlohmann::ordered_json::array();
  for (auto k : cr.events) ev.push_back(to_string(k));
  j["events"] = ev;
  j["seed"] = cr.config.seed;
  j["p_cc"] = cr.config.p_cc;
  j["mu_crossings"] = cr.run.mu_crossings;
  auto iv = nlohmann::ordered_json::array();
  for (const auto& x : cr.run.truth)
    iv.push_back({{"onset_s", x.onset_s}, {"offset_s", x.offset_s}, {"kind", to_string(x.kind)}});
  j["intervals"] = iv;
  return j;
}

}  // namespace rqews
