#pragma once

// End-to-end experiment recipes built from a RunConfig. Each run is a pure
// function of the config; every random stage draws from a seed derived from
// the run seed and the stage name.

#include <filesystem>
#include <string>
#include <vector>

#include "photon_correlator/analysis.hpp"
#include "photon_correlator/config.hpp"
#include "photon_correlator/correlator.hpp"
#include "photon_correlator/detector.hpp"
#include "photon_correlator/optics.hpp"
#include "photon_correlator/records.hpp"
#include "photon_correlator/source.hpp"
#include "photon_correlator/tag_io.hpp"

namespace phc {

inline TagStream emit_source(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.source.kind == SourceConfig::Kind::Dot) return emit_dot_pulse_train(cfg.source.dot, cfg.source.n_pulses, seed);
  return emit_laser_pulse_train(cfg.source.laser, cfg.source.n_pulses, seed);
}

inline double source_rep_period_ps(const RunConfig& cfg) { return rep_period_ps(cfg.source.rep_rate_hz()); }

// ---------------------------------------------------------------------------
// Hanbury-Brown Twiss coincidence measurement

struct HbtRun {
  TagStream start;
  TagStream stop;
  Histogram histogram;
  G2Estimate g2;
  double rep_period_ps = 0.0;
  double integration_halfwidth_ps = 0.0;
};

inline HistogramConfig hbt_histogram_config(const RunConfig& cfg) {
  if (cfg.range_min_ps) return {cfg.bin_width_ps, *cfg.range_min_ps, *cfg.range_max_ps, cfg.mode};
  const double period = source_rep_period_ps(cfg);
  const double halfspan = (cfg.g2_side_peaks / 2 + 0.5) * period + double(cfg.bin_width_ps);
  return symmetric_config(halfspan, cfg.bin_width_ps, cfg.mode);
}

inline double g2_halfwidth(const RunConfig& cfg) {
  return cfg.g2_halfwidth_ps.value_or(default_integration_halfwidth(source_rep_period_ps(cfg), cfg.bin_width_ps));
}

// source -> beamsplitter -> two detectors -> start/stop histogram -> g2(0).
// Arm A feeds the start detector, arm B the stop detector.
inline HbtRun run_hbt(const RunConfig& cfg) {
  const auto& start_det = cfg.detector("hbt.start", cfg.hbt_start);
  const auto& stop_det = cfg.detector("hbt.stop", cfg.hbt_stop);
  if (start_det.channel == stop_det.channel) throw ConfigError("hbt.stop", "start and stop must be different detectors");
  const auto hcfg = hbt_histogram_config(cfg);

  HbtRun run;
  run.rep_period_ps = source_rep_period_ps(cfg);
  run.integration_halfwidth_ps = g2_halfwidth(cfg);
  {
    const auto photons = emit_source(cfg, derive_seed(cfg.seed, "source"));
    const auto arms = beamsplit(photons, cfg.splitter, derive_seed(cfg.seed, "splitter"));
    run.start = detect(arms.a, start_det, derive_seed(cfg.seed, "hbt.start." + start_det.name));
    run.stop = detect(arms.b, stop_det, derive_seed(cfg.seed, "hbt.stop." + stop_det.name));
  }
  run.histogram = tac_histogram(run.start, run.stop, hcfg);
  run.g2 = g2_zero(run.histogram, run.rep_period_ps, run.integration_halfwidth_ps, cfg.g2_side_peaks);
  return run;
}

// ---------------------------------------------------------------------------
// Reverse start-stop lifetime measurement

struct TcspcRun {
  TagStream detections;
  TagStream clock;
  Histogram histogram;
  LifetimeFit fit;
  double rep_period_ps = 0.0;
};

// Clock delay placing the excitation 2 ns after the start of the remapped axis.
inline timestamp_t default_clock_delay_ps(double rep_period_ps) { return std::llround(rep_period_ps - 2000.0); }

inline HistogramConfig tcspc_histogram_config(const RunConfig& cfg) {
  if (cfg.range_min_ps) return {cfg.bin_width_ps, *cfg.range_min_ps, *cfg.range_max_ps, cfg.mode};
  const auto bins = static_cast<timestamp_t>(source_rep_period_ps(cfg) / double(cfg.bin_width_ps));
  return {cfg.bin_width_ps, 0, bins * cfg.bin_width_ps, cfg.mode};
}

// source -> detector; detector starts, next clock tick stops; delays are
// remapped to time after excitation and fitted with the decay model.
inline TcspcRun run_tcspc(const RunConfig& cfg) {
  const auto& det = cfg.detector("tcspc.detector", cfg.tcspc_detector);
  const auto hcfg = tcspc_histogram_config(cfg);
  TcspcRun run;
  run.rep_period_ps = source_rep_period_ps(cfg);
  const auto delay = cfg.tcspc_clock_delay_ps.value_or(default_clock_delay_ps(run.rep_period_ps));
  {
    const auto photons = emit_source(cfg, derive_seed(cfg.seed, "source"));
    run.detections = detect(photons, det, derive_seed(cfg.seed, "tcspc.detector." + det.name));
  }
  run.clock = clock_stream(cfg.source.rep_rate_hz(), cfg.source.n_pulses, delay);
  run.histogram = reverse_start_stop(run.detections, run.clock, hcfg, run.rep_period_ps);
  LifetimeFitOptions opt;
  opt.fix_sigma_ps = cfg.lifetime_fix_sigma_ps;
  opt.weighted = cfg.lifetime_weighted;
  run.fit = fit_lifetime(run.histogram, opt);
  return run;
}

// ---------------------------------------------------------------------------
// Detection-efficiency sweep

struct DeSweepRun {
  std::vector<DECalibrationPoint> points;
  DEFit fit;
  double laser_mu = 0.0;
};

// For each mu: laser -> attenuator (mu / laser mu) -> detector -> count rate.
inline DeSweepRun run_de_sweep(const RunConfig& cfg, const std::vector<double>& mu) {
  if (cfg.source.kind != SourceConfig::Kind::Laser) throw ConfigError("source", "DE sweep needs a [source.laser] block");
  if (mu.empty()) throw ConfigError("de_sweep.mu", "mu list is empty");
  validate_mu_list("de_sweep.mu", mu);
  const auto& det = cfg.detector("de_sweep.detector", cfg.de_detector);
  const double mu_max = *std::max_element(mu.begin(), mu.end());

  DeSweepRun run;
  auto laser = cfg.source.laser;
  laser.mu = cfg.source.laser_mu.value_or(mu_max);
  run.laser_mu = laser.mu;
  if (laser.mu < mu_max) {
    throw ConfigError("source.laser.mu", "laser mu must be at least the largest swept mu");
  }
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto stage = "de_sweep.point." + std::to_string(i);
    const double transmission = laser.mu > 0.0 ? mu[i] / laser.mu : 0.0;
    const auto photons = emit_laser_pulse_train(laser, cfg.source.n_pulses, derive_seed(cfg.seed, stage + ".laser"));
    const auto attenuated = attenuate(photons, transmission, derive_seed(cfg.seed, stage + ".attenuator"));
    const auto counts = detect(attenuated, det, derive_seed(cfg.seed, stage + ".detector"));
    const double seconds = double(photons.duration_ps) * 1e-12;
    run.points.push_back({mu[i], double(counts.size()) / seconds});
  }
  DEFitOptions opt;
  opt.weighted = cfg.de_weighted;
  run.fit = fit_de(run.points, laser.rep_rate_hz, opt);
  return run;
}

// ---------------------------------------------------------------------------
// Output writers. All files are written only after the run has finished.

inline void write_text(const std::filesystem::path& p, const std::string& s) { detail::write_file(p.string(), s); }

inline void write_record(const std::filesystem::path& dir, const std::string& stem, const Record& r) {
  write_text(dir / (stem + ".txt"), r.to_text());
  write_text(dir / (stem + ".json"), r.to_json_text());
}

inline void write_hbt_outputs(const HbtRun& run, const RunConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "effective.cfg", to_config_text(cfg));
  write_tags(run.start, (dir / "start.ttag").string());
  write_tags(run.stop, (dir / "stop.ttag").string());
  write_text(dir / "hbt_histogram.csv", encode_histogram_csv(run.histogram));
  auto rec = to_record(run.g2);
  rec.set("rep_period_ps", run.rep_period_ps).set("integration_halfwidth_ps", run.integration_halfwidth_ps);
  write_record(dir, "g2", rec);
}

inline void write_tcspc_outputs(const TcspcRun& run, const RunConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "effective.cfg", to_config_text(cfg));
  write_tags(run.detections, (dir / "detections.ttag").string());
  write_text(dir / "tcspc_histogram.csv", encode_histogram_csv(run.histogram));
  write_record(dir, "lifetime", to_record(run.fit));
}

inline void write_de_sweep_outputs(const DeSweepRun& run, const RunConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "effective.cfg", to_config_text(cfg));
  write_text(dir / "de_sweep.csv", encode_sweep_csv(run.points));
  auto rec = to_record(run.fit);
  rec.set("laser_mu", run.laser_mu);
  write_record(dir, "de_fit", rec);
}

}  // namespace phc
