#pragma once

// Photon sources: the pulsed quantum-dot emitter with a truncated {0,1,2}
// photon-number distribution, and the Poissonian calibration laser.

#include <cmath>
#include <cstdint>
#include <string>

#include "photon_correlator/error.hpp"
#include "photon_correlator/random.hpp"
#include "photon_correlator/text.hpp"
#include "photon_correlator/timetag.hpp"

namespace phc {

struct PhotonDistribution {
  double p0 = 1.0;
  double p1 = 0.0;
  double p2 = 0.0;

  double mean() const noexcept { return p1 + 2.0 * p2; }

  // <n(n-1)>/<n>^2
  double g2_zero() const noexcept {
    const double m = mean();
    return m > 0.0 ? 2.0 * p2 / (m * m) : 0.0;
  }
};

struct PulsedSourceModel {
  double rep_rate_hz = 82e6;
  double lifetime_ps = 370.0;
  PhotonDistribution photon_dist{0.9, 0.1, 0.0};
  double wavelength_nm = 902.0;
};

struct PoissonLaserModel {
  double rep_rate_hz = 1e5;
  double mu = 1.0;
  double wavelength_nm = 1550.0;
};

inline constexpr double kProbabilityTolerance = 1e-9;

inline void validate(const PhotonDistribution& d) {
  for (double p : {d.p0, d.p1, d.p2}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw InvalidArgument("photon distribution entries must lie in [0, 1]");
    }
  }
  if (std::abs(d.p0 + d.p1 + d.p2 - 1.0) > kProbabilityTolerance) {
    throw InvalidArgument("photon distribution must sum to 1");
  }
}

inline void validate(const PulsedSourceModel& m) {
  if (!(m.rep_rate_hz > 0.0)) throw InvalidArgument("rep_rate_hz must be > 0");
  if (!(m.lifetime_ps >= 0.0)) throw InvalidArgument("lifetime_ps must be >= 0");
  validate(m.photon_dist);
}

inline void validate(const PoissonLaserModel& m) {
  if (!(m.rep_rate_hz > 0.0)) throw InvalidArgument("rep_rate_hz must be > 0");
  if (!(m.mu >= 0.0)) throw InvalidArgument("mu must be >= 0");
}

// Distribution over {0,1,2} photons with the requested g2(0) and mean:
// p2 = g2 * mean^2 / 2, p1 = mean - 2 p2, p0 = 1 - p1 - p2.
inline PhotonDistribution solve_photon_stats(double g2_target, double mean_n) {
  if (!(g2_target >= 0.0)) throw InvalidArgument("g2_target must be >= 0");
  if (!(mean_n > 0.0)) throw InvalidArgument("mean_n must be > 0");
  PhotonDistribution d;
  d.p2 = g2_target * mean_n * mean_n / 2.0;
  d.p1 = mean_n - 2.0 * d.p2;
  d.p0 = 1.0 - d.p1 - d.p2;
  const auto fmt = text::format_double;
  if (d.p2 > 1.0) throw InvalidArgument("infeasible photon statistics: p2 = " + fmt(d.p2) + " > 1");
  if (d.p1 < 0.0) throw InvalidArgument("infeasible photon statistics: p1 = " + fmt(d.p1) + " < 0");
  if (d.p0 < 0.0) throw InvalidArgument("infeasible photon statistics: p0 = " + fmt(d.p0) + " < 0");
  return d;
}

// Nominal time of pulse k, rounded to the nearest picosecond.
inline timestamp_t pulse_time_ps(std::int64_t k, double rep_rate_hz) {
  return std::llround(static_cast<long double>(k) * 1e12L / static_cast<long double>(rep_rate_hz));
}

inline double rep_period_ps(double rep_rate_hz) { return 1e12 / rep_rate_hz; }

// Photons of a pulse train. Each pulse emits 0, 1 or 2 photons, each delayed
// independently by an exponential emission time. Tags falling past the end
// of the observation window are dropped.
inline TagStream emit_dot_pulse_train(const PulsedSourceModel& model, std::int64_t n_pulses,
                                      std::uint64_t seed) {
  validate(model);
  if (n_pulses < 0) throw InvalidArgument("n_pulses must be >= 0");
  TagStream out;
  out.duration_ps = pulse_time_ps(n_pulses, model.rep_rate_hz);
  out.meta["source"] = "pulsed-dot";
  out.meta["wavelength_nm"] = text::format_double(model.wavelength_nm);
  out.meta["seed"] = std::to_string(seed);

  Rng rng(seed);
  const auto& d = model.photon_dist;
  const double c0 = d.p0;
  const double c1 = d.p0 + d.p1;
  out.tags.reserve(static_cast<std::size_t>(double(n_pulses) * d.mean() * 1.01) + 16);
  for (std::int64_t k = 0; k < n_pulses; ++k) {
    const double u = rng.uniform();
    if (u < c0) continue;
    const int n = u < c1 ? 1 : 2;
    const timestamp_t t_pulse = pulse_time_ps(k, model.rep_rate_hz);
    for (int i = 0; i < n; ++i) {
      const timestamp_t t = t_pulse + std::llround(rng.exponential(model.lifetime_ps));
      if (t < out.duration_ps) out.tags.push_back({kSourceChannel, t});
    }
  }
  sort_tags(out.tags);
  return out;
}

// Poisson(mu) photons per pulse, all at the pulse time.
inline TagStream emit_laser_pulse_train(const PoissonLaserModel& model, std::int64_t n_pulses,
                                        std::uint64_t seed) {
  validate(model);
  if (n_pulses < 0) throw InvalidArgument("n_pulses must be >= 0");
  TagStream out;
  out.duration_ps = pulse_time_ps(n_pulses, model.rep_rate_hz);
  out.meta["source"] = "poisson-laser";
  out.meta["wavelength_nm"] = text::format_double(model.wavelength_nm);
  out.meta["seed"] = std::to_string(seed);
  if (model.mu == 0.0) return out;

  Rng rng(seed);
  out.tags.reserve(static_cast<std::size_t>(double(n_pulses) * model.mu * 1.01) + 16);
  for (std::int64_t k = 0; k < n_pulses; ++k) {
    const auto n = rng.poisson(model.mu);
    if (n == 0) continue;
    const timestamp_t t = pulse_time_ps(k, model.rep_rate_hz);
    out.tags.insert(out.tags.end(), n, TimeTag{kSourceChannel, t});
  }
  return out;
}

// Periodic sync stream (the fast photodiode monitoring the pump): one tag per
// pulse at the pulse time plus `delay_ps`; tags outside the window are dropped.
inline TagStream clock_stream(double rep_rate_hz, std::int64_t n_pulses, timestamp_t delay_ps,
                              channel_t channel = kClockChannel) {
  if (!(rep_rate_hz > 0.0)) throw InvalidArgument("rep_rate_hz must be > 0");
  if (n_pulses < 0) throw InvalidArgument("n_pulses must be >= 0");
  TagStream out;
  out.duration_ps = pulse_time_ps(n_pulses, rep_rate_hz);
  out.meta["source"] = "clock";
  out.tags.reserve(static_cast<std::size_t>(n_pulses));
  for (std::int64_t k = 0; k < n_pulses; ++k) {
    const timestamp_t t = pulse_time_ps(k, rep_rate_hz) + delay_ps;
    if (t >= 0 && t < out.duration_ps) out.tags.push_back({channel, t});
  }
  return out;
}

}  // namespace phc
