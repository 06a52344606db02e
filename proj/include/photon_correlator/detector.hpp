#pragma once

// Parametric single-photon detector: efficiency, dark counts, Gaussian timing
// jitter and non-paralyzable dead time. Bias dependence enters only through
// tabulated curves chosen before a run.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "photon_correlator/error.hpp"
#include "photon_correlator/random.hpp"
#include "photon_correlator/text.hpp"
#include "photon_correlator/timetag.hpp"

namespace phc {

// FWHM of a Gaussian in units of its standard deviation, 2 sqrt(2 ln 2).
inline const double kFwhmPerSigma = 2.0 * std::sqrt(2.0 * std::numbers::ln2);

inline double fwhm_to_sigma(double fwhm) { return fwhm / kFwhmPerSigma; }
inline double sigma_to_fwhm(double sigma) { return sigma * kFwhmPerSigma; }

struct DetectorModel {
  std::string name;
  double efficiency = 1.0;
  double dark_rate_hz = 0.0;
  double jitter_fwhm_ps = 0.0;
  timestamp_t dead_time_ps = 0;
  channel_t channel = 1;
};

inline void validate(const DetectorModel& m) {
  if (!(m.efficiency >= 0.0 && m.efficiency <= 1.0)) {
    throw InvalidArgument("detector " + m.name + ": efficiency must lie in [0, 1]");
  }
  if (!(m.dark_rate_hz >= 0.0)) throw InvalidArgument("detector " + m.name + ": dark_rate_hz must be >= 0");
  if (!(m.jitter_fwhm_ps >= 0.0)) throw InvalidArgument("detector " + m.name + ": jitter_fwhm_ps must be >= 0");
  if (m.dead_time_ps < 0) throw InvalidArgument("detector " + m.name + ": dead_time_ps must be >= 0");
}

// Pipeline: efficiency thinning, Poisson dark counts over [0, duration),
// Gaussian jitter clamped into the window, sort, non-paralyzable dead time.
inline TagStream detect(const TagStream& photons, const DetectorModel& model, std::uint64_t seed) {
  validate(model);
  if (photons.duration_ps <= 0) throw InvalidArgument("detect: input stream has no duration");
  require_sorted(photons, "detect input");

  Rng rng(seed);
  std::vector<TimeTag> tags;
  tags.reserve(static_cast<std::size_t>(double(photons.size()) * model.efficiency * 1.05) + 16);
  for (const auto& p : photons.tags) {
    if (rng.bernoulli(model.efficiency)) tags.push_back({model.channel, p.t});
  }

  if (model.dark_rate_hz > 0.0) {
    const double mean_gap_ps = 1e12 / model.dark_rate_hz;
    double t = rng.exponential(mean_gap_ps);
    while (t < double(photons.duration_ps)) {
      tags.push_back({model.channel, static_cast<timestamp_t>(std::floor(t))});
      t += rng.exponential(mean_gap_ps);
    }
  }

  const timestamp_t last = photons.duration_ps - 1;
  if (model.jitter_fwhm_ps > 0.0) {
    const double sigma = fwhm_to_sigma(model.jitter_fwhm_ps);
    for (auto& tag : tags) {
      const auto shifted = tag.t + std::llround(sigma * rng.normal());
      tag.t = std::clamp<timestamp_t>(shifted, 0, last);
    }
  }

  sort_tags(tags);

  TagStream out;
  out.duration_ps = photons.duration_ps;
  out.meta = photons.meta;
  out.meta["detector"] = model.name;
  out.tags.reserve(tags.size());
  bool have_last = false;
  timestamp_t last_accepted = 0;
  for (const auto& tag : tags) {
    if (have_last && tag.t - last_accepted < model.dead_time_ps) continue;
    out.tags.push_back(tag);
    last_accepted = tag.t;
    have_last = true;
  }
  return out;
}

struct BiasCurvePoint {
  double bias_fraction = 0.0;  // I_bias / I_c
  double efficiency = 0.0;
  double dark_rate_hz = 0.0;

  friend bool operator==(const BiasCurvePoint&, const BiasCurvePoint&) = default;
};

struct BiasOperatingPoint {
  double efficiency = 0.0;
  double dark_rate_hz = 0.0;
};

inline void validate_curve(const std::vector<BiasCurvePoint>& curve) {
  if (curve.empty()) throw InvalidArgument("bias curve is empty");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& p = curve[i];
    if (!(p.bias_fraction > 0.0 && p.bias_fraction < 1.0)) {
      throw InvalidArgument("bias curve point " + std::to_string(i) + ": bias_fraction must lie in (0, 1)");
    }
    if (!(p.efficiency >= 0.0 && p.efficiency <= 1.0) || !(p.dark_rate_hz >= 0.0)) {
      throw InvalidArgument("bias curve point " + std::to_string(i) + ": efficiency or dark rate out of range");
    }
    if (i > 0 && !(p.bias_fraction > curve[i - 1].bias_fraction)) {
      throw InvalidArgument("bias curve not strictly increasing at point " + std::to_string(i));
    }
  }
}

// Linear in efficiency, linear in log10(dark rate). A zero dark rate at
// either bracket falls back to linear interpolation of the rate itself.
inline BiasOperatingPoint bias_lookup(const std::vector<BiasCurvePoint>& curve, double bias_fraction) {
  validate_curve(curve);
  if (!(bias_fraction >= curve.front().bias_fraction && bias_fraction <= curve.back().bias_fraction)) {
    throw InvalidArgument("bias_fraction " + text::format_double(bias_fraction) +
                          " outside tabulated range [" + text::format_double(curve.front().bias_fraction) +
                          ", " + text::format_double(curve.back().bias_fraction) + "]");
  }
  auto hi = std::lower_bound(curve.begin(), curve.end(), bias_fraction,
                             [](const BiasCurvePoint& p, double b) { return p.bias_fraction < b; });
  if (hi->bias_fraction == bias_fraction) return {hi->efficiency, hi->dark_rate_hz};
  const auto& b = *hi;
  const auto& a = *(hi - 1);
  const double w = (bias_fraction - a.bias_fraction) / (b.bias_fraction - a.bias_fraction);
  BiasOperatingPoint out;
  out.efficiency = a.efficiency + w * (b.efficiency - a.efficiency);
  if (a.dark_rate_hz > 0.0 && b.dark_rate_hz > 0.0) {
    const double la = std::log10(a.dark_rate_hz);
    const double lb = std::log10(b.dark_rate_hz);
    out.dark_rate_hz = std::pow(10.0, la + w * (lb - la));
  } else {
    out.dark_rate_hz = a.dark_rate_hz + w * (b.dark_rate_hz - a.dark_rate_hz);
  }
  return out;
}

inline std::string encode_bias_curve_csv(const std::vector<BiasCurvePoint>& curve) {
  std::ostringstream out;
  out << "bias_fraction,efficiency,dark_rate_hz\n";
  for (const auto& p : curve) {
    out << text::format_double(p.bias_fraction) << ',' << text::format_double(p.efficiency) << ','
        << text::format_double(p.dark_rate_hz) << '\n';
  }
  return out.str();
}

inline std::vector<BiasCurvePoint> decode_bias_curve_csv(std::string_view content) {
  using Kind = FormatError::Kind;
  std::vector<BiasCurvePoint> curve;
  bool have_header = false;
  std::size_t line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      if (line != "bias_fraction,efficiency,dark_rate_hz") {
        throw FormatError(Kind::BadHeader, "expected header 'bias_fraction,efficiency,dark_rate_hz'");
      }
      have_header = true;
      continue;
    }
    const auto f = text::split(line, ',');
    if (f.size() != 3) throw FormatError(Kind::BadRow, "bad bias curve row at line " + std::to_string(line_no));
    const auto b = text::parse_double(f[0]);
    const auto e = text::parse_double(f[1]);
    const auto d = text::parse_double(f[2]);
    if (!b || !e || !d) throw FormatError(Kind::BadRow, "bad bias curve row at line " + std::to_string(line_no));
    curve.push_back({*b, *e, *d});
  }
  if (!have_header) throw FormatError(Kind::BadHeader, "missing bias curve header");
  try {
    validate_curve(curve);
  } catch (const InvalidArgument& e) {
    throw FormatError(Kind::BadRow, e.what());
  }
  return curve;
}

}  // namespace phc
