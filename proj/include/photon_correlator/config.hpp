#pragma once

// Run configuration: a flat key=value format with [section] headers.
//
//   seed = 1
//   output_dir = out
//
//   [source.dot]              exactly one of [source.dot] / [source.laser]
//   rep_rate_hz = 82e6
//   lifetime_ps = 370
//   g2_target = 0.24          with mean_n; or give p0, p1, p2 directly
//   mean_n = 0.1
//   n_pulses = 10000000
//
//   [source.laser]
//   rep_rate_hz = 1e5
//   mu = 10
//   n_pulses = 100000
//
//   [detector.<name>]         efficiency, dark_rate_hz, jitter_fwhm_ps,
//                             dead_time_ps, channel; or bias_curve (CSV path,
//                             relative to the config file) + bias_fraction
//   [splitter]                transmission
//   [correlator]              bin_width_ps, range_min_ps, range_max_ps,
//                             mode = all_stops | first_stop
//   [hbt]                     start, stop (detector names)
//   [tcspc]                   detector, clock_delay_ps
//   [de_sweep]                detector, mu (comma separated)
//   [analysis.g2]             n_side_peaks, integration_halfwidth_ps
//   [analysis.lifetime]       fix_sigma_ps, weighted
//   [analysis.de]             weighted
//
// '#' starts a comment. Unknown sections or keys are rejected.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "photon_correlator/correlator.hpp"
#include "photon_correlator/detector.hpp"
#include "photon_correlator/error.hpp"
#include "photon_correlator/optics.hpp"
#include "photon_correlator/source.hpp"
#include "photon_correlator/text.hpp"

namespace phc {

struct SourceConfig {
  enum class Kind { Dot, Laser };
  Kind kind = Kind::Dot;
  PulsedSourceModel dot;
  PoissonLaserModel laser;
  std::optional<double> laser_mu;  // unset: sweeps use their largest mu
  std::int64_t n_pulses = 0;

  double rep_rate_hz() const { return kind == Kind::Dot ? dot.rep_rate_hz : laser.rep_rate_hz; }
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir;
  SourceConfig source;
  std::vector<DetectorModel> detectors;
  SplitRatio splitter;

  timestamp_t bin_width_ps = 32;
  std::optional<timestamp_t> range_min_ps;
  std::optional<timestamp_t> range_max_ps;
  StopMode mode = StopMode::AllStops;

  std::string hbt_start;
  std::string hbt_stop;
  std::string tcspc_detector;
  std::optional<timestamp_t> tcspc_clock_delay_ps;
  std::string de_detector;
  std::vector<double> de_mu;

  int g2_side_peaks = 20;
  std::optional<double> g2_halfwidth_ps;
  std::optional<double> lifetime_fix_sigma_ps;
  bool lifetime_weighted = false;
  bool de_weighted = false;

  const DetectorModel* find_detector(const std::string& name) const {
    for (const auto& d : detectors) {
      if (d.name == name) return &d;
    }
    return nullptr;
  }

  const DetectorModel& detector(const std::string& field, const std::string& name) const {
    if (name.empty()) throw ConfigError(field, "detector name required");
    if (const auto* d = find_detector(name)) return *d;
    throw ConfigError(field, "unknown detector '" + name + "'");
  }
};

namespace detail {

struct ConfigValue {
  std::string text;
  std::size_t line = 0;
  bool used = false;
};

struct ConfigSection {
  std::string name;
  std::map<std::string, ConfigValue> values;
};

class ConfigReader {
public:
  explicit ConfigReader(std::string_view content) {
    sections_.push_back({"", {}});
    std::size_t line_no = 0;
    std::set<std::string> seen{""};
    for (auto raw : text::split(content, '\n')) {
      ++line_no;
      auto line = raw;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = text::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no), "malformed section header");
        std::string name(text::trim(line.substr(1, line.size() - 2)));
        if (name.empty()) throw ConfigError("line " + std::to_string(line_no), "empty section name");
        if (!seen.insert(name).second) throw ConfigError(name, "duplicate section");
        sections_.push_back({name, {}});
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no), "expected key = value");
      std::string key(text::trim(line.substr(0, eq)));
      std::string value(text::trim(line.substr(eq + 1)));
      auto& sec = sections_.back();
      if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
      if (sec.values.count(key)) throw ConfigError(path(sec.name, key), "duplicate key");
      sec.values[key] = {value, line_no, false};
    }
  }

  std::vector<ConfigSection>& sections() { return sections_; }

  static std::string path(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  static std::optional<std::string> get(ConfigSection& s, const std::string& key) {
    auto it = s.values.find(key);
    if (it == s.values.end()) return std::nullopt;
    it->second.used = true;
    return it->second.text;
  }

  static std::optional<double> get_double(ConfigSection& s, const std::string& key) {
    const auto v = get(s, key);
    if (!v) return std::nullopt;
    const auto d = text::parse_double(*v);
    if (!d) throw ConfigError(path(s.name, key), "expected a number, got '" + *v + "'");
    return d;
  }

  template <typename Int>
  static std::optional<Int> get_int(ConfigSection& s, const std::string& key) {
    const auto v = get(s, key);
    if (!v) return std::nullopt;
    if (auto i = text::parse_int<Int>(*v)) return i;
    // Accept integral values written in floating notation, e.g. 1e7.
    const auto d = text::parse_double(*v);
    if (d && std::floor(*d) == *d && std::abs(*d) < 9.2e18) return static_cast<Int>(*d);
    throw ConfigError(path(s.name, key), "expected an integer, got '" + *v + "'");
  }

  static std::optional<bool> get_bool(ConfigSection& s, const std::string& key) {
    const auto v = get(s, key);
    if (!v) return std::nullopt;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(path(s.name, key), "expected true/false, got '" + *v + "'");
  }

  static void reject_unused(const ConfigSection& s) {
    for (const auto& [k, v] : s.values) {
      if (!v.used) throw ConfigError(path(s.name, k), "unknown key");
    }
  }

private:
  std::vector<ConfigSection> sections_;
};

inline std::vector<double> parse_double_list(const std::string& field, std::string_view s) {
  std::vector<double> out;
  if (text::trim(s).empty()) return out;
  for (auto item : text::split(s, ',')) {
    const auto v = text::parse_double(item);
    if (!v) throw ConfigError(field, "bad number '" + std::string(text::trim(item)) + "' in list");
    out.push_back(*v);
  }
  return out;
}

inline void check(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

inline std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + text::format_double(v[i]);
  return out;
}

}  // namespace detail

inline void validate_mu_list(const std::string& field, const std::vector<double>& mu) {
  for (double m : mu) detail::check(m >= 0.0 && std::isfinite(m), field, "mu values must be finite and >= 0");
}

// Parses and validates a run config. Relative bias-curve paths resolve
// against `base_dir`.
inline RunConfig parse_run_config(std::string_view content, const std::filesystem::path& base_dir = {}) {
  using detail::check;
  using R = detail::ConfigReader;
  R reader(content);
  RunConfig cfg;
  int source_blocks = 0;
  channel_t next_channel = 1;

  for (auto& sec : reader.sections()) {
    const auto& name = sec.name;
    const auto field = [&](const std::string& key) { return R::path(name, key); };

    if (name.empty()) {
      if (auto v = R::get_int<std::uint64_t>(sec, "seed")) cfg.seed = *v;
      if (auto v = R::get(sec, "output_dir")) cfg.output_dir = *v;
    } else if (name == "source.dot") {
      ++source_blocks;
      auto& m = cfg.source.dot;
      cfg.source.kind = SourceConfig::Kind::Dot;
      m.rep_rate_hz = R::get_double(sec, "rep_rate_hz").value_or(m.rep_rate_hz);
      m.lifetime_ps = R::get_double(sec, "lifetime_ps").value_or(m.lifetime_ps);
      m.wavelength_nm = R::get_double(sec, "wavelength_nm").value_or(m.wavelength_nm);
      check(m.rep_rate_hz > 0.0, field("rep_rate_hz"), "must be > 0");
      check(m.lifetime_ps >= 0.0, field("lifetime_ps"), "must be >= 0");
      const auto g2 = R::get_double(sec, "g2_target");
      const auto mean = R::get_double(sec, "mean_n");
      const auto p0 = R::get_double(sec, "p0");
      const auto p1 = R::get_double(sec, "p1");
      const auto p2 = R::get_double(sec, "p2");
      if (g2 || mean) {
        check(g2 && mean, field(g2 ? "mean_n" : "g2_target"), "g2_target and mean_n must be given together");
        check(!p0 && !p1 && !p2, field("p0"), "give either g2_target/mean_n or p0/p1/p2, not both");
        try {
          m.photon_dist = solve_photon_stats(*g2, *mean);
        } catch (const InvalidArgument& e) {
          throw ConfigError(field("g2_target"), e.what());
        }
      } else {
        check(p0 && p1 && p2, field("p0"), "photon statistics required: g2_target/mean_n or p0/p1/p2");
        m.photon_dist = {*p0, *p1, *p2};
        try {
          validate(m.photon_dist);
        } catch (const InvalidArgument& e) {
          throw ConfigError(field("p0"), e.what());
        }
      }
      const auto n = R::get_int<std::int64_t>(sec, "n_pulses");
      check(n.has_value(), field("n_pulses"), "required");
      check(*n >= 0, field("n_pulses"), "must be >= 0");
      cfg.source.n_pulses = *n;
    } else if (name == "source.laser") {
      ++source_blocks;
      auto& m = cfg.source.laser;
      cfg.source.kind = SourceConfig::Kind::Laser;
      m.rep_rate_hz = R::get_double(sec, "rep_rate_hz").value_or(m.rep_rate_hz);
      m.wavelength_nm = R::get_double(sec, "wavelength_nm").value_or(m.wavelength_nm);
      check(m.rep_rate_hz > 0.0, field("rep_rate_hz"), "must be > 0");
      cfg.source.laser_mu = R::get_double(sec, "mu");
      if (cfg.source.laser_mu) {
        check(*cfg.source.laser_mu >= 0.0, field("mu"), "must be >= 0");
        m.mu = *cfg.source.laser_mu;
      }
      const auto n = R::get_int<std::int64_t>(sec, "n_pulses");
      check(n.has_value(), field("n_pulses"), "required");
      check(*n >= 0, field("n_pulses"), "must be >= 0");
      cfg.source.n_pulses = *n;
    } else if (name.rfind("detector.", 0) == 0) {
      DetectorModel d;
      d.name = name.substr(9);
      check(!d.name.empty(), name, "detector name missing");
      d.channel = next_channel;
      if (auto v = R::get_int<unsigned>(sec, "channel")) {
        check(*v < 256 && *v != kSourceChannel && *v != kClockChannel, field("channel"),
              "must be in 1..255 and not the clock channel");
        d.channel = static_cast<channel_t>(*v);
      }
      next_channel = static_cast<channel_t>(std::max<unsigned>(next_channel, d.channel) + 1);
      const auto curve_path = R::get(sec, "bias_curve");
      const auto bias = R::get_double(sec, "bias_fraction");
      if (curve_path || bias) {
        check(curve_path && bias, field(curve_path ? "bias_fraction" : "bias_curve"),
              "bias_curve and bias_fraction must be given together");
        check(!sec.values.count("efficiency") && !sec.values.count("dark_rate_hz"), field("bias_curve"),
              "efficiency/dark_rate_hz come from the bias curve");
        std::filesystem::path p(*curve_path);
        if (p.is_relative()) p = base_dir / p;
        std::ifstream in(p, std::ios::binary);
        check(bool(in), field("bias_curve"), "cannot open " + p.string());
        std::string content((std::istreambuf_iterator<char>(in)), {});
        try {
          const auto op = bias_lookup(decode_bias_curve_csv(content), *bias);
          d.efficiency = op.efficiency;
          d.dark_rate_hz = op.dark_rate_hz;
        } catch (const Error& e) {
          throw ConfigError(field("bias_fraction"), e.what());
        }
      } else {
        d.efficiency = R::get_double(sec, "efficiency").value_or(d.efficiency);
        d.dark_rate_hz = R::get_double(sec, "dark_rate_hz").value_or(d.dark_rate_hz);
      }
      d.jitter_fwhm_ps = R::get_double(sec, "jitter_fwhm_ps").value_or(0.0);
      d.dead_time_ps = R::get_int<timestamp_t>(sec, "dead_time_ps").value_or(0);
      check(d.efficiency >= 0.0 && d.efficiency <= 1.0, field("efficiency"), "must lie in [0, 1]");
      check(d.dark_rate_hz >= 0.0, field("dark_rate_hz"), "must be >= 0");
      check(d.jitter_fwhm_ps >= 0.0, field("jitter_fwhm_ps"), "must be >= 0");
      check(d.dead_time_ps >= 0, field("dead_time_ps"), "must be >= 0");
      for (const auto& other : cfg.detectors) {
        check(other.channel != d.channel, field("channel"), "channel already used by detector " + other.name);
      }
      cfg.detectors.push_back(d);
    } else if (name == "splitter") {
      cfg.splitter.transmission = R::get_double(sec, "transmission").value_or(0.5);
      check(cfg.splitter.transmission >= 0.0 && cfg.splitter.transmission <= 1.0, field("transmission"),
            "must lie in [0, 1]");
    } else if (name == "correlator") {
      cfg.bin_width_ps = R::get_int<timestamp_t>(sec, "bin_width_ps").value_or(cfg.bin_width_ps);
      check(cfg.bin_width_ps > 0, field("bin_width_ps"), "must be > 0");
      cfg.range_min_ps = R::get_int<timestamp_t>(sec, "range_min_ps");
      cfg.range_max_ps = R::get_int<timestamp_t>(sec, "range_max_ps");
      check(cfg.range_min_ps.has_value() == cfg.range_max_ps.has_value(), field("range_min_ps"),
            "range_min_ps and range_max_ps must be given together");
      if (cfg.range_min_ps) {
        check(*cfg.range_max_ps > *cfg.range_min_ps, field("range_max_ps"), "must exceed range_min_ps");
        check((*cfg.range_max_ps - *cfg.range_min_ps) % cfg.bin_width_ps == 0, field("range_max_ps"),
              "range must be a whole number of bins");
      }
      if (auto v = R::get(sec, "mode")) {
        check(*v == "all_stops" || *v == "first_stop", field("mode"), "must be all_stops or first_stop");
        cfg.mode = *v == "all_stops" ? StopMode::AllStops : StopMode::FirstStop;
      }
    } else if (name == "hbt") {
      cfg.hbt_start = R::get(sec, "start").value_or("");
      cfg.hbt_stop = R::get(sec, "stop").value_or("");
    } else if (name == "tcspc") {
      cfg.tcspc_detector = R::get(sec, "detector").value_or("");
      cfg.tcspc_clock_delay_ps = R::get_int<timestamp_t>(sec, "clock_delay_ps");
    } else if (name == "de_sweep") {
      cfg.de_detector = R::get(sec, "detector").value_or("");
      if (auto v = R::get(sec, "mu")) {
        cfg.de_mu = detail::parse_double_list(field("mu"), *v);
        validate_mu_list(field("mu"), cfg.de_mu);
      }
    } else if (name == "analysis.g2") {
      cfg.g2_side_peaks = R::get_int<int>(sec, "n_side_peaks").value_or(cfg.g2_side_peaks);
      check(cfg.g2_side_peaks >= 2, field("n_side_peaks"), "must be >= 2");
      cfg.g2_halfwidth_ps = R::get_double(sec, "integration_halfwidth_ps");
      if (cfg.g2_halfwidth_ps) check(*cfg.g2_halfwidth_ps > 0.0, field("integration_halfwidth_ps"), "must be > 0");
    } else if (name == "analysis.lifetime") {
      cfg.lifetime_fix_sigma_ps = R::get_double(sec, "fix_sigma_ps");
      if (cfg.lifetime_fix_sigma_ps) check(*cfg.lifetime_fix_sigma_ps >= 0.0, field("fix_sigma_ps"), "must be >= 0");
      cfg.lifetime_weighted = R::get_bool(sec, "weighted").value_or(false);
    } else if (name == "analysis.de") {
      cfg.de_weighted = R::get_bool(sec, "weighted").value_or(false);
    } else {
      throw ConfigError(name, "unknown section");
    }
    R::reject_unused(sec);
  }

  check(source_blocks == 1, "source", "exactly one [source.dot] or [source.laser] block required");
  for (const auto& [f, n] : {std::pair{"hbt.start", cfg.hbt_start}, {"hbt.stop", cfg.hbt_stop},
                             {"tcspc.detector", cfg.tcspc_detector}, {"de_sweep.detector", cfg.de_detector}}) {
    if (!n.empty()) cfg.detector(f, n);
  }
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::string content((std::istreambuf_iterator<char>(in)), {});
  return parse_run_config(content, path.parent_path());
}

// Canonical text of the effective configuration; parses back to the same run.
inline std::string to_config_text(const RunConfig& c) {
  const auto f = text::format_double;
  std::ostringstream o;
  o << "seed = " << c.seed << '\n';
  if (!c.output_dir.empty()) o << "output_dir = " << c.output_dir << '\n';
  if (c.source.kind == SourceConfig::Kind::Dot) {
    const auto& m = c.source.dot;
    o << "\n[source.dot]\nrep_rate_hz = " << f(m.rep_rate_hz) << "\nlifetime_ps = " << f(m.lifetime_ps)
      << "\nwavelength_nm = " << f(m.wavelength_nm) << "\np0 = " << f(m.photon_dist.p0)
      << "\np1 = " << f(m.photon_dist.p1) << "\np2 = " << f(m.photon_dist.p2) << '\n';
  } else {
    const auto& m = c.source.laser;
    o << "\n[source.laser]\nrep_rate_hz = " << f(m.rep_rate_hz) << "\nwavelength_nm = " << f(m.wavelength_nm) << '\n';
    if (c.source.laser_mu) o << "mu = " << f(*c.source.laser_mu) << '\n';
  }
  o << "n_pulses = " << c.source.n_pulses << '\n';
  for (const auto& d : c.detectors) {
    o << "\n[detector." << d.name << "]\nchannel = " << unsigned(d.channel) << "\nefficiency = " << f(d.efficiency)
      << "\ndark_rate_hz = " << f(d.dark_rate_hz) << "\njitter_fwhm_ps = " << f(d.jitter_fwhm_ps)
      << "\ndead_time_ps = " << d.dead_time_ps << '\n';
  }
  o << "\n[splitter]\ntransmission = " << f(c.splitter.transmission) << '\n';
  o << "\n[correlator]\nbin_width_ps = " << c.bin_width_ps << '\n';
  if (c.range_min_ps) o << "range_min_ps = " << *c.range_min_ps << "\nrange_max_ps = " << *c.range_max_ps << '\n';
  o << "mode = " << (c.mode == StopMode::AllStops ? "all_stops" : "first_stop") << '\n';
  if (!c.hbt_start.empty() || !c.hbt_stop.empty()) {
    o << "\n[hbt]\n";
    if (!c.hbt_start.empty()) o << "start = " << c.hbt_start << '\n';
    if (!c.hbt_stop.empty()) o << "stop = " << c.hbt_stop << '\n';
  }
  if (!c.tcspc_detector.empty() || c.tcspc_clock_delay_ps) {
    o << "\n[tcspc]\n";
    if (!c.tcspc_detector.empty()) o << "detector = " << c.tcspc_detector << '\n';
    if (c.tcspc_clock_delay_ps) o << "clock_delay_ps = " << *c.tcspc_clock_delay_ps << '\n';
  }
  if (!c.de_detector.empty() || !c.de_mu.empty()) {
    o << "\n[de_sweep]\n";
    if (!c.de_detector.empty()) o << "detector = " << c.de_detector << '\n';
    if (!c.de_mu.empty()) o << "mu = " << detail::format_list(c.de_mu) << '\n';
  }
  o << "\n[analysis.g2]\nn_side_peaks = " << c.g2_side_peaks << '\n';
  if (c.g2_halfwidth_ps) o << "integration_halfwidth_ps = " << f(*c.g2_halfwidth_ps) << '\n';
  o << "\n[analysis.lifetime]\n";
  if (c.lifetime_fix_sigma_ps) o << "fix_sigma_ps = " << f(*c.lifetime_fix_sigma_ps) << '\n';
  o << "weighted = " << (c.lifetime_weighted ? "true" : "false") << '\n';
  o << "\n[analysis.de]\nweighted = " << (c.de_weighted ? "true" : "false") << '\n';
  return o.str();
}

}  // namespace phc
