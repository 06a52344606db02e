#pragma once

// TAC/MCA emulation: delay histograms from start/stop timetag streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "photon_correlator/error.hpp"
#include "photon_correlator/text.hpp"
#include "photon_correlator/timetag.hpp"

namespace phc {

enum class StopMode {
  FirstStop,  // each start takes the earliest unconsumed stop at or after start + range_min
  AllStops,   // every start/stop pair with delay in range is counted
};

struct HistogramConfig {
  timestamp_t bin_width_ps = 32;
  timestamp_t range_min_ps = 0;
  timestamp_t range_max_ps = 0;
  StopMode mode = StopMode::AllStops;

  std::size_t bin_count() const noexcept {
    return static_cast<std::size_t>((range_max_ps - range_min_ps) / bin_width_ps);
  }

  friend bool operator==(const HistogramConfig&, const HistogramConfig&) = default;
};

inline void validate(const HistogramConfig& c) {
  if (c.bin_width_ps <= 0) throw InvalidArgument("histogram bin_width_ps must be > 0");
  if (c.range_max_ps <= c.range_min_ps) throw InvalidArgument("histogram range_max_ps must exceed range_min_ps");
  if ((c.range_max_ps - c.range_min_ps) % c.bin_width_ps != 0) {
    throw InvalidArgument("histogram range must be a whole number of bins");
  }
}

// Symmetric window of whole bins reaching at least `halfspan_ps` on each side of zero.
inline HistogramConfig symmetric_config(double halfspan_ps, timestamp_t bin_width_ps,
                                        StopMode mode = StopMode::AllStops) {
  if (bin_width_ps <= 0) throw InvalidArgument("histogram bin_width_ps must be > 0");
  const auto half_bins = static_cast<timestamp_t>(std::ceil(halfspan_ps / double(bin_width_ps)));
  return {bin_width_ps, -half_bins * bin_width_ps, half_bins * bin_width_ps, mode};
}

struct Histogram {
  HistogramConfig config;
  std::vector<std::uint64_t> counts;
  std::uint64_t n_starts = 0;

  explicit Histogram(const HistogramConfig& c = {1, 0, 1, StopMode::AllStops})
      : config(c) {
    validate(c);
    counts.assign(c.bin_count(), 0);
  }

  double bin_start(std::size_t i) const noexcept {
    return double(config.range_min_ps) + double(i) * double(config.bin_width_ps);
  }
  double bin_center(std::size_t i) const noexcept { return bin_start(i) + 0.5 * double(config.bin_width_ps); }

  std::uint64_t total() const noexcept {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }

  // Adds one delay; returns false when it falls outside [range_min, range_max).
  bool add(double delay_ps) noexcept {
    if (!(delay_ps >= double(config.range_min_ps) && delay_ps < double(config.range_max_ps))) return false;
    auto idx = static_cast<std::size_t>(
        std::floor((delay_ps - double(config.range_min_ps)) / double(config.bin_width_ps)));
    if (idx >= counts.size()) return false;
    ++counts[idx];
    return true;
  }

  friend bool operator==(const Histogram&, const Histogram&) = default;
};

inline Histogram tac_histogram(const TagStream& starts, const TagStream& stops, const HistogramConfig& config) {
  validate(config);
  require_sorted(starts, "tac_histogram start stream");
  require_sorted(stops, "tac_histogram stop stream");

  Histogram h(config);
  h.n_starts = starts.size();
  const auto& st = stops.tags;
  const auto w = config.bin_width_ps;
  std::size_t lb = 0;  // first stop with t >= start + range_min

  if (config.mode == StopMode::AllStops) {
    for (const auto& s : starts.tags) {
      const timestamp_t lo = s.t + config.range_min_ps;
      const timestamp_t hi = s.t + config.range_max_ps;
      while (lb < st.size() && st[lb].t < lo) ++lb;
      for (std::size_t j = lb; j < st.size() && st[j].t < hi; ++j) {
        ++h.counts[static_cast<std::size_t>((st[j].t - lo) / w)];
      }
    }
  } else {
    std::size_t next_free = 0;  // stops before this index are consumed or unreachable
    for (const auto& s : starts.tags) {
      const timestamp_t lo = s.t + config.range_min_ps;
      while (lb < st.size() && st[lb].t < lo) ++lb;
      const std::size_t j = std::max(lb, next_free);
      if (j < st.size() && st[j].t < s.t + config.range_max_ps) {
        ++h.counts[static_cast<std::size_t>((st[j].t - lo) / w)];
        next_free = j + 1;
      }
    }
  }
  return h;
}

// Delay from every detector tag to the next clock tag (t_clock >= t_det).
// Detector tags after the last clock tag have no stop and are skipped.
inline std::vector<timestamp_t> start_stop_delays(const TagStream& detector, const TagStream& clock) {
  if (clock.empty()) throw InvalidArgument("reverse start-stop: clock stream is empty");
  require_sorted(detector, "reverse start-stop detector stream");
  require_sorted(clock, "reverse start-stop clock stream");
  std::vector<timestamp_t> delays;
  delays.reserve(detector.size());
  std::size_t c = 0;
  for (const auto& d : detector.tags) {
    while (c < clock.tags.size() && clock.tags[c].t < d.t) ++c;
    if (c == clock.tags.size()) break;
    delays.push_back(clock.tags[c].t - d.t);
  }
  return delays;
}

// Reverse start-stop TCSPC histogram. With `remap_period_ps` set, each delay d
// is recorded as period - d so the axis reads as time after excitation.
inline Histogram reverse_start_stop(const TagStream& detector, const TagStream& clock,
                                    const HistogramConfig& config,
                                    std::optional<double> remap_period_ps = std::nullopt) {
  validate(config);
  const auto delays = start_stop_delays(detector, clock);
  Histogram h(config);
  h.n_starts = detector.size();
  for (auto d : delays) h.add(remap_period_ps ? *remap_period_ps - double(d) : double(d));
  return h;
}

inline Histogram merge_histograms(const Histogram& a, const Histogram& b) {
  if (!(a.config == b.config)) throw InvalidArgument("merge_histograms: configurations differ");
  Histogram out = a;
  for (std::size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += b.counts[i];
  out.n_starts += b.n_starts;
  return out;
}

// CSV: "# n_starts=<N> bin_width_ps=<w>", header "bin_start_ps,count", one row per bin.
inline std::string encode_histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out << "# n_starts=" << h.n_starts << " bin_width_ps=" << h.config.bin_width_ps << '\n';
  out << "bin_start_ps,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    out << h.config.range_min_ps + timestamp_t(i) * h.config.bin_width_ps << ',' << h.counts[i] << '\n';
  }
  return out.str();
}

inline Histogram decode_histogram_csv(std::string_view content, StopMode mode = StopMode::AllStops) {
  using Kind = FormatError::Kind;
  std::optional<std::uint64_t> n_starts;
  std::optional<timestamp_t> width;
  bool have_header = false;
  std::vector<timestamp_t> starts;
  std::vector<std::uint64_t> counts;
  std::size_t line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    line = text::trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream fields{std::string(line.substr(1))};
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq);
        const auto val = std::string_view(kv).substr(eq + 1);
        if (key == "n_starts") n_starts = text::parse_int<std::uint64_t>(val);
        if (key == "bin_width_ps") width = text::parse_int<timestamp_t>(val);
      }
      continue;
    }
    if (!have_header) {
      if (line != "bin_start_ps,count") throw FormatError(Kind::BadHeader, "expected header 'bin_start_ps,count'");
      have_header = true;
      continue;
    }
    const auto f = text::split(line, ',');
    const auto b = f.size() == 2 ? text::parse_int<timestamp_t>(f[0]) : std::nullopt;
    const auto c = f.size() == 2 ? text::parse_int<std::uint64_t>(f[1]) : std::nullopt;
    if (!b || !c) throw FormatError(Kind::BadRow, "bad histogram row at line " + std::to_string(line_no));
    starts.push_back(*b);
    counts.push_back(*c);
  }
  if (!have_header) throw FormatError(Kind::BadHeader, "missing histogram header");
  if (counts.empty()) throw FormatError(Kind::BadRow, "histogram has no bins");
  if (!width) {
    if (starts.size() < 2) throw FormatError(Kind::BadHeader, "bin_width_ps missing and not inferable");
    width = starts[1] - starts[0];
  }
  if (*width <= 0) throw FormatError(Kind::BadHeader, "bin_width_ps must be > 0");
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (starts[i] != starts[0] + timestamp_t(i) * *width) {
      throw FormatError(Kind::BadRow, "histogram bins not contiguous at row " + std::to_string(i));
    }
  }
  HistogramConfig cfg{*width, starts.front(), starts.front() + timestamp_t(counts.size()) * *width, mode};
  Histogram h(cfg);
  h.counts = std::move(counts);
  std::uint64_t total = 0;
  for (auto c : h.counts) total += c;
  h.n_starts = n_starts.value_or(total);
  return h;
}

}  // namespace phc
