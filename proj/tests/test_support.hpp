#pragma once

// Small statistics helpers shared by the test suites. These deliberately use
// std:: distributions rather than the library's own sampler so that they act
// as independent oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "photon_correlator/timetag.hpp"

namespace phc::testing {

// 1% critical values.
inline constexpr double kKsCritical1pct = 1.6276236115189502;  // sqrt(n) * D
inline double chi2_critical_1pct(int dof) {
  static const double table[] = {0, 6.634896601021214, 9.21034037197618, 11.344866730144373, 13.276704135987622,
                                 15.08627246938899, 16.811893829770927, 18.475306906582357};
  return table[dof];
}

// Kolmogorov-Smirnov statistic of samples against a continuous CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (double(i) + 1.0) / n - f, f - double(i) / n});
  }
  return d;
}

inline double ks_sqrt_n(const std::vector<double>& x, const std::function<double(double)>& cdf) {
  return ks_statistic(x, cdf) * std::sqrt(double(x.size()));
}

// KS statistic (times sqrt(n)) of integer samples against the CDF of an
// integer-valued law; `cdf(k)` is P(X <= k). Continuous critical values are
// conservative here.
inline double discrete_ks_sqrt_n(std::vector<std::int64_t> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size();) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    const double k = double(x[i]);
    d = std::max({d, std::abs(double(j) / n - cdf(k)), std::abs(double(i) / n - cdf(k - 1.0))});
    i = j;
  }
  return d * std::sqrt(n);
}

// Pearson chi-square of observed counts against expected counts.
inline double chi_square(const std::vector<double>& observed, const std::vector<double>& expected) {
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    s += d * d / expected[i];
  }
  return s;
}

// Homogeneous Poisson arrivals on [0, duration) at `rate_hz`, channel `ch`.
inline TagStream poisson_stream(double rate_hz, timestamp_t duration_ps, std::uint64_t seed, channel_t ch = 0) {
  std::mt19937_64 gen(seed);
  std::exponential_distribution<double> gap(rate_hz * 1e-12);
  TagStream s;
  s.duration_ps = duration_ps;
  for (double t = gap(gen); t < double(duration_ps); t += gap(gen)) {
    s.tags.push_back({ch, static_cast<timestamp_t>(t)});
  }
  return s;
}

// Random sorted stream with channels drawn from [0, max_channel].
inline TagStream random_stream(std::mt19937_64& gen, std::size_t n, int max_channel = 255) {
  std::uniform_int_distribution<int> ch(0, max_channel);
  std::uniform_int_distribution<timestamp_t> t(0, std::int64_t{1} << 40);
  TagStream s;
  for (std::size_t i = 0; i < n; ++i) s.tags.push_back({static_cast<channel_t>(ch(gen)), t(gen)});
  sort_tags(s.tags);
  s.duration_ps = s.tags.empty() ? 1 : s.tags.back().t + 1 + t(gen) % 1000;
  return s;
}

// Mean and standard error of a ratio estimator by batch means.
struct BatchEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

inline BatchEstimate batch_estimate(const std::vector<double>& batch_values) {
  const double n = double(batch_values.size());
  const double mean = std::accumulate(batch_values.begin(), batch_values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : batch_values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

class TempDir {
public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("phc_" + name + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

}  // namespace phc::testing
