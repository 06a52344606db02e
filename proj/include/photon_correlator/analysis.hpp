#pragma once

// Physics extraction from delay histograms: g2(0) from peak areas, peak
// widths, exponential-convolved-with-Gaussian lifetime fits, Gaussian IRF
// fits, and detection-efficiency / dark-rate calibration fits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "photon_correlator/correlator.hpp"
#include "photon_correlator/detector.hpp"
#include "photon_correlator/error.hpp"
#include "photon_correlator/levenberg_marquardt.hpp"
#include "photon_correlator/text.hpp"

namespace phc {

// ---------------------------------------------------------------------------
// Special functions

// exp(x^2) * erfc(x), finite for large positive x.
inline double erfcx(double x) {
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  // Asymptotic series; at x >= 25 the eighth term is below 1e-20 relative.
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 8; ++k) {
    term *= -(2.0 * k - 1.0) * inv2x2;
    sum += term;
  }
  return sum / (x * std::sqrt(std::numbers::pi));
}

// ---------------------------------------------------------------------------
// g2(0)

struct G2Estimate {
  double g2_zero = 0.0;
  double sigma = 0.0;
  std::uint64_t center_area = 0;
  std::vector<std::uint64_t> side_areas;
  int n_side_peaks = 0;

  double mean_side_area() const {
    if (side_areas.empty()) return 0.0;
    return double(std::accumulate(side_areas.begin(), side_areas.end(), std::uint64_t{0})) /
           double(side_areas.size());
  }
};

inline constexpr int kDefaultSidePeaks = 20;

inline double default_integration_halfwidth(double rep_period_ps, timestamp_t bin_width_ps) {
  return rep_period_ps / 2.0 - double(bin_width_ps);
}

// Sum of counts in bins whose centers lie within +-halfwidth of `center`.
inline std::uint64_t window_area(const Histogram& h, double center, double halfwidth) {
  const double lo = center - halfwidth;
  const double hi = center + halfwidth;
  if (lo < double(h.config.range_min_ps) || hi > double(h.config.range_max_ps)) {
    throw InvalidArgument("peak window [" + text::format_double(lo) + ", " + text::format_double(hi) +
                          "] ps lies outside the histogram range");
  }
  std::uint64_t area = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (std::abs(h.bin_center(i) - center) <= halfwidth) area += h.counts[i];
  }
  return area;
}

// True when the histogram reaches the first negative side peak, in which case
// side peaks are taken from both sides (n/2 each), else the first n positive.
inline bool two_sided(const Histogram& h, double rep_period_ps, double halfwidth_ps) {
  return double(h.config.range_min_ps) <= -rep_period_ps - halfwidth_ps;
}

// Area of the zero-delay peak over the mean area of `n_side_peaks` peaks at
// multiples of the repetition period.
inline G2Estimate g2_zero(const Histogram& h, double rep_period_ps, double halfwidth_ps,
                          int n_side_peaks = kDefaultSidePeaks) {
  if (!(rep_period_ps > 0.0)) throw InvalidArgument("g2_zero: rep_period_ps must be > 0");
  if (!(halfwidth_ps > 0.0 && halfwidth_ps < rep_period_ps / 2.0)) {
    throw InvalidArgument("g2_zero: integration halfwidth must lie in (0, rep_period/2)");
  }
  if (n_side_peaks < 2) throw InvalidArgument("g2_zero: need at least 2 side peaks");

  G2Estimate g;
  g.n_side_peaks = n_side_peaks;
  g.center_area = window_area(h, 0.0, halfwidth_ps);
  const bool symmetric = two_sided(h, rep_period_ps, halfwidth_ps);
  if (symmetric) {
    if (n_side_peaks % 2 != 0) throw InvalidArgument("g2_zero: two-sided histograms need an even peak count");
    for (int k = 1; k <= n_side_peaks / 2; ++k) {
      g.side_areas.push_back(window_area(h, -k * rep_period_ps, halfwidth_ps));
      g.side_areas.push_back(window_area(h, k * rep_period_ps, halfwidth_ps));
    }
  } else {
    for (int k = 1; k <= n_side_peaks; ++k) g.side_areas.push_back(window_area(h, k * rep_period_ps, halfwidth_ps));
  }

  const std::uint64_t side_total = std::accumulate(g.side_areas.begin(), g.side_areas.end(), std::uint64_t{0});
  if (side_total == 0) throw InvalidArgument("g2_zero: mean side-peak area is zero");
  // Integer numerator keeps the ratio exactly invariant under count scaling.
  g.g2_zero = double(g.center_area * std::uint64_t(n_side_peaks)) / double(side_total);
  if (g.center_area == 0) {
    g.sigma = double(n_side_peaks) / double(side_total);  // one-count upper bound
  } else {
    g.sigma = g.g2_zero * std::sqrt(1.0 / double(g.center_area) + 1.0 / double(side_total));
  }
  return g;
}

// Stacks the side peaks at +-k * rep_period onto a single window centred on
// zero, for width measurements with the statistics of all peaks combined.
inline Histogram fold_side_peaks(const Histogram& h, double rep_period_ps, int n_side_peaks, double halfwidth_ps) {
  const auto w = h.config.bin_width_ps;
  Histogram out(symmetric_config(halfwidth_ps + double(w), w, h.config.mode));
  out.n_starts = h.n_starts;
  const bool symmetric = two_sided(h, rep_period_ps, halfwidth_ps);
  std::vector<double> centers;
  if (symmetric) {
    for (int k = 1; k <= n_side_peaks / 2; ++k) {
      centers.push_back(-k * rep_period_ps);
      centers.push_back(k * rep_period_ps);
    }
  } else {
    for (int k = 1; k <= n_side_peaks; ++k) centers.push_back(k * rep_period_ps);
  }
  for (double c : centers) {
    if (c - halfwidth_ps < double(h.config.range_min_ps) || c + halfwidth_ps > double(h.config.range_max_ps)) {
      throw InvalidArgument("fold_side_peaks: peak window outside the histogram range");
    }
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      const double off = h.bin_center(i) - c;
      if (std::abs(off) > halfwidth_ps || h.counts[i] == 0) continue;
      const auto idx = static_cast<std::size_t>(std::floor((off - double(out.config.range_min_ps)) / double(w)));
      if (idx < out.counts.size()) out.counts[idx] += h.counts[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Peak width

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = (m + *std::max_element(v.begin(), v.begin() + std::ptrdiff_t(mid))) / 2.0;
  }
  return m;
}

// FWHM by linear interpolation across the half-maximum on both sides of the
// highest bin, after subtracting the median of the window's outer 20%.
// A lone nonzero bin has FWHM equal to one bin width under this rule.
inline double peak_fwhm(const Histogram& h, double center_ps, double search_halfwidth_ps) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (std::abs(h.bin_center(i) - center_ps) <= search_halfwidth_ps) idx.push_back(i);
  }
  if (idx.size() < 3) throw InvalidArgument("peak_fwhm: search window covers fewer than 3 bins");

  std::vector<double> edge;
  for (auto i : idx) {
    if (std::abs(h.bin_center(i) - center_ps) >= 0.8 * search_halfwidth_ps) edge.push_back(double(h.counts[i]));
  }
  const double baseline = median(edge);

  std::vector<double> v(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) v[k] = double(h.counts[idx[k]]) - baseline;
  const auto m = std::size_t(std::max_element(v.begin(), v.end()) - v.begin());
  if (m == 0 || m + 1 == v.size()) throw InvalidArgument("peak_fwhm: maximum not strictly inside the window");
  if (!(v[m] > 0.0)) throw InvalidArgument("peak_fwhm: no peak above baseline");
  const double half = v[m] / 2.0;
  const double w = double(h.config.bin_width_ps);
  const auto x = [&](std::size_t k) { return h.bin_center(idx[k]); };

  std::optional<double> left, right;
  for (std::size_t k = m; k-- > 0;) {
    if (v[k] < half) {
      left = x(k) + (half - v[k]) / (v[k + 1] - v[k]) * w;
      break;
    }
  }
  for (std::size_t k = m + 1; k < v.size(); ++k) {
    if (v[k] < half) {
      right = x(k) - (half - v[k]) / (v[k - 1] - v[k]) * w;
      break;
    }
  }
  if (!left || !right) throw InvalidArgument("peak_fwhm: half maximum not crossed on both sides");
  return *right - *left;
}

// ---------------------------------------------------------------------------
// Exponential decay convolved with a Gaussian IRF

struct DecayParams {
  double amplitude = 0.0;
  double t0_ps = 0.0;
  double tau_ps = 1.0;
  double sigma_ps = 0.0;
  double background = 0.0;
};

namespace detail {

// Unit-amplitude signal part of the decay model and the Gaussian factor
// exp(-x^2 / (2 sigma^2)), with x = t - t0.
struct DecayTerms {
  double signal;
  double gauss;
};

inline DecayTerms decay_terms(double x, double tau, double sigma) {
  const double z = (sigma / tau - x / sigma) / std::numbers::sqrt2;
  const double gauss = std::exp(-x * x / (2.0 * sigma * sigma));
  double s;
  if (z >= 0.0) {
    s = 0.5 * gauss * erfcx(z);
  } else {
    s = 0.5 * std::exp(sigma * sigma / (2.0 * tau * tau) - x / tau) * std::erfc(z);
  }
  return {s, gauss};
}

}  // namespace detail

// background + (A/2) exp(sigma^2/(2 tau^2) - (t-t0)/tau) erfc((sigma/tau - (t-t0)/sigma)/sqrt 2)
//
// With sigma = 0 this is the bare decay A exp(-(t-t0)/tau) for t > t0 and the
// background before it; exactly at t = t0 it returns background + A/2, the
// value erfc(0) = 1 gives.
inline double decay_model(double t_ps, double tau_ps, double sigma_ps, double amplitude, double t0_ps,
                          double background) {
  const double x = t_ps - t0_ps;
  if (sigma_ps <= 0.0) {
    if (x > 0.0) return background + amplitude * std::exp(-x / tau_ps);
    if (x == 0.0) return background + amplitude / 2.0;
    return background;
  }
  return background + amplitude * detail::decay_terms(x, tau_ps, sigma_ps).signal;
}

inline double decay_model(double t_ps, const DecayParams& p) {
  return decay_model(t_ps, p.tau_ps, p.sigma_ps, p.amplitude, p.t0_ps, p.background);
}

// Partial derivatives in the order (amplitude, t0, tau, sigma, background).
// Requires sigma > 0.
inline std::array<double, 5> decay_model_gradient(double t_ps, const DecayParams& p) {
  const double x = t_ps - p.t0_ps;
  const double tau = p.tau_ps;
  const double sig = p.sigma_ps;
  const auto [s, gauss] = detail::decay_terms(x, tau, sig);
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double ds_dx = -s / tau + gauss * inv_sqrt_2pi / sig;
  const double ds_dtau = s * (x / (tau * tau) - sig * sig / (tau * tau * tau)) + gauss * sig * inv_sqrt_2pi / (tau * tau);
  const double ds_dsig = s * sig / (tau * tau) - gauss * inv_sqrt_2pi * (1.0 / tau + x / (sig * sig));
  return {s, -p.amplitude * ds_dx, p.amplitude * ds_dtau, p.amplitude * ds_dsig, 1.0};
}

struct LifetimeFit {
  double tau_ps = 0.0;
  double sigma_ps = 0.0;
  double irf_fwhm_ps = 0.0;
  double amplitude = 0.0;
  double t0_ps = 0.0;
  double background = 0.0;
  double residual_rms = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct LifetimeFitOptions {
  std::optional<double> fix_sigma_ps;
  std::optional<DecayParams> init;
  bool weighted = false;  // weights 1 / max(count, 1)
  LmOptions lm;
};

// Least-squares problem over (amplitude, t0, tau, sigma, background).
class LifetimeProblem {
public:
  LifetimeProblem(std::span<const double> t, std::span<const double> y, bool weighted)
      : t_(t.begin(), t.end()), y_(y.begin(), y.end()), sqrt_w_(y.size(), 1.0) {
    if (weighted) {
      for (std::size_t i = 0; i < y_.size(); ++i) sqrt_w_[i] = 1.0 / std::sqrt(std::max(y_[i], 1.0));
    }
  }

  static DecayParams unpack(const Eigen::VectorXd& p) { return {p(0), p(1), p(2), p(3), p(4)}; }

  Eigen::Index residual_count() const { return Eigen::Index(t_.size()); }

  void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    const auto d = unpack(p);
    for (std::size_t i = 0; i < t_.size(); ++i) r(Eigen::Index(i)) = sqrt_w_[i] * (decay_model(t_[i], d) - y_[i]);
  }

  void jacobian(const Eigen::VectorXd& p, Eigen::MatrixXd& J) const {
    const auto d = unpack(p);
    for (std::size_t i = 0; i < t_.size(); ++i) {
      const auto g = decay_model_gradient(t_[i], d);
      for (Eigen::Index j = 0; j < 5; ++j) J(Eigen::Index(i), j) = sqrt_w_[i] * g[std::size_t(j)];
    }
  }

private:
  std::vector<double> t_, y_, sqrt_w_;
};

namespace detail {

inline std::size_t count_nonzero(std::span<const double> y) {
  return std::size_t(std::count_if(y.begin(), y.end(), [](double v) { return v != 0.0; }));
}

inline double min_spacing(const std::vector<double>& t) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] > t[i - 1]) best = std::min(best, t[i] - t[i - 1]);
  }
  return std::isfinite(best) ? best : 1.0;
}

}  // namespace detail

inline DecayParams initial_decay_params(const std::vector<double>& t, const std::vector<double>& y,
                                        std::optional<double> fix_sigma) {
  const double spacing = detail::min_spacing(t);
  const auto peak = std::size_t(std::max_element(y.begin(), y.end()) - y.begin());
  DecayParams p;
  p.t0_ps = t[peak];
  p.amplitude = y[peak];
  const std::size_t head = std::max<std::size_t>(1, y.size() / 10);
  p.background = median(std::vector<double>(y.begin(), y.begin() + std::ptrdiff_t(head)));
  const double level = p.background + (p.amplitude - p.background) / std::numbers::e;
  p.tau_ps = 0.0;
  for (std::size_t i = peak + 1; i < y.size(); ++i) {
    if (y[i] <= level) {
      p.tau_ps = t[i] - t[peak];
      break;
    }
  }
  if (!(p.tau_ps > 0.0)) p.tau_ps = std::max(spacing, (t.back() - t[peak]) / 3.0);
  p.sigma_ps = fix_sigma.value_or(spacing);
  return p;
}

// Fits the decay model to (t, counts) samples. Samples are sorted by time
// before use, so the result does not depend on their order.
inline LifetimeFit fit_lifetime(std::span<const double> t_in, std::span<const double> y_in,
                                const LifetimeFitOptions& opt = {}) {
  if (t_in.size() != y_in.size()) throw InvalidArgument("fit_lifetime: time and count arrays differ in length");
  if (detail::count_nonzero(y_in) < 20) throw FitError("fit_lifetime: fewer than 20 nonzero bins");
  if (std::all_of(y_in.begin(), y_in.end(), [&](double v) { return v == y_in.front(); })) {
    throw FitError("fit_lifetime: degenerate histogram (all bins equal)");
  }
  if (opt.fix_sigma_ps && !(*opt.fix_sigma_ps >= 0.0)) throw InvalidArgument("fit_lifetime: fixed sigma must be >= 0");

  std::vector<std::size_t> order(t_in.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return t_in[a] != t_in[b] ? t_in[a] < t_in[b] : y_in[a] < y_in[b];
  });
  std::vector<double> t(order.size()), y(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    t[i] = t_in[order[i]];
    y[i] = y_in[order[i]];
  }

  const double spacing = detail::min_spacing(t);
  DecayParams init = opt.init.value_or(initial_decay_params(t, y, opt.fix_sigma_ps));
  // The model's sigma derivative is singular at 0; a fixed zero is nudged to a
  // value far below any sampling scale.
  const double sigma_floor = 1e-3 * spacing;
  if (opt.fix_sigma_ps) init.sigma_ps = std::max(*opt.fix_sigma_ps, sigma_floor);

  LifetimeProblem problem(t, y, opt.weighted);
  auto bounds = LmBounds::unbounded(5);
  bounds.lower(2) = 1e-3 * spacing;  // tau
  bounds.lower(3) = sigma_floor;     // sigma
  bounds.fixed[3] = opt.fix_sigma_ps.has_value();
  Eigen::VectorXd p0(5);
  p0 << init.amplitude, init.t0_ps, init.tau_ps, init.sigma_ps, init.background;
  const auto res = levenberg_marquardt(problem, p0, bounds, opt.lm);

  LifetimeFit fit;
  const auto d = LifetimeProblem::unpack(res.params);
  fit.amplitude = d.amplitude;
  fit.t0_ps = d.t0_ps;
  fit.tau_ps = d.tau_ps;
  fit.sigma_ps = d.sigma_ps;
  fit.irf_fwhm_ps = sigma_to_fwhm(d.sigma_ps);
  fit.background = d.background;
  fit.iterations = res.iterations;
  double ss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = decay_model(t[i], d) - y[i];
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / double(t.size()));
  fit.converged = res.converged && std::isfinite(fit.residual_rms) && res.params.allFinite();
  return fit;
}

inline LifetimeFit fit_lifetime(const Histogram& h, const LifetimeFitOptions& opt = {}) {
  std::vector<double> t(h.counts.size()), y(h.counts.size());
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    t[i] = h.bin_center(i);
    y[i] = double(h.counts[i]);
  }
  return fit_lifetime(t, y, opt);
}

// ---------------------------------------------------------------------------
// Instrument response

struct GaussianParams {
  double amplitude = 0.0;
  double center_ps = 0.0;
  double sigma_ps = 1.0;
  double baseline = 0.0;
};

inline double gaussian_model(double t, const GaussianParams& p) {
  const double u = (t - p.center_ps) / p.sigma_ps;
  return p.baseline + p.amplitude * std::exp(-0.5 * u * u);
}

// Partial derivatives in the order (amplitude, center, sigma, baseline).
inline std::array<double, 4> gaussian_model_gradient(double t, const GaussianParams& p) {
  const double u = (t - p.center_ps) / p.sigma_ps;
  const double e = std::exp(-0.5 * u * u);
  return {e, p.amplitude * e * u / p.sigma_ps, p.amplitude * e * u * u / p.sigma_ps, 1.0};
}

class GaussianProblem {
public:
  GaussianProblem(std::span<const double> t, std::span<const double> y)
      : t_(t.begin(), t.end()), y_(y.begin(), y.end()) {}

  static GaussianParams unpack(const Eigen::VectorXd& p) { return {p(0), p(1), p(2), p(3)}; }

  Eigen::Index residual_count() const { return Eigen::Index(t_.size()); }

  void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    const auto g = unpack(p);
    for (std::size_t i = 0; i < t_.size(); ++i) r(Eigen::Index(i)) = gaussian_model(t_[i], g) - y_[i];
  }

  void jacobian(const Eigen::VectorXd& p, Eigen::MatrixXd& J) const {
    const auto g = unpack(p);
    for (std::size_t i = 0; i < t_.size(); ++i) {
      const auto d = gaussian_model_gradient(t_[i], g);
      for (Eigen::Index j = 0; j < 4; ++j) J(Eigen::Index(i), j) = d[std::size_t(j)];
    }
  }

private:
  std::vector<double> t_, y_;
};

struct IrfMeasurement {
  double fwhm_ps = 0.0;
  double center_ps = 0.0;
  double sigma_ps = 0.0;
  double amplitude = 0.0;
  double baseline = 0.0;
  int iterations = 0;
};

// Gaussian least-squares fit to a histogram with one dominant peak.
inline IrfMeasurement measure_irf(const Histogram& h) {
  const auto n = h.counts.size();
  if (n < 4) throw FitError("measure_irf: histogram has fewer than 4 bins");
  std::vector<double> t(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = h.bin_center(i);
    y[i] = double(h.counts[i]);
  }
  const auto peak = std::size_t(std::max_element(y.begin(), y.end()) - y.begin());
  const double w = double(h.config.bin_width_ps);
  GaussianParams init;
  init.baseline = median(y);
  init.amplitude = y[peak] - init.baseline;
  if (!(init.amplitude > 0.0)) throw FitError("measure_irf: no peak above baseline");
  init.center_ps = t[peak];
  init.sigma_ps = w;
  try {
    const double span = double(h.config.range_max_ps - h.config.range_min_ps);
    init.sigma_ps = std::max(w, fwhm_to_sigma(peak_fwhm(h, t[peak], span)));
  } catch (const InvalidArgument&) {
  }

  GaussianProblem problem(t, y);
  auto bounds = LmBounds::unbounded(4);
  bounds.lower(2) = 1e-3 * w;
  Eigen::VectorXd p0(4);
  p0 << init.amplitude, init.center_ps, init.sigma_ps, init.baseline;
  const auto res = levenberg_marquardt(problem, p0, bounds);
  if (!res.converged || !res.params.allFinite()) throw FitError("measure_irf: Gaussian fit did not converge");
  const auto g = GaussianProblem::unpack(res.params);
  return {sigma_to_fwhm(g.sigma_ps), g.center_ps, g.sigma_ps, g.amplitude, g.baseline, res.iterations};
}

// ---------------------------------------------------------------------------
// Detection efficiency calibration: R = D + f (1 - exp(-eta mu))

struct DECalibrationPoint {
  double mu = 0.0;
  double rate_hz = 0.0;

  friend bool operator==(const DECalibrationPoint&, const DECalibrationPoint&) = default;
};

struct DEFit {
  double eta = 0.0;
  double dark_rate_hz = 0.0;
  double f_hz = 0.0;
  double residual_rms = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct DEFitOptions {
  bool weighted = false;  // weights 1 / max(rate_hz, 1)
  LmOptions lm;
};

inline double de_model(double mu, double eta, double dark_rate_hz, double f_hz) {
  return dark_rate_hz + f_hz * -std::expm1(-eta * mu);
}

// Partial derivatives in the order (eta, dark_rate).
inline std::array<double, 2> de_model_gradient(double mu, double eta, double f_hz) {
  return {f_hz * mu * std::exp(-eta * mu), 1.0};
}

class DEProblem {
public:
  DEProblem(std::span<const DECalibrationPoint> pts, double f_hz, bool weighted)
      : pts_(pts.begin(), pts.end()), f_(f_hz), sqrt_w_(pts.size(), 1.0) {
    if (weighted) {
      for (std::size_t i = 0; i < pts_.size(); ++i) sqrt_w_[i] = 1.0 / std::sqrt(std::max(pts_[i].rate_hz, 1.0));
    }
  }

  Eigen::Index residual_count() const { return Eigen::Index(pts_.size()); }

  void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      r(Eigen::Index(i)) = sqrt_w_[i] * (de_model(pts_[i].mu, p(0), p(1), f_) - pts_[i].rate_hz);
    }
  }

  void jacobian(const Eigen::VectorXd& p, Eigen::MatrixXd& J) const {
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      const auto g = de_model_gradient(pts_[i].mu, p(0), f_);
      J(Eigen::Index(i), 0) = sqrt_w_[i] * g[0];
      J(Eigen::Index(i), 1) = sqrt_w_[i] * g[1];
    }
  }

private:
  std::vector<DECalibrationPoint> pts_;
  double f_;
  std::vector<double> sqrt_w_;
};

inline DEFit fit_de(std::span<const DECalibrationPoint> pts_in, double f_hz, const DEFitOptions& opt = {}) {
  if (!(f_hz > 0.0)) throw InvalidArgument("fit_de: drive frequency must be > 0");
  for (const auto& p : pts_in) {
    if (!(p.mu >= 0.0) || !(p.rate_hz >= 0.0)) throw InvalidArgument("fit_de: mu and rate must be >= 0");
  }
  std::vector<DECalibrationPoint> pts(pts_in.begin(), pts_in.end());
  std::sort(pts.begin(), pts.end(),
            [](const auto& a, const auto& b) { return a.mu != b.mu ? a.mu < b.mu : a.rate_hz < b.rate_hz; });

  double min_pos = std::numeric_limits<double>::infinity();
  double max_mu = 0.0;
  for (const auto& p : pts) {
    if (p.mu > 0.0) min_pos = std::min(min_pos, p.mu);
    max_mu = std::max(max_mu, p.mu);
  }
  if (pts.size() < 3 || !std::isfinite(min_pos) || max_mu < 10.0 * min_pos) {
    throw InvalidArgument("fit_de: insufficient sweep range (need >= 3 points spanning a decade in mu)");
  }
  if (std::all_of(pts.begin(), pts.end(), [&](const auto& p) { return p.rate_hz == pts.front().rate_hz; })) {
    throw FitError("fit_de: all rates are equal");
  }

  const auto rmin = std::min_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.rate_hz < b.rate_hz; });
  const auto rmax = std::max_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.rate_hz < b.rate_hz; });
  const double d0 = rmin->rate_hz;
  double eta0 = rmax->mu > 0.0 ? (rmax->rate_hz - d0) / (f_hz * rmax->mu) : 1e-3;
  eta0 = std::clamp(eta0, 1e-9, 1.0);

  DEProblem problem(pts, f_hz, opt.weighted);
  Eigen::VectorXd p0(2);
  p0 << eta0, d0;
  const auto res = levenberg_marquardt(problem, p0, LmBounds::unbounded(2), opt.lm);

  DEFit fit;
  fit.f_hz = f_hz;
  fit.iterations = res.iterations;
  fit.eta = res.params(0);
  fit.dark_rate_hz = res.params(1);
  bool clamped = false;
  if (!(fit.eta >= 0.0 && fit.eta <= 1.0)) {
    fit.eta = std::clamp(std::isfinite(fit.eta) ? fit.eta : 0.0, 0.0, 1.0);
    clamped = true;
  }
  if (!(fit.dark_rate_hz >= 0.0)) {
    fit.dark_rate_hz = 0.0;
    clamped = true;
  }
  double ss = 0.0;
  for (const auto& p : pts) {
    const double r = de_model(p.mu, fit.eta, fit.dark_rate_hz, f_hz) - p.rate_hz;
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / double(pts.size()));
  fit.converged = res.converged && !clamped && std::isfinite(fit.residual_rms);
  return fit;
}

// Sweep CSV: header "mu,rate_hz".
inline std::string encode_sweep_csv(std::span<const DECalibrationPoint> pts) {
  std::ostringstream out;
  out << "mu,rate_hz\n";
  for (const auto& p : pts) out << text::format_double(p.mu) << ',' << text::format_double(p.rate_hz) << '\n';
  return out.str();
}

inline std::vector<DECalibrationPoint> decode_sweep_csv(std::string_view content) {
  using Kind = FormatError::Kind;
  std::vector<DECalibrationPoint> pts;
  bool have_header = false;
  std::size_t line_no = 0;
  for (auto line : text::split(content, '\n')) {
    ++line_no;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (!have_header) {
      if (line != "mu,rate_hz") throw FormatError(Kind::BadHeader, "expected header 'mu,rate_hz'");
      have_header = true;
      continue;
    }
    const auto f = text::split(line, ',');
    const auto mu = f.size() == 2 ? text::parse_double(f[0]) : std::nullopt;
    const auto r = f.size() == 2 ? text::parse_double(f[1]) : std::nullopt;
    if (!mu || !r || *mu < 0.0 || *r < 0.0) {
      throw FormatError(Kind::BadRow, "bad sweep row at line " + std::to_string(line_no));
    }
    pts.push_back({*mu, *r});
  }
  if (!have_header) throw FormatError(Kind::BadHeader, "missing sweep header");
  return pts;
}

}  // namespace phc
