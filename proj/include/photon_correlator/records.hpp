#pragma once

// Result records: flat key=value text plus a JSON twin with the same keys in
// the same order.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "photon_correlator/analysis.hpp"
#include "photon_correlator/text.hpp"

namespace phc {

class Record {
public:
  Record& set(const std::string& key, double v) { return put(key, text::format_double(v), v); }
  Record& set(const std::string& key, std::int64_t v) { return put(key, std::to_string(v), v); }
  Record& set(const std::string& key, std::uint64_t v) { return put(key, std::to_string(v), v); }
  Record& set(const std::string& key, int v) { return set(key, std::int64_t{v}); }
  Record& set(const std::string& key, bool v) { return put(key, v ? "true" : "false", v); }
  Record& set(const std::string& key, const std::string& v) { return put(key, v, v); }
  Record& set(const std::string& key, const char* v) { return set(key, std::string(v)); }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : text_) out += k + "=" + v + "\n";
    return out;
  }

  nlohmann::ordered_json to_json() const { return json_; }

  std::string to_json_text() const { return json_.dump(2) + "\n"; }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return text_; }

private:
  template <typename T>
  Record& put(const std::string& key, std::string text_value, const T& json_value) {
    text_.emplace_back(key, std::move(text_value));
    json_[key] = json_value;
    return *this;
  }

  std::vector<std::pair<std::string, std::string>> text_;
  nlohmann::ordered_json json_ = nlohmann::ordered_json::object();
};

inline Record to_record(const G2Estimate& g) {
  Record r;
  r.set("g2_zero", g.g2_zero)
      .set("g2_sigma", g.sigma)
      .set("center_area", g.center_area)
      .set("mean_side_area", g.mean_side_area())
      .set("n_side_peaks", g.n_side_peaks);
  return r;
}

inline Record to_record(const LifetimeFit& f) {
  Record r;
  r.set("tau_ps", f.tau_ps)
      .set("sigma_ps", f.sigma_ps)
      .set("irf_fwhm_ps", f.irf_fwhm_ps)
      .set("amplitude", f.amplitude)
      .set("t0_ps", f.t0_ps)
      .set("background", f.background)
      .set("residual_rms", f.residual_rms)
      .set("converged", f.converged)
      .set("iterations", f.iterations);
  return r;
}

inline Record to_record(const DEFit& f) {
  Record r;
  r.set("eta", f.eta)
      .set("dark_rate_hz", f.dark_rate_hz)
      .set("f_hz", f.f_hz)
      .set("residual_rms", f.residual_rms)
      .set("converged", f.converged)
      .set("iterations", f.iterations);
  return r;
}

inline Record to_record(const IrfMeasurement& m) {
  Record r;
  r.set("irf_fwhm_ps", m.fwhm_ps)
      .set("center_ps", m.center_ps)
      .set("sigma_ps", m.sigma_ps)
      .set("amplitude", m.amplitude)
      .set("baseline", m.baseline)
      .set("iterations", m.iterations);
  return r;
}

}  // namespace phc
