#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "photon_correlator/analysis.hpp"
#include "photon_correlator/detector.hpp"
#include "test_support.hpp"

namespace phc {
namespace {

TagStream tags_at(std::vector<timestamp_t> ts, timestamp_t duration) {
  TagStream s;
  s.duration_ps = duration;
  for (auto t : ts) s.tags.push_back({kSourceChannel, t});
  return s;
}

DetectorModel ideal() {
  DetectorModel m;
  m.name = "ideal";
  return m;
}

TEST(Detect, NothingDetected) {
  auto m = ideal();
  m.efficiency = 0.0;
  EXPECT_TRUE(detect(tags_at({1, 2, 3}, 10), m, 1).empty());
}

TEST(Detect, JitterSigmaFromFwhm) {
  EXPECT_NEAR(fwhm_to_sigma(170.0), 72.2, 0.05);
  EXPECT_NEAR(sigma_to_fwhm(fwhm_to_sigma(550.0)), 550.0, 1e-12);
}

TEST(Detect, NonParalyzableDeadTime) {
  auto m = ideal();
  m.dead_time_ps = 10000;
  const auto out = detect(tags_at({0, 5000, 12000}, 20000), m, 1);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.tags[0].t, 0);
  EXPECT_EQ(out.tags[1].t, 12000);
  EXPECT_EQ(out.tags[0].channel, m.channel);
}

TEST(Detect, DarkCountsInOneSecond) {
  auto m = ideal();
  m.dark_rate_hz = 100.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto out = detect(tags_at({}, 1'000'000'000'000), m, seed);
    EXPECT_NEAR(double(out.size()), 100.0, 30.0);
    for (const auto& t : out.tags) ASSERT_TRUE(t.t >= 0 && t.t < out.duration_ps);
  }
}

TEST(Detect, MissingDuration) {
  EXPECT_THROW(detect(tags_at({}, 0), ideal(), 1), InvalidArgument);
}

TEST(Detect, InvalidModel) {
  auto m = ideal();
  m.efficiency = 1.2;
  EXPECT_THROW(detect(tags_at({}, 10), m, 1), InvalidArgument);
  m = ideal();
  m.dead_time_ps = -1;
  EXPECT_THROW(detect(tags_at({}, 10), m, 1), InvalidArgument);
}

TEST(Detect, DeadTimeGapInvariant) {
  std::mt19937_64 gen(77);
  for (int run = 0; run < 200; ++run) {
    DetectorModel m;
    m.efficiency = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    m.dark_rate_hz = std::uniform_real_distribution<double>(0.0, 1e7)(gen);
    m.jitter_fwhm_ps = std::uniform_real_distribution<double>(0.0, 600.0)(gen);
    m.dead_time_ps = std::uniform_int_distribution<timestamp_t>(0, 20000)(gen);
    const auto photons = testing::poisson_stream(5e7, 10'000'000, gen());
    const auto out = detect(photons, m, gen());
    ASSERT_TRUE(is_sorted(out.tags));
    for (std::size_t i = 1; i < out.size(); ++i) {
      ASSERT_GE(out.tags[i].t - out.tags[i - 1].t, m.dead_time_ps);
    }
  }
}

TEST(Detect, JitterWidthCalibration) {
  auto m = ideal();
  m.jitter_fwhm_ps = 170.0;
  std::vector<timestamp_t> in;
  for (timestamp_t t = 1000; t < 1'000'000'000; t += 10000) in.push_back(t);
  const auto photons = tags_at(in, 1'000'000'000);
  const auto out = detect(photons, m, 3);
  ASSERT_EQ(out.size(), photons.size());
  Histogram h({4, -600, 600});
  for (std::size_t i = 0; i < out.size(); ++i) h.add(double(out.tags[i].t - photons.tags[i].t));
  EXPECT_NEAR(measure_irf(h).fwhm_ps, 170.0, 0.02 * 170.0);
}

TEST(Detect, CountRateMatchesEfficiencyPlusDark) {
  DetectorModel m;
  m.efficiency = 0.5;
  m.dark_rate_hz = 1000.0;
  m.dead_time_ps = 10000;
  const auto photons = testing::poisson_stream(1e5, 1'000'000'000'000, 4);
  const auto out = detect(photons, m, 5);
  const double expected = 0.5 * double(photons.size()) + 1000.0;
  EXPECT_NEAR(double(out.size()), expected, 4.0 * std::sqrt(expected));
}

TEST(Detect, SameSeedSameOutput) {
  DetectorModel m;
  m.efficiency = 0.4;
  m.dark_rate_hz = 1e6;
  m.jitter_fwhm_ps = 300;
  m.dead_time_ps = 1000;
  const auto photons = testing::poisson_stream(1e8, 100'000'000, 8);
  EXPECT_EQ(detect(photons, m, 1), detect(photons, m, 1));
}

TEST(BiasCurve, ExactPointAndMidpoint) {
  const std::vector<BiasCurvePoint> curve{{0.6, 0.001, 1.0}, {0.8, 0.01, 100.0}, {0.95, 0.012, 1000.0}};
  const auto at = bias_lookup(curve, 0.8);
  EXPECT_EQ(at.efficiency, 0.01);
  EXPECT_EQ(at.dark_rate_hz, 100.0);
  const auto mid = bias_lookup(curve, 0.7);
  EXPECT_NEAR(mid.efficiency, 0.0055, 1e-15);
  EXPECT_NEAR(mid.dark_rate_hz, 10.0, 1e-12);
  EXPECT_EQ(bias_lookup(curve, 0.6).efficiency, 0.001);
}

TEST(BiasCurve, OutOfRangeAndBadCurves) {
  const std::vector<BiasCurvePoint> curve{{0.6, 0.001, 1.0}, {0.8, 0.01, 100.0}};
  EXPECT_THROW(bias_lookup(curve, 0.59), InvalidArgument);
  EXPECT_THROW(bias_lookup(curve, 0.81), InvalidArgument);
  EXPECT_THROW(bias_lookup({{0.8, 0.01, 1.0}, {0.6, 0.001, 1.0}}, 0.7), InvalidArgument);
  EXPECT_THROW(bias_lookup({}, 0.7), InvalidArgument);
}

TEST(BiasCurve, ZeroDarkRateInterpolatesLinearly) {
  EXPECT_NEAR(bias_lookup({{0.6, 0.0, 0.0}, {0.8, 0.01, 100.0}}, 0.7).dark_rate_hz, 50.0, 1e-12);
}

TEST(BiasCurve, CsvRoundTrip) {
  const std::vector<BiasCurvePoint> curve{{0.6, 0.001, 1.0}, {0.75, 0.0071, 33.3}, {0.95, 0.012, 1000.0}};
  const auto back = decode_bias_curve_csv(encode_bias_curve_csv(curve));
  ASSERT_EQ(back.size(), curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    EXPECT_EQ(back[i].bias_fraction, curve[i].bias_fraction);
    EXPECT_EQ(back[i].efficiency, curve[i].efficiency);
    EXPECT_EQ(back[i].dark_rate_hz, curve[i].dark_rate_hz);
  }
  EXPECT_THROW(decode_bias_curve_csv("bias,eff\n"), FormatError);
  EXPECT_THROW(decode_bias_curve_csv("bias_fraction,efficiency,dark_rate_hz\n1.2,0.1,1\n"), FormatError);
}

}  // namespace
}  // namespace phc
