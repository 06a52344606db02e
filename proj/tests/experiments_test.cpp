#include <cstdlib>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "photon_correlator/photon_correlator.hpp"
#include "test_support.hpp"

namespace phc {
namespace {

RunConfig hbt_config(const std::string& extra_source = "g2_target = 0.24\nmean_n = 0.1\n",
                     std::int64_t n_pulses = 1'000'000) {
  return parse_run_config("seed = 3\n[source.dot]\n" + extra_source + "n_pulses = " + std::to_string(n_pulses) +
                          "\n[detector.A]\nefficiency = 0.38\ndark_rate_hz = 100\njitter_fwhm_ps = 550\n"
                          "[detector.B]\nefficiency = 0.38\ndark_rate_hz = 100\njitter_fwhm_ps = 170\n"
                          "dead_time_ps = 10000\n[hbt]\nstart = A\nstop = B\n");
}

RunConfig tcspc_config(double jitter, std::int64_t n_pulses, std::uint64_t seed) {
  std::ostringstream s;
  s << "seed = " << seed << "\n[source.dot]\np0 = 0\np1 = 1\np2 = 0\nn_pulses = " << n_pulses
    << "\n[detector.D]\nefficiency = 0.1\ndark_rate_hz = 100\njitter_fwhm_ps = " << jitter
    << "\ndead_time_ps = 10000\n[tcspc]\ndetector = D\n";
  return parse_run_config(s.str());
}

RunConfig de_config() {
  return parse_run_config(
      "seed = 5\n[source.laser]\nrep_rate_hz = 1e5\nn_pulses = 100000\n"
      "[detector.SSPD]\nefficiency = 0.01\ndark_rate_hz = 500\njitter_fwhm_ps = 170\ndead_time_ps = 10000\n"
      "[de_sweep]\ndetector = SSPD\n");
}

TEST(Hbt, HistogramWindowHoldsAllSidePeaks) {
  const auto cfg = hbt_config();
  const auto h = hbt_histogram_config(cfg);
  const double T = source_rep_period_ps(cfg);
  EXPECT_LE(double(h.range_min_ps), -10.0 * T - g2_halfwidth(cfg));
  EXPECT_GE(double(h.range_max_ps), 10.0 * T + g2_halfwidth(cfg));
  EXPECT_EQ(h.bin_width_ps, 32);
}

TEST(Hbt, AntibunchedSource) {
  const auto run = run_hbt(hbt_config());
  EXPECT_LT(std::abs(run.g2.g2_zero - 0.24), std::max(0.06, 3.0 * run.g2.sigma));
  EXPECT_EQ(run.g2.side_areas.size(), 20u);
  EXPECT_EQ(run.histogram.n_starts, run.start.size());
}

TEST(Hbt, IdealSinglePhotonSource) {
  const auto run = run_hbt(hbt_config("p0 = 0.9\np1 = 0.1\np2 = 0\n"));
  EXPECT_LT(run.g2.g2_zero, 0.02);
  EXPECT_LT(run.g2.g2_zero, 3.0 * run.g2.sigma);
}

TEST(Hbt, SameSeedSameRun) {
  const auto cfg = hbt_config("g2_target = 0.24\nmean_n = 0.1\n", 200'000);
  const auto a = run_hbt(cfg);
  const auto b = run_hbt(cfg);
  EXPECT_EQ(a.start, b.start);
  EXPECT_EQ(a.stop, b.stop);
  EXPECT_EQ(a.histogram, b.histogram);
  auto other = cfg;
  other.seed = 4;
  EXPECT_NE(run_hbt(other).start.tags, a.start.tags);
}

TEST(Hbt, StartAndStopMustDiffer) {
  auto cfg = hbt_config();
  cfg.hbt_stop = "A";
  EXPECT_THROW(run_hbt(cfg), ConfigError);
}

TEST(Tcspc, LifetimeStableAcrossSeeds) {
  std::vector<double> taus;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto run = run_tcspc(tcspc_config(170.0, 3'000'000, seed));
    ASSERT_TRUE(run.fit.converged);
    EXPECT_NEAR(run.fit.tau_ps, 370.0, 0.02 * 370.0);
    taus.push_back(run.fit.tau_ps);
  }
  const auto [lo, hi] = std::minmax_element(taus.begin(), taus.end());
  EXPECT_LE(*hi - *lo, 0.01 * 370.0);
}

TEST(Tcspc, JitterlessDetectorGivesNarrowIrf) {
  const auto run = run_tcspc(tcspc_config(0.0, 5'000'000, 9));
  EXPECT_LE(run.fit.sigma_ps, 2.0 * 32.0);
  EXPECT_NEAR(run.fit.tau_ps, 370.0, 0.02 * 370.0);
}

TEST(Tcspc, ExcitationLandsInsideTheWindow) {
  const auto cfg = tcspc_config(170.0, 1'000'000, 2);
  const auto run = run_tcspc(cfg);
  EXPECT_NEAR(run.fit.t0_ps, 2000.0, 20.0);
  EXPECT_EQ(tcspc_histogram_config(cfg).range_min_ps, 0);
}

TEST(DeSweep, RecoversEfficiencyAndDoublingMuAgrees) {
  const auto cfg = de_config();
  const std::vector<double> mu{0.01, 0.03, 0.1, 0.3, 1, 3, 10};
  std::vector<double> doubled;
  for (double m : mu) doubled.push_back(2.0 * m);
  const auto a = run_de_sweep(cfg, mu);
  const auto b = run_de_sweep(cfg, doubled);
  EXPECT_NEAR(a.fit.eta, 0.01, 0.05 * 0.01);
  EXPECT_NEAR(b.fit.eta, 0.01, 0.05 * 0.01);
  EXPECT_NEAR(a.fit.eta, b.fit.eta, 0.05 * 0.01);
  EXPECT_EQ(a.laser_mu, 10.0);
  EXPECT_EQ(a.points.size(), mu.size());
}

TEST(DeSweep, RejectsBadInputs) {
  auto cfg = de_config();
  EXPECT_THROW(run_de_sweep(cfg, {}), ConfigError);
  EXPECT_THROW(run_de_sweep(cfg, {0.1, -1.0, 1.0}), ConfigError);
  cfg.source.laser_mu = 1.0;
  EXPECT_THROW(run_de_sweep(cfg, {0.1, 1.0, 10.0}), ConfigError);
  EXPECT_THROW(run_de_sweep(hbt_config(), {0.1, 1.0, 10.0}), ConfigError);
}

// ---------------------------------------------------------------------------
// Command-line tool

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const testing::TempDir& dir) {
  const auto out = dir.file("stdout.txt"), err = dir.file("stderr.txt");
  const std::string cmd = std::string("\"") + PHC_CLI_PATH + "\" " + args + " > \"" + out + "\" 2> \"" + err + "\"";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = detail::read_file(out);
  r.err = detail::read_file(err);
  return r;
}

TEST(Cli, AnalyzeG2OnSyntheticHistogram) {
  testing::TempDir dir("cli_g2");
  Histogram h(symmetric_config(10.5 * 12195.0 + 32.0, 32));
  h.counts.assign(h.counts.size(), 0);
  h.add(0.0);
  h.counts[h.counts.size() / 2] = 240;
  for (int k = 1; k <= 10; ++k) {
    for (int sgn : {-1, 1}) {
      const auto idx = static_cast<std::size_t>((sgn * k * 12195.0 - double(h.config.range_min_ps)) / 32.0);
      h.counts[idx] = 1000;
    }
  }
  detail::write_file(dir.file("h.csv"), encode_histogram_csv(h));
  const auto r = run_cli("analyze g2 --hist " + dir.file("h.csv") + " --rep-period-ps 12195 --side-peaks 20", dir);
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("g2_zero=0.24\n"), std::string::npos) << r.out;
  const auto j = run_cli("analyze g2 --json --hist " + dir.file("h.csv") + " --rep-period-ps 12195", dir);
  EXPECT_EQ(nlohmann::json::parse(j.out).at("g2_zero").get<double>(), 0.24);
}

TEST(Cli, AnalyzeLifetimeOnNoiselessHistogram) {
  testing::TempDir dir("cli_life");
  const DecayParams truth{5000.0, 2000.0, 370.0, 72.2, 3.0};
  // Counts are integers on disk, so use large amplitudes and compare loosely.
  Histogram h({16, 0, 12192});
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    h.counts[i] = static_cast<std::uint64_t>(std::llround(1000.0 * decay_model(h.bin_center(i), truth)));
  }
  detail::write_file(dir.file("h.csv"), encode_histogram_csv(h));
  const auto r = run_cli("analyze lifetime --json --hist " + dir.file("h.csv"), dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j.at("tau_ps").get<double>(), 370.0, 1e-4 * 370.0);
  EXPECT_NEAR(j.at("sigma_ps").get<double>(), 72.2, 1e-4 * 72.2);
  EXPECT_TRUE(j.at("converged").get<bool>());
}

TEST(Cli, AnalyzeDeErrors) {
  testing::TempDir dir("cli_de");
  detail::write_file(dir.file("zero.csv"), "mu,rate_hz\n0,500\n0,510\n0,490\n");
  const auto r = run_cli("analyze de --sweep " + dir.file("zero.csv") + " --f-hz 100000", dir);
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.err.find("insufficient sweep range"), std::string::npos) << r.err;
  detail::write_file(dir.file("ok.csv"), encode_sweep_csv(std::vector<DECalibrationPoint>{
                                             {0.01, de_model(0.01, 0.02, 100, 1e5)},
                                             {0.1, de_model(0.1, 0.02, 100, 1e5)},
                                             {1, de_model(1, 0.02, 100, 1e5)},
                                             {10, de_model(10, 0.02, 100, 1e5)}}));
  const auto ok = run_cli("analyze de --json --sweep " + dir.file("ok.csv") + " --f-hz 100000", dir);
  ASSERT_EQ(ok.exit_code, 0) << ok.err;
  EXPECT_NEAR(nlohmann::json::parse(ok.out).at("eta").get<double>(), 0.02, 1e-8);
}

TEST(Cli, ExitCodes) {
  testing::TempDir dir("cli_exit");
  detail::write_file(dir.file("bad.cfg"), "[source.dot]\nn_pulses = 10\n");
  const auto bad = run_cli("simulate-hbt --config " + dir.file("bad.cfg") + " --out " + dir.file("o1"), dir);
  EXPECT_EQ(bad.exit_code, 2);
  EXPECT_NE(bad.err.find("source.dot.p0"), std::string::npos) << bad.err;
  EXPECT_FALSE(std::filesystem::exists(dir.file("o1")));

  detail::write_file(dir.file("de.cfg"),
                     "[source.laser]\nn_pulses = 100\n[detector.S]\nefficiency = 0.1\n[de_sweep]\ndetector = S\n");
  const auto empty = run_cli("simulate-de-sweep --config " + dir.file("de.cfg") + " --out " + dir.file("o2"), dir);
  EXPECT_EQ(empty.exit_code, 1);
  EXPECT_FALSE(std::filesystem::exists(dir.file("o2")));

  detail::write_file(dir.file("garbage.csv"), "nonsense\n");
  EXPECT_EQ(run_cli("analyze irf --hist " + dir.file("garbage.csv"), dir).exit_code, 3);
  EXPECT_EQ(run_cli("no-such-command", dir).exit_code, 1);
}

TEST(Cli, SimulateWritesArtifactsAndEchoesConfig) {
  testing::TempDir dir("cli_sim");
  auto text = to_config_text(hbt_config("g2_target = 0.24\nmean_n = 0.1\n", 100'000));
  detail::write_file(dir.file("run.cfg"), text);
  const auto r = run_cli("simulate-hbt --config " + dir.file("run.cfg") + " --out " + dir.file("o") + " --seed 11", dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("seed = 11"), std::string::npos);
  for (const char* f : {"effective.cfg", "start.ttag", "stop.ttag", "hbt_histogram.csv", "g2.txt", "g2.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "o" / f)) << f;
  }
  const auto eff = load_run_config(dir.path() / "o" / "effective.cfg");
  EXPECT_EQ(eff.seed, 11u);
  EXPECT_EQ(read_tags(dir.file("o/start.ttag")).duration_ps, pulse_time_ps(100'000, 82e6));
}

}  // namespace
}  // namespace phc
