// photon-correlator: simulate and analyze single-photon counting experiments.
//
// Exit codes: 0 ok, 1 usage error, 2 config error, 3 format / input-data
// error, 4 fit non-convergence.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "photon_correlator/photon_correlator.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitFormat = 3;
constexpr int kExitFit = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mu;
};

struct AnalyzeArgs {
  std::string hist;
  std::string sweep;
  double rep_period_ps = 0.0;
  int side_peaks = phc::kDefaultSidePeaks;
  std::optional<double> halfwidth_ps;
  std::optional<double> fix_sigma_ps;
  double f_hz = 0.0;
  bool weighted = false;
  bool json = false;
};

phc::RunConfig load_config(const SimulateArgs& a) {
  auto cfg = phc::load_run_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.out.empty()) cfg.output_dir = a.out;
  if (cfg.output_dir.empty()) throw phc::ConfigError("output_dir", "no output directory (use --out)");
  return cfg;
}

void echo_config(const phc::RunConfig& cfg) {
  std::cout << "# effective configuration\n" << phc::to_config_text(cfg) << '\n';
}

void print_record(const phc::Record& r, bool json) { std::cout << (json ? r.to_json_text() : r.to_text()); }

std::string read_input(const std::string& path) { return phc::detail::read_file(path); }

int simulate_hbt(const SimulateArgs& a) {
  const auto cfg = load_config(a);
  echo_config(cfg);
  const auto run = phc::run_hbt(cfg);
  phc::write_hbt_outputs(run, cfg, cfg.output_dir);
  print_record(phc::to_record(run.g2), false);
  return 0;
}

int simulate_tcspc(const SimulateArgs& a) {
  const auto cfg = load_config(a);
  echo_config(cfg);
  const auto run = phc::run_tcspc(cfg);
  phc::write_tcspc_outputs(run, cfg, cfg.output_dir);
  print_record(phc::to_record(run.fit), false);
  return run.fit.converged ? 0 : kExitFit;
}

int simulate_de_sweep(const SimulateArgs& a) {
  auto cfg = load_config(a);
  if (a.mu) cfg.de_mu = phc::detail::parse_double_list("--mu", *a.mu);
  if (cfg.de_mu.empty()) throw UsageError("simulate-de-sweep: empty mu list (pass --mu or set de_sweep.mu)");
  echo_config(cfg);
  const auto run = phc::run_de_sweep(cfg, cfg.de_mu);
  phc::write_de_sweep_outputs(run, cfg, cfg.output_dir);
  print_record(phc::to_record(run.fit), false);
  return run.fit.converged ? 0 : kExitFit;
}

int analyze_g2(const AnalyzeArgs& a) {
  const auto h = phc::decode_histogram_csv(read_input(a.hist));
  const double hw = a.halfwidth_ps.value_or(phc::default_integration_halfwidth(a.rep_period_ps, h.config.bin_width_ps));
  print_record(phc::to_record(phc::g2_zero(h, a.rep_period_ps, hw, a.side_peaks)), a.json);
  return 0;
}

int analyze_lifetime(const AnalyzeArgs& a) {
  const auto h = phc::decode_histogram_csv(read_input(a.hist));
  phc::LifetimeFitOptions opt;
  opt.fix_sigma_ps = a.fix_sigma_ps;
  opt.weighted = a.weighted;
  const auto fit = phc::fit_lifetime(h, opt);
  print_record(phc::to_record(fit), a.json);
  return fit.converged ? 0 : kExitFit;
}

int analyze_de(const AnalyzeArgs& a) {
  const auto pts = phc::decode_sweep_csv(read_input(a.sweep));
  phc::DEFitOptions opt;
  opt.weighted = a.weighted;
  const auto fit = phc::fit_de(pts, a.f_hz, opt);
  print_record(phc::to_record(fit), a.json);
  return fit.converged ? 0 : kExitFit;
}

int analyze_irf(const AnalyzeArgs& a) {
  const auto h = phc::decode_histogram_csv(read_input(a.hist));
  print_record(phc::to_record(phc::measure_irf(h)), a.json);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate and analyze single-photon counting experiments"};
  app.require_subcommand(1);

  SimulateArgs sim;
  const auto add_sim = [&](const std::string& name, const std::string& desc) {
    auto* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--config", sim.config, "Run configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", sim.out, "Output directory (overrides output_dir)");
    cmd->add_option("--seed", sim.seed, "Override the configured seed");
    return cmd;
  };
  auto* hbt = add_sim("simulate-hbt", "Coincidence (g2) measurement: source, beamsplitter, two detectors");
  auto* tcspc = add_sim("simulate-tcspc", "Reverse start-stop lifetime measurement and fit");
  auto* de = add_sim("simulate-de-sweep", "Attenuated-laser sweep and detection-efficiency fit");
  de->add_option("--mu", sim.mu, "Comma-separated mean photon numbers per pulse");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Analyze histogram or sweep files");
  analyze->require_subcommand(1);
  auto* a_g2 = analyze->add_subcommand("g2", "g2(0) from an HBT histogram");
  a_g2->add_option("--hist", an.hist, "Histogram CSV")->required()->check(CLI::ExistingFile);
  a_g2->add_option("--rep-period-ps", an.rep_period_ps, "Pulse repetition period")->required();
  a_g2->add_option("--side-peaks", an.side_peaks, "Number of side peaks averaged");
  a_g2->add_option("--halfwidth-ps", an.halfwidth_ps, "Peak integration half-width");
  auto* a_life = analyze->add_subcommand("lifetime", "Exponential-convolved-with-Gaussian lifetime fit");
  a_life->add_option("--hist", an.hist, "Histogram CSV")->required()->check(CLI::ExistingFile);
  a_life->add_option("--fix-sigma-ps", an.fix_sigma_ps, "Hold the IRF sigma fixed");
  a_life->add_flag("--weighted", an.weighted, "Weight bins by 1/max(count,1)");
  auto* a_de = analyze->add_subcommand("de", "Detection efficiency and dark rate from a mu sweep");
  a_de->add_option("--sweep", an.sweep, "Sweep CSV (mu,rate_hz)")->required()->check(CLI::ExistingFile);
  a_de->add_option("--f-hz", an.f_hz, "Laser drive frequency")->required();
  a_de->add_flag("--weighted", an.weighted, "Weight points by 1/max(rate,1)");
  auto* a_irf = analyze->add_subcommand("irf", "Gaussian IRF width from a single-peak histogram");
  a_irf->add_option("--hist", an.hist, "Histogram CSV")->required()->check(CLI::ExistingFile);
  for (auto* cmd : {a_g2, a_life, a_de, a_irf}) cmd->add_flag("--json", an.json, "Print the JSON record");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*hbt) return simulate_hbt(sim);
    if (*tcspc) return simulate_tcspc(sim);
    if (*de) return simulate_de_sweep(sim);
    if (*a_g2) return analyze_g2(an);
    if (*a_life) return analyze_lifetime(an);
    if (*a_de) return analyze_de(an);
    if (*a_irf) return analyze_irf(an);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const phc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const phc::FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const phc::FitError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return kExitFit;
  } catch (const phc::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
