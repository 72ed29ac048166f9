// Command-line front end: `run` executes a scenario ensemble,
// `seed-spread` prints the quantum spread estimates for a seed molecule,
// `beta-experiment` runs the two-branch source experiment.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pulsesim/pulsesim.hpp"

namespace {

pulsesim::OutputFormat parse_format(const std::string& s) {
  return s == "json" ? pulsesim::OutputFormat::json
                     : pulsesim::OutputFormat::csv;
}

int seed_spread_main(double mass_u, double width_m, double time_s,
                     double spacing_m, double factor) {
  using namespace pulsesim;
  try {
    const SpreadResult r =
        seed_spread_report(SeedMolecule{mass_u, width_m}, time_s, spacing_m,
                           factor);
    std::cout << "delta_v_m_per_s=" << fmt_double(r.delta_v) << '\n'
              << "spread_length_m=" << fmt_double(r.spread_length) << '\n'
              << "receptors_covered=" << r.receptors_covered << '\n';
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalidScenario;
  }
  return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulsesim: stochastic collapse-and-drift pulse simulator"};
  app.set_version_flag("--version", std::string("pulsesim ") +
                                        pulsesim::kToolVersion);
  app.require_subcommand(1);

  // --- run ---
  auto* run = app.add_subcommand("run", "run a scenario ensemble");
  pulsesim::RunConfig run_cfg;
  std::string run_format = "csv";
  run->add_option("--scenario", run_cfg.scenario_path, "scenario JSON file")
      ->required();
  run->add_option("--seed", run_cfg.master_seed, "master seed")->required();
  run->add_option("--trials", run_cfg.n_trials, "number of trials")
      ->required()
      ->check(CLI::PositiveNumber);
  run->add_option("--out", run_cfg.out_dir, "output directory")->required();
  run->add_option("--format", run_format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_flag("--weights-history", run_cfg.weights_history,
                "write per-trial weight histories");
  run->add_option("--snapshot-dir", run_cfg.snapshot_dir,
                  "write stage and drift snapshots of trial 0 here");
  run->add_option("--snapshot-stride", run_cfg.snapshot_stride,
                  "steps between drift snapshots");

  // --- seed-spread ---
  auto* spread = app.add_subcommand(
      "seed-spread", "print the spread estimates for a seed molecule");
  double mass_u = 10000.0;
  double width_m = 10e-9;
  double time_s = 0.1;
  double spacing_m = 1e-6;
  double factor = 1.0;
  spread->add_option("--mass", mass_u, "molecule mass in atomic mass units");
  spread->add_option("--width", width_m, "classical width in meters");
  spread->add_option("--time", time_s, "elapsed time in seconds");
  spread->add_option("--spacing", spacing_m, "receptor spacing in meters");
  spread->add_option("--uncertainty-factor", factor,
                     "scale on the uncertainty bound");

  // --- beta-experiment ---
  auto* beta = app.add_subcommand("beta-experiment",
                                  "run the two-branch source experiment");
  pulsesim::BetaRunConfig beta_cfg;
  std::string beta_format = "csv";
  beta->add_option("--scenario", beta_cfg.scenario_path,
                   "two-branch scenario JSON file")
      ->required();
  beta->add_option("--seed", beta_cfg.master_seed, "master seed")->required();
  beta->add_option("--trials", beta_cfg.n_trials, "trials per sweep point")
      ->required()
      ->check(CLI::PositiveNumber);
  beta->add_option("--out", beta_cfg.out_dir, "output directory")->required();
  beta->add_option("--format", beta_format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  beta->add_option("--kappa-sweep", beta_cfg.kappa_sweep,
                   "comma-separated painful-branch kappa values")
      ->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      run_cfg.format = parse_format(run_format);
      return pulsesim::run_scenario_cli(run_cfg, std::cerr);
    }
    if (spread->parsed()) {
      return seed_spread_main(mass_u, width_m, time_s, spacing_m, factor);
    }
    beta_cfg.format = parse_format(beta_format);
    return pulsesim::run_beta_cli(beta_cfg, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
