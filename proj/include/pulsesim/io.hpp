#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pulsesim/errors.hpp"
#include "pulsesim/experiment.hpp"
#include "pulsesim/scenario.hpp"
#include "pulsesim/version.hpp"

namespace pulsesim {

enum class OutputFormat { csv, json };

inline const char* format_name(OutputFormat f) {
  return f == OutputFormat::csv ? "csv" : "json";
}

struct RunConfig {
  std::string scenario_path;
  std::uint64_t master_seed = 0;
  std::size_t n_trials = 1;
  std::string out_dir;
  OutputFormat format = OutputFormat::csv;
  bool weights_history = false;
  std::string snapshot_dir;      // empty: no stage/drift snapshots
  std::size_t snapshot_stride = 10; // drift snapshot every this many steps
};

struct BetaRunConfig {
  std::string scenario_path;
  std::uint64_t master_seed = 0;
  std::size_t n_trials = 1;
  std::string out_dir;
  OutputFormat format = OutputFormat::csv;
  std::vector<double> kappa_sweep; // empty: run the document's kappa only
};

// --- primitives -----------------------------------------------------------

/// FNV-1a 64-bit hash; used to fingerprint scenario bytes in the manifest.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Shortest text that round-trips a double exactly.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) {
    throw IoError("read failure on " + path);
  }
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << text;
  out.flush();
  if (!out) {
    throw IoError("write failure on " + path.string());
  }
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create directory " + dir.string() + ": " +
                  ec.message());
  }
}

// --- trial tables ---------------------------------------------------------

inline int trial_steps(const TrialRecord& rec) {
  return rec.trajectory.steps_taken;
}

inline std::string trials_to_csv(const std::vector<TrialRecord>& records) {
  std::ostringstream out;
  out << "trial_index,branch,u_sc,t_sc,raw_weight_sq,equilibrium_center,steps\n";
  for (const TrialRecord& r : records) {
    out << r.trial_index << ',' << branch_name(r.branch) << ','
        << fmt_double(r.collapse.u_sc) << ',' << fmt_double(r.collapse.t_sc)
        << ',' << fmt_double(r.collapse.raw_weight_sq) << ',';
    if (r.trajectory.equilibrium_center) {
      out << fmt_double(*r.trajectory.equilibrium_center);
    }
    out << ',' << trial_steps(r) << '\n';
  }
  return out.str();
}

inline nlohmann::json trial_to_json(const TrialRecord& r) {
  nlohmann::json j{{"trial_index", r.trial_index},
                   {"branch", branch_name(r.branch)},
                   {"u_sc", r.collapse.u_sc},
                   {"t_sc", r.collapse.t_sc},
                   {"raw_weight_sq", r.collapse.raw_weight_sq},
                   {"steps", trial_steps(r)}};
  if (r.trajectory.equilibrium_center) {
    j["equilibrium_center"] = *r.trajectory.equilibrium_center;
  } else {
    j["equilibrium_center"] = nullptr;
  }
  return j;
}

inline std::string trials_to_json_text(const std::vector<TrialRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const TrialRecord& r : records) {
    arr.push_back(trial_to_json(r));
  }
  return arr.dump(2) + "\n";
}

// --- summaries ------------------------------------------------------------

namespace detail {
/// JSON has no inf; a degenerate zero-variance sample clamps to +-DBL_MAX.
inline double json_safe(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return 0.0;
  return std::copysign(std::numeric_limits<double>::max(), v);
}
} // namespace detail

inline nlohmann::json branch_stats_to_json(const BranchStats& s) {
  return nlohmann::json{
      {"n_trials", s.n_trials},
      {"n_converged", s.n_converged},
      {"mean_displacement", detail::json_safe(s.mean_displacement)},
      {"sd_displacement", detail::json_safe(s.sd_displacement)},
      {"t_stat_displacement", detail::json_safe(s.t_stat_displacement)},
      {"mean_steps", detail::json_safe(s.mean_steps)},
      {"mean_equilibrium_center", detail::json_safe(s.mean_equilibrium_center)}};
}

inline nlohmann::json summary_to_json(const EnsembleSummary& s) {
  return nlohmann::json{
      {"n_trials", s.n_trials},
      {"branch_prob", s.branch_prob},
      {"painful_frequency", s.painful_frequency},
      {"freq_sigma", s.freq_sigma},
      {"branch_freq_consistent", s.branch_freq_consistent},
      {"n_nonconverged", s.n_nonconverged},
      {"branches",
       {{"painful", branch_stats_to_json(s.painful)},
        {"neutral", branch_stats_to_json(s.neutral)}}}};
}

// --- snapshots --------------------------------------------------------

/// Writes the squared weights currently carried by a state as "u,weight_sq"
/// rows: the interaction distribution before the pulse exists, the brain
/// pulse afterwards.
inline void emit_distribution_snapshot(const SystemState& state,
                                       const std::filesystem::path& path) {
  std::ostringstream out;
  out << "u,weight_sq\n";
  if (state.phase == Phase::pre_hit || state.phase == Phase::collapsed) {
    const std::vector<double> grid = interaction_grid(state);
    const std::vector<double>& w = interaction_weights(state);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out << fmt_double(grid[i]) << ',' << fmt_double(w[i] * w[i]) << '\n';
    }
  } else {
    if (!state.brain_pulse) {
      throw ContractError("snapshot: pulsed state carries no brain pulse");
    }
    const Pulse& p = *state.brain_pulse;
    for (std::size_t i = 0; i < p.u_grid.size(); ++i) {
      out << fmt_double(p.u_grid[i]) << ','
          << fmt_double(p.weights[i] * p.weights[i]) << '\n';
    }
  }
  write_text_file(path, out.str());
}

/// Replays trial 0 and writes the three stage snapshots plus a drift
/// snapshot every `stride` steps (and the final step).
inline void emit_trajectory_snapshots(const ValidatedScenario& scenario,
                                      std::uint64_t master_seed,
                                      const std::filesystem::path& dir,
                                      std::size_t stride) {
  ensure_directory(dir);
  PhiloxStream stream(master_seed, 0);

  emit_distribution_snapshot(scenario.initial_state, dir / "stage1_pre_hit.csv");

  CollapseOutcome outcome = sample_collapse(scenario.initial_state, stream);
  SystemState collapsed = apply_collapse(scenario.initial_state, outcome);
  emit_distribution_snapshot(collapsed, dir / "stage2_collapsed.csv");

  auto [brain, phys] =
      dissolve_into_pulse(outcome, scenario.kernel, scenario.grid_step);
  SystemState pulsed = collapsed;
  pulsed.phase = Phase::pulsed;
  pulsed.brain_pulse = brain;
  pulsed.phys_pulse = phys;
  emit_distribution_snapshot(pulsed, dir / "stage3_pulsed.csv");

  const PainProfile pain = make_pain_profile(scenario, brain.u_grid);
  const RestoringPotential pot = make_restoring_potential(scenario, brain.u_grid);
  EvolveResult evolved =
      evolve_to_equilibrium(pulsed, pain, pot, scenario.drift, true);
  const auto& history = *evolved.trajectory.weights_history;
  if (stride == 0) stride = 1;
  for (std::size_t step = 0; step < history.size(); ++step) {
    if (step % stride != 0 && step + 1 != history.size()) continue;
    std::ostringstream out;
    out << "u,weight_sq\n";
    for (std::size_t i = 0; i < brain.u_grid.size(); ++i) {
      const double w = history[step][i];
      out << fmt_double(brain.u_grid[i]) << ',' << fmt_double(w * w) << '\n';
    }
    char name[32];
    std::snprintf(name, sizeof name, "drift_%06zu.csv", step);
    write_text_file(dir / name, out.str());
  }
}

inline void write_history_files(const std::vector<TrialRecord>& records,
                                const std::filesystem::path& dir,
                                OutputFormat format,
                                const std::vector<double>& grid) {
  ensure_directory(dir);
  for (const TrialRecord& r : records) {
    if (!r.trajectory.weights_history) continue;
    const auto& history = *r.trajectory.weights_history;
    char name[40];
    if (format == OutputFormat::csv) {
      std::snprintf(name, sizeof name, "trial_%06llu.csv",
                    static_cast<unsigned long long>(r.trial_index));
      std::ostringstream out;
      out << "step,u,weight_sq\n";
      for (std::size_t step = 0; step < history.size(); ++step) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const double u = r.collapse.u_sc + grid[i];
          const double w = history[step][i];
          out << step << ',' << fmt_double(u) << ',' << fmt_double(w * w)
              << '\n';
        }
      }
      write_text_file(dir / name, out.str());
    } else {
      std::snprintf(name, sizeof name, "trial_%06llu.json",
                    static_cast<unsigned long long>(r.trial_index));
      nlohmann::json j;
      std::vector<double> u(grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        u[i] = r.collapse.u_sc + grid[i];
      }
      j["u_grid"] = u;
      j["centers"] = r.trajectory.centers;
      nlohmann::json steps = nlohmann::json::array();
      for (const auto& amps : history) {
        std::vector<double> sq(amps.size());
        for (std::size_t i = 0; i < amps.size(); ++i) sq[i] = amps[i] * amps[i];
        steps.push_back(sq);
      }
      j["weights_sq"] = std::move(steps);
      write_text_file(dir / name, j.dump(2) + "\n");
    }
  }
}

// --- manifests --------------------------------------------------------

inline nlohmann::json make_manifest(const std::string& scenario_bytes,
                                    std::uint64_t master_seed,
                                    std::size_t n_trials, OutputFormat format) {
  return nlohmann::json{{"tool_version", kToolVersion},
                        {"scenario_hash", "fnv1a64:" + hex64(fnv1a64(scenario_bytes))},
                        {"master_seed", master_seed},
                        {"n_trials", n_trials},
                        {"format", format_name(format)}};
}

// --- CLI drivers ------------------------------------------------------

/// Exit codes: 0 success, 2 invalid scenario, 3 I/O failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidScenario = 2;
inline constexpr int kExitIoFailure = 3;

inline int run_scenario_cli(const RunConfig& cfg, std::ostream& err) {
  std::string raw;
  try {
    raw = slurp_file(cfg.scenario_path);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoFailure;
  }

  ValidatedScenario scenario;
  try {
    scenario = validate_scenario(nlohmann::json::parse(raw));
  } catch (const nlohmann::json::parse_error& e) {
    err << "error: scenario: " << e.what() << '\n';
    return kExitInvalidScenario;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidScenario;
  }

  try {
    const std::vector<TrialRecord> records = run_ensemble(
        scenario, cfg.master_seed, cfg.n_trials, cfg.weights_history);
    const Branch label = scenario.pain.mode == PainMode::neutral
                             ? Branch::neutral
                             : Branch::painful;
    const EnsembleSummary summary =
        ensemble_statistics(records, label == Branch::painful ? 1.0 : 0.0);

    const std::filesystem::path out_dir(cfg.out_dir);
    ensure_directory(out_dir);
    if (cfg.format == OutputFormat::csv) {
      write_text_file(out_dir / "trials.csv", trials_to_csv(records));
    } else {
      write_text_file(out_dir / "trials.json", trials_to_json_text(records));
    }
    write_text_file(out_dir / "summary.json", summary_to_json(summary).dump(2) + "\n");
    write_text_file(out_dir / "manifest.json",
                    make_manifest(raw, cfg.master_seed, cfg.n_trials, cfg.format)
                            .dump(2) +
                        "\n");
    if (cfg.weights_history && !records.empty()) {
      const PulseKernel& k = scenario.kernel;
      std::vector<double> offsets(2 * static_cast<std::size_t>(k.support_radius) + 1);
      for (std::size_t i = 0; i < offsets.size(); ++i) {
        offsets[i] =
            (static_cast<double>(i) - k.support_radius) * scenario.grid_step;
      }
      write_history_files(records, out_dir / "history", cfg.format, offsets);
    }
    if (!cfg.snapshot_dir.empty()) {
      emit_trajectory_snapshots(scenario, cfg.master_seed, cfg.snapshot_dir,
                                cfg.snapshot_stride);
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoFailure;
  }
  return kExitOk;
}

inline int run_beta_cli(const BetaRunConfig& cfg, std::ostream& err) {
  std::string raw;
  try {
    raw = slurp_file(cfg.scenario_path);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoFailure;
  }

  BetaScenario beta;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(raw);
    beta = validate_beta_scenario(doc);
  } catch (const nlohmann::json::parse_error& e) {
    err << "error: scenario: " << e.what() << '\n';
    return kExitInvalidScenario;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidScenario;
  }

  try {
    const std::filesystem::path out_dir(cfg.out_dir);
    ensure_directory(out_dir);

    std::vector<double> kappas = cfg.kappa_sweep;
    if (kappas.empty()) kappas.push_back(beta.painful.drift.kappa);

    nlohmann::json sweep = nlohmann::json::array();
    std::vector<std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t i = 0; i < kappas.size(); ++i) {
      BetaScenario variant = beta;
      variant.painful.drift.kappa = kappas[i];
      // Each sweep point gets its own seed so the branch sequences are
      // independent draws, not replays of one another.
      const std::uint64_t seed = cfg.master_seed + i;
      const std::vector<TrialRecord> records =
          run_beta_ensemble(variant, seed, cfg.n_trials);
      const EnsembleSummary summary =
          ensemble_statistics(records, beta.branch_prob);
      counts.emplace_back(summary.painful.n_trials, summary.neutral.n_trials);

      char name[40];
      std::snprintf(name, sizeof name, "trials_k%02zu.%s", i,
                    format_name(cfg.format));
      write_text_file(out_dir / name, cfg.format == OutputFormat::csv
                                          ? trials_to_csv(records)
                                          : trials_to_json_text(records));
      nlohmann::json entry{{"kappa", kappas[i]},
                           {"master_seed", seed},
                           {"summary", summary_to_json(summary)}};
      sweep.push_back(std::move(entry));
    }

    nlohmann::json result{{"branch_prob", beta.branch_prob},
                          {"kappa_sweep", std::move(sweep)}};
    if (counts.size() >= 2) {
      const ChiSquareResult chi = branch_count_chi_square(counts);
      result["chi_square"] = {{"statistic", chi.statistic},
                              {"dof", chi.dof},
                              {"p_value", chi.p_value}};
      bool all_consistent = chi.p_value > 0.01;
      for (const auto& entry : result["kappa_sweep"]) {
        if (!entry["summary"]["branch_freq_consistent"].get<bool>()) {
          all_consistent = false;
        }
      }
      result["no_pre_choice_suppression"] = all_consistent;
    }
    write_text_file(out_dir / "beta_summary.json", result.dump(2) + "\n");

    nlohmann::json manifest =
        make_manifest(raw, cfg.master_seed, cfg.n_trials, cfg.format);
    manifest["kappa_sweep"] = kappas;
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIoFailure;
  }
  return kExitOk;
}

} // namespace pulsesim
