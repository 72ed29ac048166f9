#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "pulsesim/collapse.hpp"
#include "pulsesim/dynamics.hpp"
#include "pulsesim/rng.hpp"
#include "pulsesim/scenario.hpp"

namespace pulsesim {

enum class Branch { painful, neutral };

inline const char* branch_name(Branch b) {
  return b == Branch::painful ? "painful" : "neutral";
}

struct TrialRecord {
  std::uint64_t trial_index = 0;
  Branch branch = Branch::painful;
  CollapseOutcome collapse;
  DriftTrajectory trajectory;
};

/// Runs one full trial on an already validated scenario: collapse to a
/// conscious pulse, then drift to equilibrium. All randomness comes from
/// the caller's stream, so a trial is a pure function of (scenario, stream).
inline TrialRecord run_trial(const ValidatedScenario& scenario, Branch branch,
                             PhiloxStream& stream,
                             bool record_weights_history = false,
                             bool record_centers = true) {
  TrialRecord rec;
  rec.trial_index = stream.stream_id();
  rec.branch = branch;

  ReduceResult reduced = reduce_system(scenario.initial_state, scenario.kernel,
                                       scenario.grid_step, stream);
  rec.collapse = reduced.outcome;

  const std::vector<double>& grid = reduced.state.brain_pulse->u_grid;
  const PainProfile pain = make_pain_profile(scenario, grid);
  const RestoringPotential pot = make_restoring_potential(scenario, grid);
  EvolveResult evolved =
      evolve_to_equilibrium(reduced.state, pain, pot, scenario.drift,
                            record_weights_history, record_centers);
  rec.trajectory = std::move(evolved.trajectory);
  return rec;
}

/// One trial of the two-branch experiment. The branch draw happens FIRST,
/// from the same stream as the rest of the trial, so the choice of branch
/// can never peek at the collapse outcome.
inline TrialRecord run_beta_trial(const BetaScenario& beta,
                                  PhiloxStream& stream,
                                  bool record_weights_history = false,
                                  bool record_centers = true) {
  const double u = stream.next_double();
  const Branch branch = u < beta.branch_prob ? Branch::painful : Branch::neutral;
  const ValidatedScenario& scenario =
      branch == Branch::painful ? beta.painful : beta.neutral;
  return run_trial(scenario, branch, stream, record_weights_history,
                   record_centers);
}

namespace detail {

inline unsigned resolve_thread_count(std::size_t n_trials) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("PULSESIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) hw = static_cast<unsigned>(v);
  }
  if (n_trials < hw) hw = static_cast<unsigned>(n_trials == 0 ? 1 : n_trials);
  return hw;
}

/// Runs fn(stream) for trial indices [0, n): each trial gets its own
/// counter-based stream keyed by (master_seed, trial_index), so results are
/// identical for any thread count and trials can be replayed one at a time.
template <typename TrialFn>
std::vector<TrialRecord> run_indexed(std::uint64_t master_seed,
                                     std::size_t n_trials, TrialFn fn) {
  std::vector<TrialRecord> records(n_trials);
  const unsigned n_threads = resolve_thread_count(n_trials);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n_trials) return;
      try {
        PhiloxStream stream(master_seed, static_cast<std::uint64_t>(i));
        records[i] = fn(stream);
        records[i].trial_index = static_cast<std::uint64_t>(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(n_trials);
        return;
      }
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return records;
}

} // namespace detail

/// Ensemble runners keep trajectories compact (initial and final centers)
/// unless a weights history was asked for; a 10^5-trial ensemble stays
/// small in memory.
inline std::vector<TrialRecord>
run_ensemble(const ValidatedScenario& scenario, std::uint64_t master_seed,
             std::size_t n_trials, bool record_weights_history = false) {
  const Branch label =
      scenario.pain.mode == PainMode::neutral ? Branch::neutral : Branch::painful;
  return detail::run_indexed(master_seed, n_trials, [&](PhiloxStream& stream) {
    return run_trial(scenario, label, stream, record_weights_history,
                     record_weights_history);
  });
}

inline std::vector<TrialRecord>
run_beta_ensemble(const BetaScenario& beta, std::uint64_t master_seed,
                  std::size_t n_trials, bool record_weights_history = false) {
  return detail::run_indexed(master_seed, n_trials, [&](PhiloxStream& stream) {
    return run_beta_trial(beta, stream, record_weights_history,
                          record_weights_history);
  });
}

struct BranchStats {
  std::size_t n_trials = 0;
  std::size_t n_converged = 0;
  double mean_displacement = 0.0;
  double sd_displacement = 0.0;
  double t_stat_displacement = 0.0; // one-sided, H0: mean displacement == 0
  double mean_steps = 0.0;
  double mean_equilibrium_center = 0.0;
};

struct EnsembleSummary {
  std::size_t n_trials = 0;
  double branch_prob = 1.0;          // expected painful-branch probability
  double painful_frequency = 0.0;
  double freq_sigma = 0.0;           // sqrt(p(1-p)/N)
  bool branch_freq_consistent = true; // |freq - p| <= 3 sigma
  std::size_t n_nonconverged = 0;
  BranchStats painful;
  BranchStats neutral;
};

inline double trial_displacement(const TrialRecord& rec) {
  return rec.trajectory.centers.back() - rec.trajectory.centers.front();
}

inline EnsembleSummary ensemble_statistics(const std::vector<TrialRecord>& records,
                                           double branch_prob) {
  EnsembleSummary summary;
  summary.n_trials = records.size();
  summary.branch_prob = branch_prob;

  auto fill = [](BranchStats& stats, const std::vector<const TrialRecord*>& rs) {
    stats.n_trials = rs.size();
    if (rs.empty()) return;
    double sum_d = 0.0, sum_steps = 0.0, sum_center = 0.0;
    for (const TrialRecord* r : rs) {
      sum_d += trial_displacement(*r);
      sum_steps += static_cast<double>(r->trajectory.steps_taken);
      if (r->trajectory.equilibrium_center) {
        ++stats.n_converged;
        sum_center += *r->trajectory.equilibrium_center;
      }
    }
    stats.mean_displacement = sum_d / static_cast<double>(rs.size());
    stats.mean_steps = sum_steps / static_cast<double>(rs.size());
    stats.mean_equilibrium_center =
        stats.n_converged ? sum_center / static_cast<double>(stats.n_converged)
                          : 0.0;
    if (rs.size() > 1) {
      double ss = 0.0;
      for (const TrialRecord* r : rs) {
        const double d = trial_displacement(*r) - stats.mean_displacement;
        ss += d * d;
      }
      stats.sd_displacement =
          std::sqrt(ss / static_cast<double>(rs.size() - 1));
    }
    if (stats.sd_displacement > 0.0) {
      stats.t_stat_displacement =
          stats.mean_displacement /
          (stats.sd_displacement / std::sqrt(static_cast<double>(rs.size())));
    } else {
      // Degenerate sample: every displacement identical. The one-sided
      // statistic is unbounded whenever the common value is nonzero.
      stats.t_stat_displacement =
          stats.mean_displacement == 0.0
              ? 0.0
              : std::copysign(std::numeric_limits<double>::infinity(),
                              stats.mean_displacement);
    }
  };

  std::vector<const TrialRecord*> painful, neutral;
  for (const TrialRecord& r : records) {
    (r.branch == Branch::painful ? painful : neutral).push_back(&r);
    if (!r.trajectory.equilibrium_center) ++summary.n_nonconverged;
  }
  fill(summary.painful, painful);
  fill(summary.neutral, neutral);

  if (!records.empty()) {
    summary.painful_frequency =
        static_cast<double>(painful.size()) / static_cast<double>(records.size());
    summary.freq_sigma = std::sqrt(branch_prob * (1.0 - branch_prob) /
                                   static_cast<double>(records.size()));
    summary.branch_freq_consistent =
        std::abs(summary.painful_frequency - branch_prob) <=
        3.0 * summary.freq_sigma;
  }
  return summary;
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Pearson chi-square test of homogeneity on a k x 2 contingency table of
/// (painful, neutral) branch counts, one row per experimental condition.
inline ChiSquareResult
branch_count_chi_square(const std::vector<std::pair<std::size_t, std::size_t>>& counts) {
  ChiSquareResult result;
  if (counts.size() < 2) return result;
  double total = 0.0, total_painful = 0.0, total_neutral = 0.0;
  for (const auto& [p, n] : counts) {
    total_painful += static_cast<double>(p);
    total_neutral += static_cast<double>(n);
  }
  total = total_painful + total_neutral;
  if (total == 0.0 || total_painful == 0.0 || total_neutral == 0.0) return result;
  for (const auto& [p, n] : counts) {
    const double row = static_cast<double>(p + n);
    if (row == 0.0) continue;
    const double exp_p = row * total_painful / total;
    const double exp_n = row * total_neutral / total;
    const double dp = static_cast<double>(p) - exp_p;
    const double dn = static_cast<double>(n) - exp_n;
    result.statistic += dp * dp / exp_p + dn * dn / exp_n;
  }
  result.dof = static_cast<int>(counts.size()) - 1;
  result.p_value =
      boost::math::gamma_q(result.dof / 2.0, result.statistic / 2.0);
  return result;
}

} // namespace pulsesim
