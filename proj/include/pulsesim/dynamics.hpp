#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pulsesim/core_state.hpp"
#include "pulsesim/errors.hpp"

namespace pulsesim {

enum class PainMode { linear_decreasing, custom, neutral };

/// Pain intensity evaluated on the pulse grid. Larger u' means more
/// occupied receptors and less pain, so a painful profile decreases in u'.
struct PainProfile {
  std::vector<double> values;
  bool monotone_flag = false; // strictly decreasing in u'
};

struct RestoringPotential {
  std::vector<double> values;
  double capacity_u = 0.0; // onset of seed scarcity
};

struct DriftTrajectory {
  // Pulse centers at the recorded steps: with full recording, step 0 and
  // every performed step; with compact recording, step 0 and the final
  // step only. steps_taken always counts the performed steps.
  std::vector<double> centers;
  int steps_taken = 0;
  std::optional<std::vector<std::vector<double>>> weights_history;
  std::optional<int> steps_to_equilibrium;
  std::optional<double> equilibrium_center;
};

inline bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) {
      return false;
    }
  }
  return !v.empty();
}

inline PainProfile pain_profile(const std::vector<double>& grid, PainMode mode,
                                double slope) {
  PainProfile pain;
  pain.values.resize(grid.size(), 0.0);
  switch (mode) {
  case PainMode::neutral:
    pain.monotone_flag = false;
    break;
  case PainMode::linear_decreasing:
    if (slope <= 0.0) {
      throw ValidationError("pain.slope", "must be > 0 for linear_decreasing");
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      pain.values[i] = -slope * grid[i];
    }
    pain.monotone_flag = true;
    break;
  case PainMode::custom:
    throw ContractError("custom pain profiles use custom_pain_profile()");
  }
  return pain;
}

inline PainProfile custom_pain_profile(const std::vector<double>& grid,
                                       std::vector<double> values) {
  if (values.size() != grid.size()) {
    throw ValidationError("pain.values",
                          "length must match the pulse grid (" +
                              std::to_string(grid.size()) + " points)");
  }
  PainProfile pain;
  pain.monotone_flag = strictly_decreasing(values);
  pain.values = std::move(values);
  return pain;
}

/// V(u') = stiffness * max(u' - capacity_u, 0): flat below capacity,
/// rising ramp beyond it.
inline RestoringPotential restoring_potential(const std::vector<double>& grid,
                                              double capacity_u,
                                              double stiffness) {
  if (stiffness < 0.0) {
    throw ValidationError("potential.stiffness", "must be >= 0");
  }
  RestoringPotential pot;
  pot.capacity_u = capacity_u;
  pot.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    pot.values[i] = stiffness * std::max(grid[i] - capacity_u, 0.0);
  }
  return pot;
}

/// Squared-weight mean of the pulse position.
inline double pulse_center(const Pulse& p) {
  double c = 0.0;
  for (std::size_t i = 0; i < p.u_grid.size(); ++i) {
    c += p.u_grid[i] * p.weights[i] * p.weights[i];
  }
  return c;
}

namespace detail {

// Net rightward flux across each interface (j, j+1), dt included:
//   pain flux      f = kappa  * max(pi_j - pi_{j+1}, 0) * sq_j     * dt
//   restoring flux g = lambda * max(V_{j+1} - V_j, 0)   * sq_{j+1} * dt
// Returns true if any interface carries nonzero net flux.
inline bool compute_net_fluxes(const std::vector<long double>& sq,
                               const PainProfile& pain,
                               const RestoringPotential& pot,
                               const DriftParams& params,
                               std::vector<long double>& net) {
  bool any = false;
  const long double kdt = static_cast<long double>(params.kappa) * params.dt;
  const long double ldt = static_cast<long double>(params.lambda) * params.dt;
  for (std::size_t j = 0; j + 1 < sq.size(); ++j) {
    const double pain_gap = pain.values[j] - pain.values[j + 1];
    const double pot_gap = pot.values[j + 1] - pot.values[j];
    const long double f = pain_gap > 0.0 ? kdt * pain_gap * sq[j] : 0.0L;
    const long double g = pot_gap > 0.0 ? ldt * pot_gap * sq[j + 1] : 0.0L;
    net[j] = f - g;
    any = any || net[j] != 0.0L;
  }
  return any;
}

// Simultaneous transfer-only update. Aborts (state untouched) if any
// squared weight would go negative.
inline void apply_net_fluxes(std::vector<long double>& sq,
                             const std::vector<long double>& net,
                             std::vector<long double>& scratch) {
  const std::size_t n = sq.size();
  for (std::size_t j = 0; j < n; ++j) {
    long double v = sq[j];
    if (j > 0) {
      v += net[j - 1];
    }
    if (j + 1 < n) {
      v -= net[j];
    }
    if (v < 0.0L) {
      throw CflError("CFL violation at runtime: squared weight at grid index " +
                     std::to_string(j) + " would become " +
                     std::to_string(static_cast<double>(v)) +
                     "; reduce dt, kappa, or lambda");
    }
    scratch[j] = v;
  }
  sq.swap(scratch);
}

inline long double center_of(const std::vector<double>& grid,
                             const std::vector<long double>& sq) {
  long double c = 0.0L;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    c += grid[i] * sq[i];
  }
  return c;
}

inline void check_pulse_pair(const Pulse& brain, const Pulse& phys,
                             const PainProfile& pain,
                             const RestoringPotential& pot) {
  if (brain.u_grid != phys.u_grid) {
    throw ContractError("brain and physiological pulses must share a grid");
  }
  if (brain.weights != phys.weights) {
    throw ContractError("brain and physiological pulse weights diverged");
  }
  if (pain.values.size() != brain.u_grid.size() ||
      pot.values.size() != brain.u_grid.size()) {
    throw ContractError("pain/potential profiles must match the pulse grid");
  }
}

} // namespace detail

/// One Rule-5 step: rightward pain flux and leftward restoring flux on the
/// squared weights, applied simultaneously to all adjacent pairs. Total
/// squared weight is conserved (transfers only); both pulses receive the
/// identical update. A step with zero flux everywhere returns the inputs
/// bitwise unchanged.
inline std::pair<Pulse, Pulse> drift_step(const Pulse& brain, const Pulse& phys,
                                          const PainProfile& pain,
                                          const RestoringPotential& pot,
                                          const DriftParams& params) {
  detail::check_pulse_pair(brain, phys, pain, pot);
  const std::size_t n = brain.weights.size();
  std::vector<long double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    sq[i] = static_cast<long double>(brain.weights[i]) * brain.weights[i];
  }
  std::vector<long double> net(n > 0 ? n - 1 : 0);
  if (!detail::compute_net_fluxes(sq, pain, pot, params, net)) {
    return {brain, phys};
  }
  std::vector<long double> scratch(n);
  detail::apply_net_fluxes(sq, net, scratch);

  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = static_cast<double>(std::sqrt(sq[i]));
  }
  const double center = static_cast<double>(detail::center_of(brain.u_grid, sq));
  Pulse new_brain{center, brain.u_grid, weights, PulseKind::brain};
  Pulse new_phys{center, phys.u_grid, std::move(weights),
                 PulseKind::physiological};
  return {std::move(new_brain), std::move(new_phys)};
}

/// Largest |pain flux - restoring flux| over adjacent pairs (dt included).
/// Zero at a flux-balance equilibrium.
inline double max_flux_imbalance(const Pulse& pulse, const PainProfile& pain,
                                 const RestoringPotential& pot,
                                 const DriftParams& params) {
  double worst = 0.0;
  for (std::size_t j = 0; j + 1 < pulse.weights.size(); ++j) {
    const double sq_j = pulse.weights[j] * pulse.weights[j];
    const double sq_j1 = pulse.weights[j + 1] * pulse.weights[j + 1];
    const double pain_gap = std::max(pain.values[j] - pain.values[j + 1], 0.0);
    const double pot_gap = std::max(pot.values[j + 1] - pot.values[j], 0.0);
    const double f = params.kappa * pain_gap * sq_j * params.dt;
    const double g = params.lambda * pot_gap * sq_j1 * params.dt;
    worst = std::max(worst, std::abs(f - g));
  }
  return worst;
}

struct EvolveResult {
  SystemState state;
  DriftTrajectory trajectory;
};

/// Iterates the Rule-5 step until the center stops moving: convergence is
/// |center(t+dt) - center(t)| < convergence_eps for 10 consecutive steps,
/// or immediately at an exact fixed point (zero net flux everywhere).
/// Non-convergence within max_steps is not an error; the trajectory is
/// returned with equilibrium_center unset. With record_centers = false
/// only the initial and final centers are kept (large ensembles).
inline EvolveResult evolve_to_equilibrium(const SystemState& state,
                                          const PainProfile& pain,
                                          const RestoringPotential& pot,
                                          const DriftParams& params,
                                          bool record_weights_history = false,
                                          bool record_centers = true) {
  if (state.phase != Phase::pulsed) {
    throw ContractError("evolve_to_equilibrium requires phase == pulsed");
  }
  if (!state.brain_pulse || !state.phys_pulse) {
    throw ContractError("pulsed state is missing its pulses");
  }
  detail::check_pulse_pair(*state.brain_pulse, *state.phys_pulse, pain, pot);
  if (record_weights_history) {
    record_centers = true; // history entries align with recorded centers
  }

  const Pulse& initial = *state.brain_pulse;
  const std::size_t n = initial.weights.size();
  std::vector<long double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    sq[i] = static_cast<long double>(initial.weights[i]) * initial.weights[i];
  }

  DriftTrajectory traj;
  if (record_weights_history) {
    traj.weights_history.emplace();
  }
  auto record = [&](double center) {
    traj.centers.push_back(center);
    if (traj.weights_history) {
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = static_cast<double>(std::sqrt(sq[i]));
      }
      traj.weights_history->push_back(std::move(w));
    }
  };

  double center = static_cast<double>(detail::center_of(initial.u_grid, sq));
  record(center);

  std::vector<long double> net(n > 0 ? n - 1 : 0);
  std::vector<long double> scratch(n);
  bool converged = false;
  int steps = 0;
  int quiet_run = 0;
  for (int step = 1; step <= params.max_steps; ++step) {
    const bool moving = detail::compute_net_fluxes(sq, pain, pot, params, net);
    if (!moving) {
      // Exact fixed point: nothing can change on any later step.
      steps = step;
      if (record_centers) record(center);
      converged = true;
      break;
    }
    detail::apply_net_fluxes(sq, net, scratch);
    const double new_center =
        static_cast<double>(detail::center_of(initial.u_grid, sq));
    steps = step;
    if (record_centers) record(new_center);
    quiet_run = std::abs(new_center - center) < params.convergence_eps
                    ? quiet_run + 1
                    : 0;
    center = new_center;
    if (quiet_run >= 10) {
      converged = true;
      break;
    }
  }
  if (!record_centers && steps > 0) {
    record(center);
  }
  traj.steps_taken = steps;

  if (converged) {
    traj.steps_to_equilibrium = steps;
    traj.equilibrium_center = traj.centers.back();
  }

  std::vector<double> weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    weights[i] = static_cast<double>(std::sqrt(sq[i]));
  }
  SystemState out = state;
  out.phase = converged ? Phase::equilibrated : Phase::pulsed;
  out.t = state.t + steps * params.dt;
  out.brain_pulse = Pulse{traj.centers.back(), initial.u_grid, weights,
                          PulseKind::brain};
  out.phys_pulse = Pulse{traj.centers.back(), initial.u_grid,
                         std::move(weights), PulseKind::physiological};
  return {std::move(out), std::move(traj)};
}

} // namespace pulsesim
