#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pulsesim/core_state.hpp"
#include "pulsesim/errors.hpp"
#include "pulsesim/rng.hpp"

namespace pulsesim {

/// Result of the stochastic hit: the chosen center, the hit time inside
/// the stimulus rise window, and the raw (pre-pulse-normalization)
/// squared weight of the chosen component.
struct CollapseOutcome {
  double u_sc = 0.0;
  double t_sc = 0.0;
  double raw_weight_sq = 0.0;
  Path path = Path::unconscious;
};

namespace detail {

inline std::vector<double> squared_probs(const std::vector<double>& weights) {
  if (!is_square_normalized(weights)) {
    throw ContractError("selection requires a normalized distribution "
                        "(sum of squared weights must be 1)");
  }
  std::vector<double> p(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    p[i] = weights[i] * weights[i];
  }
  return p;
}

inline std::size_t draw_index(const std::vector<double>& probs, double u) {
  double cum = 0.0;
  std::size_t last_support = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) {
      last_support = i;
      cum += probs[i];
      if (u < cum) {
        return i;
      }
    }
  }
  if (last_support == probs.size()) {
    throw ContractError("cannot sample from an all-zero probability vector");
  }
  return last_support; // u landed in the rounding tail of the cumulative sum
}

// Inverse CDF of the hit-time density d/dt[r(t)^2] on (0, rise_time],
// where r(t) is the primed-branch amplitude ramp.
inline double invert_hit_time(const StimulusProfile& stimulus, double u01) {
  const double T = stimulus.rise_time;
  switch (stimulus.ramp) {
  case RampShape::linear: // r = t/T, CDF = (t/T)^2
    return T * std::sqrt(u01);
  case RampShape::quadratic: // r = (t/T)^2, CDF = (t/T)^4
    return T * std::pow(u01, 0.25);
  case RampShape::sqrt: // r = sqrt(t/T), CDF = t/T
    return T * u01;
  }
  throw ContractError("unknown ramp shape");
}

} // namespace detail

/// Born probabilities p_u = weight_u^2 for the stochastic choice.
inline std::vector<double>
selection_probabilities(const ReceptorDistribution& dist) {
  return detail::squared_probs(dist.weights);
}

inline std::vector<double> selection_probabilities(const ComposedPrior& prior) {
  return detail::squared_probs(prior.weights);
}

inline std::vector<double> selection_probabilities(const SystemState& state) {
  return detail::squared_probs(interaction_weights(state));
}

/// Conscious-path prior P_{u'} = sum_u R_u F_u(u') on the union of the
/// kernel supports shifted to each u (unit-spaced offsets), normalized.
inline ComposedPrior compose_conscious_prior(const ReceptorDistribution& dist,
                                             const PulseKernel& kernel) {
  if (!is_square_normalized(dist.weights)) {
    throw ContractError("compose_conscious_prior requires a normalized "
                        "distribution");
  }
  const std::vector<double> f = kernel_amplitudes(kernel, 1.0);
  const int r = kernel.support_radius;
  std::map<long long, double> acc;
  for (std::size_t i = 0; i < dist.u_values.size(); ++i) {
    for (int j = -r; j <= r; ++j) {
      acc[static_cast<long long>(dist.u_values[i]) + j] +=
          dist.weights[i] * f[static_cast<std::size_t>(j + r)];
    }
  }
  if (acc.empty()) {
    throw std::logic_error("internal error: empty composed-prior grid");
  }
  ComposedPrior prior;
  prior.u_grid.reserve(acc.size());
  prior.weights.reserve(acc.size());
  for (const auto& [u, w] : acc) {
    prior.u_grid.push_back(static_cast<double>(u));
    prior.weights.push_back(w);
  }
  prior.weights = normalize_distribution(std::move(prior.weights));
  return prior;
}

/// Draws the stochastic hit (u_sc, t_sc): u_sc with probability weight^2
/// over the interaction branch, t_sc from the ramp-derived density on
/// (0, rise_time]. The reduction is certain; every trajectory collapses
/// exactly once.
inline CollapseOutcome sample_collapse(const SystemState& state,
                                       PhiloxStream& rng) {
  if (state.phase != Phase::pre_hit) {
    throw ContractError("sample_collapse requires phase == pre_hit");
  }
  const std::vector<double> probs = selection_probabilities(state);
  const std::size_t chosen = detail::draw_index(probs, rng.next_double());
  const double t_sc =
      detail::invert_hit_time(state.stimulus, rng.next_double_open_low());

  CollapseOutcome outcome;
  outcome.u_sc = interaction_grid(state)[chosen];
  outcome.t_sc = t_sc;
  outcome.raw_weight_sq = probs[chosen];
  outcome.path = state.path;
  return outcome;
}

/// The hit zeroes the pre-interaction branch and every interaction
/// component except the chosen one, which keeps its raw amplitude
/// (normalization is not preserved in this reduction).
inline SystemState apply_collapse(const SystemState& state,
                                  const CollapseOutcome& outcome) {
  if (state.phase != Phase::pre_hit) {
    throw ContractError("apply_collapse requires phase == pre_hit");
  }
  SystemState out = state;
  out.phase = Phase::collapsed;
  out.pre_branch_weight_sq = 0.0;
  out.t = outcome.t_sc;
  auto zero_except = [&](std::vector<double>& weights,
                         const auto& grid) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (static_cast<double>(grid[i]) != outcome.u_sc) {
        weights[i] = 0.0;
      }
    }
  };
  if (auto* dist = std::get_if<ReceptorDistribution>(&out.interaction)) {
    zero_except(dist->weights, dist->u_values);
  } else {
    auto& prior = std::get<ComposedPrior>(out.interaction);
    zero_except(prior.weights, prior.u_grid);
  }
  return out;
}

/// Dissolution of the chosen state into the conscious pulse and its
/// correlated physiological pulse: identical grids, identical weights.
inline std::pair<Pulse, Pulse> dissolve_into_pulse(const CollapseOutcome& outcome,
                                                   const PulseKernel& kernel,
                                                   double grid_step) {
  return make_pulse_pair(outcome.u_sc, kernel, grid_step);
}

struct ReduceResult {
  SystemState state;
  CollapseOutcome outcome;
};

/// Full reduction: stochastic hit, branch zeroing, dissolution into the
/// correlated pulse pair. phase moves pre_hit -> collapsed -> pulsed.
inline ReduceResult reduce_system(const SystemState& state,
                                  const PulseKernel& kernel, double grid_step,
                                  PhiloxStream& rng) {
  const CollapseOutcome outcome = sample_collapse(state, rng);
  SystemState out = apply_collapse(state, outcome);
  auto [brain, phys] = dissolve_into_pulse(outcome, kernel, grid_step);
  out.phase = Phase::pulsed;
  out.brain_pulse = std::move(brain);
  out.phys_pulse = std::move(phys);
  return {std::move(out), outcome};
}

} // namespace pulsesim
