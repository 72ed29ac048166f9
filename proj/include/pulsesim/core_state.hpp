#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pulsesim/errors.hpp"

namespace pulsesim {

inline constexpr double kNormTolerance = 1e-9;

enum class Phase { pre_hit, collapsed, pulsed, equilibrated };
enum class Path { unconscious, conscious_prior };
enum class PulseKind { brain, physiological };
enum class RampShape { linear, quadratic, sqrt };

inline double sum_of_squares(const std::vector<double>& w) {
  double s = 0.0;
  for (double x : w) {
    s += x * x;
  }
  return s;
}

inline bool is_square_normalized(const std::vector<double>& w,
                                 double tol = kNormTolerance) {
  return std::abs(sum_of_squares(w) - 1.0) <= tol;
}

/// Scales a weight vector so its squared entries sum to one. Ratios of
/// nonzero entries are preserved; an all-zero (or non-finite) vector is
/// degenerate and rejected.
inline std::vector<double> normalize_distribution(std::vector<double> weights) {
  double norm_sq = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w)) {
      throw ValidationError("weights", "non-finite weight");
    }
    norm_sq += w * w;
  }
  if (norm_sq <= 0.0) {
    throw ValidationError("weights", "degenerate distribution: all weights zero");
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& w : weights) {
    w *= inv;
  }
  return weights;
}

/// Amplitude weights over the discrete receptor-occupation numbers u.
struct ReceptorDistribution {
  std::vector<int> u_values;   // strictly increasing
  std::vector<double> weights; // non-negative, sum of squares = 1
  int u0 = 0;                  // nominal central occupation number
};

/// Composed prior over the continuous-index u' grid (the conscious path's
/// pre-hit distribution, built from the base distribution and the kernel).
struct ComposedPrior {
  std::vector<double> u_grid;  // strictly increasing
  std::vector<double> weights; // non-negative, sum of squares = 1
};

struct StimulusProfile {
  double amplitude_sq = 1.0; // square modulus of the stimulus branch
  double rise_time = 1.0;    // seconds over which the primed branch grows
  RampShape ramp = RampShape::linear;
};

/// Dissolution kernel: symmetric amplitude profile around a pulse center.
struct PulseKernel {
  double sigma = 1.0;     // half-width in u units
  int support_radius = 1; // grid points on each side of the center
};

/// Generates the 2*support_radius+1 kernel amplitudes at offsets
/// j*spacing, j in [-r, r]: Gaussian profile exp(-(j*spacing)^2/(4 sigma^2)),
/// square-normalized. Symmetric about the center by construction.
inline std::vector<double> kernel_amplitudes(const PulseKernel& kernel,
                                             double spacing) {
  if (kernel.sigma <= 0.0) {
    throw ValidationError("kernel.sigma", "must be > 0");
  }
  if (kernel.support_radius < 1) {
    throw ValidationError("kernel.support_radius", "must be >= 1");
  }
  if (spacing <= 0.0) {
    throw ValidationError("kernel.grid_step", "must be > 0");
  }
  const int r = kernel.support_radius;
  std::vector<double> w(2 * r + 1);
  for (int j = -r; j <= r; ++j) {
    const double du = j * spacing;
    w[j + r] = std::exp(-(du * du) / (4.0 * kernel.sigma * kernel.sigma));
  }
  return normalize_distribution(std::move(w));
}

/// A normalized weighted neighborhood of states around a center.
struct Pulse {
  double center = 0.0;
  std::vector<double> u_grid;
  std::vector<double> weights; // non-negative amplitudes, sum of squares = 1
  PulseKind kind = PulseKind::brain;
};

/// Builds the correlated pulse pair on a grid centered at `center` with
/// spacing `grid_step`. Brain and physiological weights are the same
/// vector, copied, so they compare bitwise equal.
inline std::pair<Pulse, Pulse> make_pulse_pair(double center,
                                               const PulseKernel& kernel,
                                               double grid_step) {
  std::vector<double> weights = kernel_amplitudes(kernel, grid_step);
  const int r = kernel.support_radius;
  std::vector<double> grid(2 * r + 1);
  for (int j = -r; j <= r; ++j) {
    grid[j + r] = center + j * grid_step;
  }
  Pulse brain{center, grid, weights, PulseKind::brain};
  Pulse phys{center, std::move(grid), std::move(weights),
             PulseKind::physiological};
  return {std::move(brain), std::move(phys)};
}

/// Drift and equilibrium parameters (Rule-5 flux plus the restoring
/// counter-flux).
struct DriftParams {
  double kappa = 0.0;  // pain-flux coefficient, per unit time
  double lambda = 0.0; // restoring-flux coefficient, per unit time
  double dt = 1.0;     // seconds
  int max_steps = 1000;
  double capacity_u = 0.0; // occupation number where seed supply saturates
  double convergence_eps = 1e-12;
};

/// Two-branch system state: the pre-interaction branch plus the ramping
/// interaction branch, then the collapsed / pulsed stages after the hit.
struct SystemState {
  Phase phase = Phase::pre_hit;
  Path path = Path::unconscious;
  StimulusProfile stimulus;
  double pre_branch_weight_sq = 1.0;
  std::variant<ReceptorDistribution, ComposedPrior> interaction;
  std::optional<Pulse> brain_pulse;
  std::optional<Pulse> phys_pulse;
  double t = 0.0; // seconds, t0 = 0
};

inline const std::vector<double>&
interaction_weights(const SystemState& state) {
  if (const auto* dist = std::get_if<ReceptorDistribution>(&state.interaction)) {
    return dist->weights;
  }
  return std::get<ComposedPrior>(state.interaction).weights;
}

inline std::vector<double> interaction_grid(const SystemState& state) {
  if (const auto* dist = std::get_if<ReceptorDistribution>(&state.interaction)) {
    return std::vector<double>(dist->u_values.begin(), dist->u_values.end());
  }
  return std::get<ComposedPrior>(state.interaction).u_grid;
}

} // namespace pulsesim
