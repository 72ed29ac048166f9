#pragma once

#include <cmath>

#include "pulsesim/errors.hpp"

namespace pulsesim {

// CODATA-rounded constants used throughout the spread estimates.
inline constexpr double kHbar = 1.054572e-34;         // J*s
inline constexpr double kAtomicMassKg = 1.66054e-27;  // kg per u

/// A migratory seed molecule characterized by its atomic mass and the
/// linear scale of its smallest (classical) volume.
struct SeedMolecule {
  double mass_u = 10000.0;           // atomic mass units
  double classical_width_m = 10e-9;  // meters
};

struct SpreadResult {
  double delta_v = 0.0;        // m/s
  double spread_length = 0.0;  // meters
  int receptors_covered = 0;
};

/// Minimal velocity uncertainty in one direction, dv = hbar / (m * dx).
/// `uncertainty_factor` scales hbar for sensitivity studies of the
/// dp*dx convention (1.0 reproduces the nominal estimate).
inline double heisenberg_velocity_uncertainty(const SeedMolecule& mol,
                                              double uncertainty_factor = 1.0) {
  if (mol.mass_u <= 0.0) {
    throw ValidationError("mass", "must be > 0");
  }
  if (mol.classical_width_m <= 0.0) {
    throw ValidationError("width", "must be > 0");
  }
  return uncertainty_factor * kHbar /
         (mol.mass_u * kAtomicMassKg * mol.classical_width_m);
}

/// Displacement along the line of flow, L = dv * dt.
inline double positional_spread(double delta_v, double elapsed_s) {
  if (elapsed_s < 0.0) {
    throw ValidationError("time", "must be >= 0");
  }
  return delta_v * elapsed_s;
}

/// Number of receptors a spread of that length can reach, counting the
/// molecule's own site: floor(spread / spacing) + 1. The tiny epsilon
/// keeps exact-multiple spreads from losing a site to representation
/// error in the division.
inline int receptor_coverage(double spread_length_m, double receptor_spacing_m) {
  if (receptor_spacing_m <= 0.0) {
    throw ValidationError("spacing", "must be > 0");
  }
  if (spread_length_m < 0.0) {
    throw ValidationError("spread_length", "must be >= 0");
  }
  const double ratio = spread_length_m / receptor_spacing_m;
  return static_cast<int>(std::floor(ratio + 1e-9)) + 1;
}

inline SpreadResult seed_spread_report(const SeedMolecule& mol,
                                       double elapsed_s,
                                       double receptor_spacing_m,
                                       double uncertainty_factor = 1.0) {
  SpreadResult result;
  result.delta_v = heisenberg_velocity_uncertainty(mol, uncertainty_factor);
  result.spread_length = positional_spread(result.delta_v, elapsed_s);
  result.receptors_covered =
      receptor_coverage(result.spread_length, receptor_spacing_m);
  return result;
}

} // namespace pulsesim
