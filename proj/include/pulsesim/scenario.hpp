#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulsesim/collapse.hpp"
#include "pulsesim/core_state.hpp"
#include "pulsesim/dynamics.hpp"
#include "pulsesim/errors.hpp"

namespace pulsesim {

struct PainSpec {
  PainMode mode = PainMode::neutral;
  double slope = 0.0;              // linear_decreasing only
  std::vector<double> values;      // custom only, one per pulse grid point
};

struct PotentialSpec {
  double stiffness = 0.0; // ramp slope beyond capacity_u
};

/// A scenario after validation: every invariant holds, weights are
/// normalized, and initial_state is ready to run at phase pre_hit, t = 0.
struct ValidatedScenario {
  StimulusProfile stimulus;
  ReceptorDistribution distribution;
  std::optional<ReceptorDistribution> conscious_distribution;
  PulseKernel kernel;
  double grid_step = 1.0;
  DriftParams drift;
  PainSpec pain;
  PotentialSpec potential;
  Path path = Path::unconscious;
  SystemState initial_state;
};

struct BetaScenario {
  ValidatedScenario painful;
  ValidatedScenario neutral;
  double branch_prob = 0.5;
};

namespace detail {

using nlohmann::json;

inline std::string joined(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline const json& require_section(const json& root, const std::string& prefix,
                                   const char* key) {
  if (!root.contains(key)) {
    throw ValidationError(joined(prefix, key), "missing required section");
  }
  const json& sec = root.at(key);
  if (!sec.is_object()) {
    throw ValidationError(joined(prefix, key), "must be an object");
  }
  return sec;
}

inline void reject_unknown_keys(const json& obj, const std::string& path,
                                std::initializer_list<const char*> known) {
  for (const auto& item : obj.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) {
          return item.key() == k;
        }) == known.end()) {
      throw ValidationError(joined(path, item.key()), "unknown key");
    }
  }
}

inline double get_number(const json& obj, const std::string& path,
                         const char* key) {
  if (!obj.contains(key)) {
    throw ValidationError(joined(path, key), "missing required key");
  }
  if (!obj.at(key).is_number()) {
    throw ValidationError(joined(path, key), "must be a number");
  }
  return obj.at(key).get<double>();
}

inline double get_number_or(const json& obj, const std::string& path,
                            const char* key, double fallback) {
  if (!obj.contains(key)) {
    return fallback;
  }
  if (!obj.at(key).is_number()) {
    throw ValidationError(joined(path, key), "must be a number");
  }
  return obj.at(key).get<double>();
}

inline int get_int(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) {
    throw ValidationError(joined(path, key), "missing required key");
  }
  if (!obj.at(key).is_number_integer()) {
    throw ValidationError(joined(path, key), "must be an integer");
  }
  return obj.at(key).get<int>();
}

inline std::string get_string_or(const json& obj, const std::string& path,
                                 const char* key, const std::string& fallback) {
  if (!obj.contains(key)) {
    return fallback;
  }
  if (!obj.at(key).is_string()) {
    throw ValidationError(joined(path, key), "must be a string");
  }
  return obj.at(key).get<std::string>();
}

inline std::vector<double> get_number_array(const json& obj,
                                            const std::string& path,
                                            const char* key) {
  if (!obj.contains(key)) {
    throw ValidationError(joined(path, key), "missing required key");
  }
  if (!obj.at(key).is_array()) {
    throw ValidationError(joined(path, key), "must be an array of numbers");
  }
  std::vector<double> out;
  for (const auto& v : obj.at(key)) {
    if (!v.is_number()) {
      throw ValidationError(joined(path, key), "must be an array of numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

inline std::vector<int> get_int_array(const json& obj, const std::string& path,
                                      const char* key) {
  if (!obj.contains(key)) {
    throw ValidationError(joined(path, key), "missing required key");
  }
  if (!obj.at(key).is_array()) {
    throw ValidationError(joined(path, key), "must be an array of integers");
  }
  std::vector<int> out;
  for (const auto& v : obj.at(key)) {
    if (!v.is_number_integer()) {
      throw ValidationError(joined(path, key), "must be an array of integers");
    }
    out.push_back(v.get<int>());
  }
  return out;
}

inline RampShape parse_ramp(const std::string& s, const std::string& path) {
  if (s == "linear") return RampShape::linear;
  if (s == "quadratic") return RampShape::quadratic;
  if (s == "sqrt") return RampShape::sqrt;
  throw ValidationError(path, "must be one of linear|quadratic|sqrt");
}

inline PainMode parse_pain_mode(const std::string& s, const std::string& path) {
  if (s == "linear_decreasing") return PainMode::linear_decreasing;
  if (s == "custom") return PainMode::custom;
  if (s == "neutral") return PainMode::neutral;
  throw ValidationError(path, "must be one of linear_decreasing|custom|neutral");
}

inline Path parse_path(const std::string& s, const std::string& path) {
  if (s == "unconscious") return Path::unconscious;
  if (s == "conscious_prior") return Path::conscious_prior;
  throw ValidationError(path, "must be one of unconscious|conscious_prior");
}

inline ReceptorDistribution parse_distribution(const json& sec,
                                               const std::string& path) {
  reject_unknown_keys(sec, path, {"u_values", "weights", "u0"});
  ReceptorDistribution dist;
  dist.u_values = get_int_array(sec, path, "u_values");
  if (dist.u_values.empty()) {
    throw ValidationError(joined(path, "u_values"), "empty distribution");
  }
  for (std::size_t i = 1; i < dist.u_values.size(); ++i) {
    if (dist.u_values[i] <= dist.u_values[i - 1]) {
      throw ValidationError(joined(path, "u_values"), "u grid not increasing");
    }
  }
  std::vector<double> weights = get_number_array(sec, path, "weights");
  if (weights.size() != dist.u_values.size()) {
    throw ValidationError(joined(path, "weights"),
                          "length must match u_values");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) {
      throw ValidationError(joined(path, "weights"), "non-finite weight");
    }
    if (w < 0.0) {
      throw ValidationError(joined(path, "weights"),
                            "weights must be non-negative");
    }
  }
  try {
    dist.weights = normalize_distribution(std::move(weights));
  } catch (const ValidationError&) {
    throw ValidationError(joined(path, "weights"),
                          "degenerate distribution: all weights zero");
  }
  dist.u0 = get_int(sec, path, "u0");
  if (std::find(dist.u_values.begin(), dist.u_values.end(), dist.u0) ==
      dist.u_values.end()) {
    throw ValidationError(joined(path, "u0"), "must be a member of u_values");
  }
  return dist;
}

} // namespace detail

/// Parses and validates a scenario document. Every reported error carries
/// the dotted field path of the offending key. `prefix` is prepended to
/// the paths (used for the branches of a two-branch experiment document).
inline ValidatedScenario validate_scenario(const nlohmann::json& root,
                                           const std::string& prefix = "") {
  using detail::joined;
  if (!root.is_object()) {
    throw ValidationError(prefix.empty() ? "scenario" : prefix,
                          "scenario document must be a JSON object");
  }
  detail::reject_unknown_keys(root, prefix,
                              {"stimulus", "distribution",
                               "conscious_distribution", "kernel", "drift",
                               "experiment"});
  ValidatedScenario s;

  // [stimulus]
  {
    const auto& sec = detail::require_section(root, prefix, "stimulus");
    const std::string path = joined(prefix, "stimulus");
    detail::reject_unknown_keys(sec, path, {"amplitude_sq", "rise_time", "ramp"});
    s.stimulus.amplitude_sq = detail::get_number_or(sec, path, "amplitude_sq", 1.0);
    if (s.stimulus.amplitude_sq < 0.0) {
      throw ValidationError(joined(path, "amplitude_sq"), "must be >= 0");
    }
    s.stimulus.rise_time = detail::get_number(sec, path, "rise_time");
    if (s.stimulus.rise_time <= 0.0) {
      throw ValidationError(joined(path, "rise_time"), "must be > 0");
    }
    s.stimulus.ramp = detail::parse_ramp(
        detail::get_string_or(sec, path, "ramp", "linear"),
        joined(path, "ramp"));
  }

  // [distribution]
  s.distribution = detail::parse_distribution(
      detail::require_section(root, prefix, "distribution"),
      joined(prefix, "distribution"));
  if (root.contains("conscious_distribution")) {
    s.conscious_distribution = detail::parse_distribution(
        root.at("conscious_distribution"),
        joined(prefix, "conscious_distribution"));
  }

  // [kernel]
  {
    const auto& sec = detail::require_section(root, prefix, "kernel");
    const std::string path = joined(prefix, "kernel");
    detail::reject_unknown_keys(sec, path, {"sigma", "support_radius", "grid_step"});
    s.kernel.sigma = detail::get_number(sec, path, "sigma");
    if (s.kernel.sigma <= 0.0) {
      throw ValidationError(joined(path, "sigma"), "must be > 0");
    }
    s.kernel.support_radius = detail::get_int(sec, path, "support_radius");
    if (s.kernel.support_radius < 1) {
      throw ValidationError(joined(path, "support_radius"), "must be >= 1");
    }
    s.grid_step = detail::get_number(sec, path, "grid_step");
    if (s.grid_step <= 0.0) {
      throw ValidationError(joined(path, "grid_step"), "must be > 0");
    }
  }

  // [drift] including the pain profile and restoring potential specs
  {
    const auto& sec = detail::require_section(root, prefix, "drift");
    const std::string path = joined(prefix, "drift");
    detail::reject_unknown_keys(sec, path,
                                {"kappa", "lambda", "dt", "max_steps",
                                 "capacity_u", "convergence_eps", "pain",
                                 "potential"});
    s.drift.kappa = detail::get_number(sec, path, "kappa");
    if (s.drift.kappa < 0.0) {
      throw ValidationError(joined(path, "kappa"), "must be >= 0");
    }
    s.drift.lambda = detail::get_number(sec, path, "lambda");
    if (s.drift.lambda < 0.0) {
      throw ValidationError(joined(path, "lambda"), "must be >= 0");
    }
    s.drift.dt = detail::get_number(sec, path, "dt");
    if (s.drift.dt <= 0.0) {
      throw ValidationError(joined(path, "dt"), "must be > 0");
    }
    s.drift.max_steps = detail::get_int(sec, path, "max_steps");
    if (s.drift.max_steps < 1) {
      throw ValidationError(joined(path, "max_steps"), "must be >= 1");
    }
    s.drift.capacity_u = detail::get_number_or(sec, path, "capacity_u", 0.0);
    s.drift.convergence_eps =
        detail::get_number_or(sec, path, "convergence_eps", 1e-12);
    if (s.drift.convergence_eps <= 0.0) {
      throw ValidationError(joined(path, "convergence_eps"), "must be > 0");
    }

    const auto& pain = detail::require_section(sec, path, "pain");
    const std::string pain_path = joined(path, "pain");
    detail::reject_unknown_keys(pain, pain_path, {"mode", "slope", "values"});
    if (!pain.contains("mode")) {
      throw ValidationError(joined(pain_path, "mode"), "missing required key");
    }
    s.pain.mode = detail::parse_pain_mode(
        pain.at("mode").is_string() ? pain.at("mode").get<std::string>() : "",
        joined(pain_path, "mode"));
    if (s.pain.mode == PainMode::linear_decreasing) {
      s.pain.slope = detail::get_number(pain, pain_path, "slope");
      if (s.pain.slope <= 0.0) {
        throw ValidationError(joined(pain_path, "slope"),
                              "must be > 0 for linear_decreasing");
      }
    } else if (s.pain.mode == PainMode::custom) {
      s.pain.values = detail::get_number_array(pain, pain_path, "values");
      const std::size_t expected =
          static_cast<std::size_t>(2 * s.kernel.support_radius + 1);
      if (s.pain.values.size() != expected) {
        throw ValidationError(joined(pain_path, "values"),
                              "length must equal 2*support_radius+1 (" +
                                  std::to_string(expected) + ")");
      }
      for (double v : s.pain.values) {
        if (!std::isfinite(v)) {
          throw ValidationError(joined(pain_path, "values"),
                                "non-finite pain value");
        }
      }
    }

    if (sec.contains("potential")) {
      const auto& pot = sec.at("potential");
      const std::string pot_path = joined(path, "potential");
      if (!pot.is_object()) {
        throw ValidationError(pot_path, "must be an object");
      }
      detail::reject_unknown_keys(pot, pot_path, {"stiffness"});
      s.potential.stiffness =
          detail::get_number_or(pot, pot_path, "stiffness", 0.0);
      if (s.potential.stiffness < 0.0) {
        throw ValidationError(joined(pot_path, "stiffness"), "must be >= 0");
      }
    }

    // CFL bounds on the largest adjacent gaps the pulse grid can see.
    double max_pain_gap = 0.0;
    if (s.pain.mode == PainMode::linear_decreasing) {
      max_pain_gap = s.pain.slope * s.grid_step;
    } else if (s.pain.mode == PainMode::custom) {
      for (std::size_t j = 0; j + 1 < s.pain.values.size(); ++j) {
        max_pain_gap = std::max(max_pain_gap,
                                s.pain.values[j] - s.pain.values[j + 1]);
      }
    }
    const double max_pot_gap = s.potential.stiffness * s.grid_step;
    if (s.drift.dt * s.drift.kappa * max_pain_gap >= 1.0) {
      throw ValidationError(
          joined(path, "dt"),
          "CFL violation: dt*kappa*max_pain_gap = " +
              std::to_string(s.drift.dt * s.drift.kappa * max_pain_gap) +
              " >= 1");
    }
    if (s.drift.dt * s.drift.lambda * max_pot_gap >= 1.0) {
      throw ValidationError(
          joined(path, "dt"),
          "CFL violation: dt*lambda*max_potential_gap = " +
              std::to_string(s.drift.dt * s.drift.lambda * max_pot_gap) +
              " >= 1");
    }
  }

  // [experiment]
  {
    const auto& sec = detail::require_section(root, prefix, "experiment");
    const std::string path = joined(prefix, "experiment");
    detail::reject_unknown_keys(sec, path, {"path"});
    s.path = detail::parse_path(
        detail::get_string_or(sec, path, "path", "unconscious"),
        joined(path, "path"));
  }

  // Ready-to-run state at phase pre_hit, t = t0 = 0.
  s.initial_state.phase = Phase::pre_hit;
  s.initial_state.path = s.path;
  s.initial_state.stimulus = s.stimulus;
  s.initial_state.pre_branch_weight_sq = 1.0;
  s.initial_state.t = 0.0;
  if (s.path == Path::unconscious) {
    s.initial_state.interaction = s.distribution;
  } else {
    s.initial_state.interaction = compose_conscious_prior(
        s.conscious_distribution ? *s.conscious_distribution : s.distribution,
        s.kernel);
  }
  return s;
}

inline nlohmann::json distribution_to_json(const ReceptorDistribution& dist) {
  return nlohmann::json{{"u_values", dist.u_values},
                        {"weights", dist.weights},
                        {"u0", dist.u0}};
}

inline nlohmann::json scenario_to_json(const ValidatedScenario& s) {
  nlohmann::json j;
  const char* ramp = s.stimulus.ramp == RampShape::linear      ? "linear"
                     : s.stimulus.ramp == RampShape::quadratic ? "quadratic"
                                                               : "sqrt";
  j["stimulus"] = {{"amplitude_sq", s.stimulus.amplitude_sq},
                   {"rise_time", s.stimulus.rise_time},
                   {"ramp", ramp}};
  j["distribution"] = distribution_to_json(s.distribution);
  if (s.conscious_distribution) {
    j["conscious_distribution"] = distribution_to_json(*s.conscious_distribution);
  }
  j["kernel"] = {{"sigma", s.kernel.sigma},
                 {"support_radius", s.kernel.support_radius},
                 {"grid_step", s.grid_step}};
  nlohmann::json pain;
  switch (s.pain.mode) {
  case PainMode::neutral:
    pain = {{"mode", "neutral"}};
    break;
  case PainMode::linear_decreasing:
    pain = {{"mode", "linear_decreasing"}, {"slope", s.pain.slope}};
    break;
  case PainMode::custom:
    pain = {{"mode", "custom"}, {"values", s.pain.values}};
    break;
  }
  j["drift"] = {{"kappa", s.drift.kappa},
                {"lambda", s.drift.lambda},
                {"dt", s.drift.dt},
                {"max_steps", s.drift.max_steps},
                {"capacity_u", s.drift.capacity_u},
                {"convergence_eps", s.drift.convergence_eps},
                {"pain", pain},
                {"potential", {{"stiffness", s.potential.stiffness}}}};
  j["experiment"] = {
      {"path", s.path == Path::unconscious ? "unconscious" : "conscious_prior"}};
  return j;
}

/// Two-branch experiment document: {branch_prob, painful: {...}, neutral:
/// {...}}. The neutral branch must carry a constant pain profile.
inline BetaScenario validate_beta_scenario(const nlohmann::json& root) {
  if (!root.is_object()) {
    throw ValidationError("scenario", "beta scenario must be a JSON object");
  }
  detail::reject_unknown_keys(root, "", {"branch_prob", "painful", "neutral"});
  BetaScenario beta;
  beta.branch_prob = detail::get_number(root, "", "branch_prob");
  if (beta.branch_prob < 0.0 || beta.branch_prob > 1.0) {
    throw ValidationError("branch_prob", "must be in [0, 1]");
  }
  if (!root.contains("painful")) {
    throw ValidationError("painful", "missing required section");
  }
  if (!root.contains("neutral")) {
    throw ValidationError("neutral", "missing required section");
  }
  beta.painful = validate_scenario(root.at("painful"), "painful");
  beta.neutral = validate_scenario(root.at("neutral"), "neutral");
  if (beta.neutral.pain.mode != PainMode::neutral) {
    bool constant = beta.neutral.pain.mode == PainMode::custom &&
                    std::adjacent_find(beta.neutral.pain.values.begin(),
                                       beta.neutral.pain.values.end(),
                                       [](double a, double b) { return a != b; }) ==
                        beta.neutral.pain.values.end();
    if (!constant) {
      throw ValidationError("neutral.drift.pain.mode",
                            "neutral branch pain profile must be constant");
    }
  }
  return beta;
}

/// Pain profile for this scenario evaluated on a pulse grid.
inline PainProfile make_pain_profile(const ValidatedScenario& s,
                                     const std::vector<double>& grid) {
  if (s.pain.mode == PainMode::custom) {
    return custom_pain_profile(grid, s.pain.values);
  }
  return pain_profile(grid, s.pain.mode, s.pain.slope);
}

inline RestoringPotential
make_restoring_potential(const ValidatedScenario& s,
                         const std::vector<double>& grid) {
  return restoring_potential(grid, s.drift.capacity_u, s.potential.stiffness);
}

} // namespace pulsesim
