// Release gate: each criterion below runs the library (or the installed
// CLI) end to end and prints exactly one PASS/FAIL line. The process
// exits nonzero if any criterion fails.
//
//   acceptance --cli <path-to-pulsesim> --scenarios <dir> --work <dir>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulsesim/pulsesim.hpp"

namespace {

using namespace pulsesim;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Args {
  std::string cli;
  std::string scenarios;
  std::string work;
};

int g_failures = 0;

void report(int criterion, bool ok, const std::string& line) {
  std::cout << (ok ? "PASS" : "FAIL") << " criterion " << criterion << ": "
            << line << std::endl;
  if (!ok) {
    ++g_failures;
  }
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_command(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  if (rc == -1) {
    return -1;
  }
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

/// Extracts the value of a "key=value" line from a program's output.
double parse_kv(const std::string& text, const std::string& key) {
  const std::string needle = key + "=";
  const std::size_t pos = text.find(needle);
  if (pos == std::string::npos) {
    throw std::runtime_error("missing output line: " + key);
  }
  return std::strtod(text.c_str() + pos + needle.size(), nullptr);
}

bool within_three_sigma(std::size_t count, std::size_t n, double p) {
  const double freq = static_cast<double>(count) / static_cast<double>(n);
  const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return std::abs(freq - p) <= 3.0 * sigma;
}

SystemState make_pre_hit(ReceptorDistribution dist) {
  SystemState s;
  s.phase = Phase::pre_hit;
  s.path = Path::unconscious;
  s.stimulus.rise_time = 1.0;
  s.interaction = std::move(dist);
  return s;
}

// --- criterion 1: closed-form spread numbers -------------------------------

void criterion_1(const Args& args) {
  const SeedMolecule mol{10000.0, 10e-9};

  // In-process runtime: the whole report must be far under a millisecond.
  const auto start = Clock::now();
  SpreadResult r{};
  for (int i = 0; i < 1000; ++i) {
    r = seed_spread_report(mol, 0.1, 1e-6);
  }
  const double per_call = seconds_since(start) / 1000.0;

  // The same numbers through the CLI subcommand.
  const fs::path out = fs::path(args.work) / "seed_spread.txt";
  const int rc = run_command("\"" + args.cli + "\" seed-spread > " +
                             out.string() + " 2>&1");
  const std::string text = read_file(out);
  const double cli_dv = parse_kv(text, "delta_v_m_per_s");
  const double cli_len = parse_kv(text, "spread_length_m");

  const bool dv_ok = r.delta_v >= 0.54e-3 && r.delta_v <= 0.70e-3 &&
                     cli_dv >= 0.54e-3 && cli_dv <= 0.70e-3;
  const bool len_ok = r.spread_length >= 54e-6 && r.spread_length <= 70e-6 &&
                      cli_len >= 54e-6 && cli_len <= 70e-6;
  const bool ok = rc == 0 && dv_ok && len_ok && per_call < 1e-3;

  std::ostringstream line;
  line << "seed-spread reports delta_v = " << r.delta_v * 1e3
       << " mm/s, L = " << r.spread_length * 1e6 << " um in " << per_call * 1e6
       << " us/call";
  if (rc != 0) {
    line << "; CLI exit " << rc;
  }
  report(1, ok, line.str());
}

// --- criterion 2: Born-rule selection ---------------------------------------

bool born_check(const std::vector<int>& u_values,
                const std::vector<double>& raw_weights, std::uint64_t seed,
                std::size_t n_trials, std::string& detail) {
  ReceptorDistribution dist;
  dist.u_values = u_values;
  dist.weights = normalize_distribution(raw_weights);
  dist.u0 = u_values.front();
  const SystemState state = make_pre_hit(dist);

  double raw_sq = 0.0;
  for (double w : raw_weights) {
    raw_sq += w * w;
  }
  std::map<int, std::size_t> counts;
  for (std::size_t i = 0; i < n_trials; ++i) {
    PhiloxStream stream(seed, i);
    const CollapseOutcome outcome = sample_collapse(state, stream);
    ++counts[static_cast<int>(outcome.u_sc)];
  }
  for (std::size_t i = 0; i < u_values.size(); ++i) {
    const double p = raw_weights[i] * raw_weights[i] / raw_sq;
    const std::size_t c = counts[u_values[i]];
    if (!within_three_sigma(c, n_trials, p)) {
      std::ostringstream ss;
      ss << "u = " << u_values[i] << " hit "
         << static_cast<double>(c) / static_cast<double>(n_trials)
         << " vs p = " << p;
      detail = ss.str();
      return false;
    }
  }
  return true;
}

void criterion_2() {
  const auto start = Clock::now();
  const std::size_t n = 100000;

  std::vector<int> u21(21);
  std::vector<double> w21(21);
  for (int i = 0; i < 21; ++i) {
    u21[i] = i;
    w21[i] = static_cast<double>(i + 1); // p_i = (i+1)^2 / 3311
  }
  std::string detail;
  const bool wide_ok = born_check(u21, w21, 20250814, n, detail);
  const bool skew_ok =
      detail.empty() ? born_check({0, 1}, {3.0, 4.0}, 814, n, detail) : false;

  const double elapsed = seconds_since(start);
  const bool ok = wide_ok && skew_ok && elapsed < 10.0;
  std::ostringstream line;
  line << "Born-rule frequencies within 3-sigma on all 21 + 2 bins ("
       << 2 * n << " collapses in " << elapsed << " s)";
  if (!detail.empty()) {
    line << "; first violation: " << detail;
  }
  report(2, ok, line.str());
}

// --- criterion 3: conservation over 1e5 drift steps -------------------------

void criterion_3() {
  const int radius = 50;
  auto [brain, phys] = make_pulse_pair(0.0, PulseKernel{10.0, radius}, 1.0);
  const PainProfile pain =
      pain_profile(brain.u_grid, PainMode::linear_decreasing, 0.02);
  const RestoringPotential pot = restoring_potential(brain.u_grid, 20.0, 0.01);
  DriftParams params;
  params.kappa = 0.5;
  params.lambda = 0.5;
  params.dt = 0.5;

  double worst = 0.0;
  bool paired = true;
  for (int step = 0; step < 100000; ++step) {
    auto [b, p] = drift_step(brain, phys, pain, pot, params);
    paired = paired && b.weights == p.weights;
    brain = std::move(b);
    phys = std::move(p);
    worst = std::max(worst, std::abs(sum_of_squares(brain.weights) - 1.0));
  }
  const bool ok = worst < 1e-9 && paired;
  std::ostringstream line;
  line << "100000 drift steps on 101 points: max |sum w^2 - 1| = " << worst
       << ", brain/physiological weights "
       << (paired ? "identical" : "DIVERGED");
  report(3, ok, line.str());
}

// --- criterion 4: Rule-5 directionality --------------------------------------

void criterion_4() {
  bool monotone_ok = true;
  bool reached_edge = false;
  std::string detail;
  {
    auto [brain, phys] = make_pulse_pair(0.0, PulseKernel{1.0, 3}, 1.0);
    const PainProfile pain =
        pain_profile(brain.u_grid, PainMode::linear_decreasing, 1.0);
    const RestoringPotential pot = restoring_potential(brain.u_grid, 0.0, 0.0);
    DriftParams params;
    params.kappa = 0.2;
    params.lambda = 0.0;
    params.dt = 0.5;
    double center = pulse_center(brain);
    for (int step = 0; step < 1000 && monotone_ok; ++step) {
      const double edge_sq = brain.weights.back() * brain.weights.back();
      if (1.0 - edge_sq <= 1e-9) {
        // Effectively all amplitude sits on the last grid point; strict
        // growth is only promised up to this edge regime.
        reached_edge = true;
        break;
      }
      auto [b, p] = drift_step(brain, phys, pain, pot, params);
      const double next = pulse_center(b);
      if (!(next > center)) {
        monotone_ok = false;
        detail = "center failed to grow at step " + std::to_string(step);
      }
      center = next;
      brain = std::move(b);
      phys = std::move(p);
    }
    monotone_ok = monotone_ok && reached_edge;
    if (monotone_ok == false && detail.empty()) {
      detail = "pulse never reached the grid edge";
    }
  }

  bool neutral_ok = true;
  {
    auto [brain, phys] = make_pulse_pair(0.0, PulseKernel{1.0, 3}, 1.0);
    const std::vector<double> initial = brain.weights;
    const PainProfile pain = pain_profile(brain.u_grid, PainMode::neutral, 0.0);
    const RestoringPotential pot = restoring_potential(brain.u_grid, 0.0, 0.0);
    DriftParams params;
    params.kappa = 1.0;
    params.lambda = 1.0;
    params.dt = 0.5;
    for (int step = 0; step < 10000 && neutral_ok; ++step) {
      auto [b, p] = drift_step(brain, phys, pain, pot, params);
      neutral_ok = b.weights == initial && p.weights == initial;
      brain = std::move(b);
      phys = std::move(p);
    }
  }

  const bool ok = monotone_ok && neutral_ok;
  std::ostringstream line;
  line << "monotone pain drives the center strictly right"
       << (monotone_ok ? "" : " [VIOLATED: " + detail + "]")
       << "; neutral pain leaves weights bitwise unchanged over 10000 steps"
       << (neutral_ok ? "" : " [VIOLATED]");
  report(4, ok, line.str());
}

// --- criterion 5: equilibrium against a ramp potential ----------------------

EvolveResult evolve_case(double lambda, double dt, int max_steps) {
  auto [brain, phys] = make_pulse_pair(0.0, PulseKernel{1.0, 3}, 1.0);
  SystemState s;
  s.phase = Phase::pulsed;
  s.pre_branch_weight_sq = 0.0;
  s.brain_pulse = brain;
  s.phys_pulse = phys;
  const PainProfile pain =
      pain_profile(brain.u_grid, PainMode::linear_decreasing, 1.0);
  const RestoringPotential pot = restoring_potential(brain.u_grid, 0.5, 1.0);
  DriftParams params;
  params.kappa = 0.3;
  params.lambda = lambda;
  params.dt = dt;
  params.max_steps = max_steps;
  params.convergence_eps = 1e-15;
  return evolve_to_equilibrium(s, pain, pot, params);
}

void criterion_5() {
  const EvolveResult base = evolve_case(0.6, 0.5, 100000);
  const bool converged = base.trajectory.equilibrium_center.has_value();
  double residual = 1e300;
  if (converged) {
    const PainProfile pain = pain_profile(base.state.brain_pulse->u_grid,
                                          PainMode::linear_decreasing, 1.0);
    const RestoringPotential pot =
        restoring_potential(base.state.brain_pulse->u_grid, 0.5, 1.0);
    DriftParams params;
    params.kappa = 0.3;
    params.lambda = 0.6;
    params.dt = 0.5;
    residual = max_flux_imbalance(*base.state.brain_pulse, pain, pot, params);
  }
  const bool residual_ok = converged && residual < 1e-9 * 0.5;

  bool sweep_ok = true;
  double previous = 1e300;
  for (double lambda : {0.3, 0.6, 1.2, 2.4}) {
    const EvolveResult r = evolve_case(lambda, 0.25, 200000);
    if (!r.trajectory.equilibrium_center) {
      sweep_ok = false;
      break;
    }
    sweep_ok = sweep_ok && *r.trajectory.equilibrium_center <= previous + 1e-12;
    previous = *r.trajectory.equilibrium_center;
  }

  const bool ok = residual_ok && sweep_ok;
  std::ostringstream line;
  line << "ramp-potential equilibrium "
       << (converged ? "converged" : "DID NOT CONVERGE")
       << " with flux residual " << residual << " (< " << 1e-9 * 0.5
       << "); lambda sweep centers "
       << (sweep_ok ? "monotone non-increasing" : "NOT monotone");
  report(5, ok, line.str());
}

// --- criterion 6: two-branch source experiment ------------------------------

void criterion_6(const Args& args) {
  const auto start = Clock::now();
  const std::size_t n = 100000;
  const std::uint64_t seed0 = 20250814;

  std::ifstream in(fs::path(args.scenarios) / "beta.json");
  const BetaScenario beta = validate_beta_scenario(nlohmann::json::parse(in));

  bool freq_ok = true;
  bool displacement_ok = true;
  std::string detail;
  std::vector<std::pair<double, double>> table; // (painful, neutral) counts
  const std::vector<double> kappas{0.0, 0.1, 1.0};
  for (std::size_t k = 0; k < kappas.size(); ++k) {
    BetaScenario variant = beta;
    variant.painful.drift.kappa = kappas[k];
    const std::vector<TrialRecord> records =
        run_beta_ensemble(variant, seed0 + k, n);

    std::size_t painful = 0;
    double painful_sum = 0.0;
    double neutral_abs_max = 0.0;
    for (const TrialRecord& r : records) {
      const double d =
          r.trajectory.centers.back() - r.trajectory.centers.front();
      if (r.branch == Branch::painful) {
        ++painful;
        painful_sum += d;
      } else {
        neutral_abs_max = std::max(neutral_abs_max, std::abs(d));
      }
    }
    const double freq = static_cast<double>(painful) / static_cast<double>(n);
    if (std::abs(freq - 0.5) > 0.005) {
      freq_ok = false;
      detail += " freq(kappa=" + std::to_string(kappas[k]) +
                ")=" + std::to_string(freq);
    }
    const double painful_mean = painful_sum / static_cast<double>(painful);
    const bool want_positive = kappas[k] > 0.0;
    if (want_positive != (painful_mean > 0.0) || neutral_abs_max > 1e-12) {
      displacement_ok = false;
      detail += " displacement(kappa=" + std::to_string(kappas[k]) +
                "): painful=" + std::to_string(painful_mean) +
                " neutral_max=" + std::to_string(neutral_abs_max);
    }
    table.emplace_back(static_cast<double>(painful),
                       static_cast<double>(n - painful));
  }

  // Hand-rolled chi-square homogeneity on the 3 x 2 table; for dof = 2 the
  // survival function has the closed form exp(-x/2).
  double total_p = 0.0, total_n = 0.0;
  for (const auto& [p, q] : table) {
    total_p += p;
    total_n += q;
  }
  const double total = total_p + total_n;
  double stat = 0.0;
  for (const auto& [p, q] : table) {
    const double row = p + q;
    const double ep = row * total_p / total;
    const double en = row * total_n / total;
    stat += (p - ep) * (p - ep) / ep + (q - en) * (q - en) / en;
  }
  const double p_value = std::exp(-stat / 2.0);

  const double elapsed = seconds_since(start);
  const bool ok =
      freq_ok && displacement_ok && p_value > 0.01 && elapsed < 60.0;
  std::ostringstream line;
  line << "branch frequencies within 0.5 +/- 0.005 across kappa {0, 0.1, 1}"
       << ", chi-square p = " << p_value
       << ", displacement > 0 only on the painful branch (" << 3 * n
       << " trials in " << elapsed << " s)";
  if (!detail.empty()) {
    line << "; violations:" << detail;
  }
  report(6, ok, line.str());
}

// --- criterion 7: conscious prior vs delta kernel ----------------------------

// Independent double-loop oracle for the composed prior: g(u') =
// sum_u R_u f(u' - u) with f the square-normalized Gaussian kernel, then
// squared and normalized into selection probabilities keyed by u'.
std::map<long long, double> oracle_probs(const std::vector<int>& u_values,
                                         const std::vector<double>& weights,
                                         double sigma, int radius) {
  std::vector<double> f(2 * radius + 1);
  double f_sq = 0.0;
  for (int j = -radius; j <= radius; ++j) {
    f[j + radius] = std::exp(-(j * j) / (4.0 * sigma * sigma));
    f_sq += f[j + radius] * f[j + radius];
  }
  for (double& v : f) {
    v /= std::sqrt(f_sq);
  }
  std::map<long long, double> g;
  for (std::size_t i = 0; i < u_values.size(); ++i) {
    for (int j = -radius; j <= radius; ++j) {
      g[u_values[i] + j] += weights[i] * f[j + radius];
    }
  }
  double norm = 0.0;
  for (const auto& [u, v] : g) {
    norm += v * v;
  }
  for (auto& [u, v] : g) {
    v = v * v / norm;
  }
  return g;
}

void criterion_7() {
  ReceptorDistribution dist;
  dist.u_values = {0, 3, 6};
  dist.weights = normalize_distribution({3.0, 4.0, 5.0});
  dist.u0 = 3;

  // Delta-kernel (unconscious) reference probabilities.
  std::map<long long, double> delta;
  for (std::size_t i = 0; i < dist.u_values.size(); ++i) {
    delta[dist.u_values[i]] = dist.weights[i] * dist.weights[i];
  }

  // sigma = 1e-3: the composed path must match the delta path.
  const ComposedPrior tight = compose_conscious_prior(dist, {1e-3, 2});
  const std::vector<double> tight_probs = selection_probabilities(tight);
  double tv = 0.0;
  for (std::size_t i = 0; i < tight.u_grid.size(); ++i) {
    const long long u = static_cast<long long>(tight.u_grid[i]);
    const double ref = delta.count(u) ? delta[u] : 0.0;
    tv += std::abs(tight_probs[i] - ref);
  }
  tv *= 0.5;

  // Double-loop oracle agreement, both for the tight and a wide kernel.
  double worst = 0.0;
  for (double sigma : {1e-3, 0.9}) {
    const ComposedPrior prior = compose_conscious_prior(dist, {sigma, 2});
    const std::vector<double> probs = selection_probabilities(prior);
    const std::map<long long, double> ref =
        oracle_probs(dist.u_values, dist.weights, sigma, 2);
    if (ref.size() != prior.u_grid.size()) {
      worst = 1e300;
      break;
    }
    std::size_t i = 0;
    for (const auto& [u, p] : ref) {
      if (static_cast<long long>(prior.u_grid[i]) != u) {
        worst = 1e300;
        break;
      }
      worst = std::max(worst, std::abs(probs[i] - p));
      ++i;
    }
  }

  const bool ok = tv < 1e-6 && worst < 1e-12;
  std::ostringstream line;
  line << "sigma = 1e-3 composed prior within TV " << tv
       << " of the delta path; double-loop oracle max |dp| = " << worst;
  report(7, ok, line.str());
}

// --- criterion 8: byte-identical reruns --------------------------------------

void criterion_8(const Args& args) {
  const fs::path work(args.work);
  const std::string scenario =
      (fs::path(args.scenarios) / "baseline.json").string();
  const fs::path log = work / "c8_cli.log";

  auto run_once = [&](const std::string& out_dir) {
    return run_command("\"" + args.cli + "\" run --scenario \"" + scenario +
                       "\" --seed 4242 --trials 200 --out \"" + out_dir +
                       "\" --format csv >> " + log.string() + " 2>&1");
  };
  const fs::path a = work / "c8_a";
  const fs::path b = work / "c8_b";
  const int rc_a = run_once(a.string());
  const int rc_b = run_once(b.string());

  bool identical = rc_a == 0 && rc_b == 0;
  std::string mismatch;
  for (const char* name : {"trials.csv", "summary.json", "manifest.json"}) {
    const std::string left = read_file(a / name);
    const std::string right = read_file(b / name);
    if (left.empty() || left != right) {
      identical = false;
      mismatch += std::string(" ") + name;
    }
  }

  std::ostringstream line;
  line << "two identical runs (seed 4242, 200 trials) produced byte-identical "
          "trials.csv, summary.json, manifest.json";
  if (rc_a != 0 || rc_b != 0) {
    line << "; CLI exits " << rc_a << "/" << rc_b;
  }
  if (!mismatch.empty()) {
    line << "; mismatched:" << mismatch;
  }
  report(8, identical, line.str());
}

} // namespace

int main(int argc, char** argv) {
  Args args;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--cli") {
      args.cli = argv[i + 1];
    } else if (flag == "--scenarios") {
      args.scenarios = argv[i + 1];
    } else if (flag == "--work") {
      args.work = argv[i + 1];
    }
  }
  if (args.cli.empty() || args.scenarios.empty() || args.work.empty()) {
    std::cerr << "usage: acceptance --cli <pulsesim> --scenarios <dir> "
                 "--work <dir>\n";
    return 2;
  }
  std::filesystem::create_directories(args.work);

  struct Entry {
    int n;
    std::function<void()> fn;
  };
  const std::vector<Entry> criteria{
      {1, [&] { criterion_1(args); }}, {2, [] { criterion_2(); }},
      {3, [] { criterion_3(); }},      {4, [] { criterion_4(); }},
      {5, [] { criterion_5(); }},      {6, [&] { criterion_6(args); }},
      {7, [] { criterion_7(); }},      {8, [&] { criterion_8(args); }},
  };
  for (const Entry& entry : criteria) {
    try {
      entry.fn();
    } catch (const std::exception& e) {
      report(entry.n, false, std::string("exception: ") + e.what());
    }
  }

  std::cout << "acceptance: " << (8 - g_failures) << "/8 criteria passed"
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}
