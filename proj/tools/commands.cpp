#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "mjls/analysis.hpp"
#include "mjls/numlin.hpp"
#include "mjls/problem_file.hpp"
#include "mjls/riccati.hpp"
#include "mjls/simulate.hpp"

namespace mjls::cli {

namespace {

/// 12 significant digits for human-readable output.
std::string num(double v) { return fmt::format("{:.12g}", v); }

std::string mat(const Matrix& m) {
  if (m.size() == 1) return num(m(0, 0));
  std::string out = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (r > 0) out += "; ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ", ";
      out += num(m(r, c));
    }
  }
  return out + "]";
}

nlohmann::ordered_json to_json(const Matrix& m) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  }
  return arr;
}

nlohmann::ordered_json to_json(const ModeMatrices& family) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& m : family) arr.push_back(to_json(m));
  return arr;
}

/// Thrown for bad flags or unreadable inputs; maps to exit code 1.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string file;
  bool symmetrize = false;
};

io::ProblemFile load(const CommonOptions& common) {
  io::ParseOptions options;
  options.symmetrize = common.symmetrize;
  return io::load_problem(common.file, options);
}

/// --ptilde accepts inline numbers ("-10,19") or "@path" to a problem-style
/// JSON document holding a "ptilde" array. Falls back to the problem file.
ModeMatrices resolve_ptilde(const io::ProblemFile& problem, const std::string& flag) {
  const MjlsModel& model = problem.model;
  if (flag.empty()) {
    if (!problem.ptilde) throw InputError("no ptilde: pass --ptilde or add \"ptilde\" to the problem file");
    return *problem.ptilde;
  }
  if (flag.front() == '@') {
    std::ifstream in(flag.substr(1));
    if (!in) throw InputError(fmt::format("cannot open '{}'", flag.substr(1)));
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(fmt::format("cannot parse '{}': {}", flag.substr(1), e.what()));
    }
    const nlohmann::json& arr = doc.is_object() && doc.contains("ptilde") ? doc["ptilde"] : doc;
    std::vector<double> values;
    for (const auto& entry : arr) {
      if (entry.is_array()) {
        for (const auto& v : entry) values.push_back(v.get<double>());
      } else {
        values.push_back(entry.get<double>());
      }
    }
    return io::split_modes(values, model.modes, model.state_dim, model.state_dim);
  }
  return io::split_modes(io::parse_number_list(flag), model.modes, model.state_dim,
                         model.state_dim);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path));
  return out;
}

// ---------------------------------------------------------------------------
// solve-finite

struct FiniteOptions {
  CommonOptions common;
  int horizon = 0;
  std::string out;
};

int cmd_solve_finite(const FiniteOptions& opts, std::ostream& out) {
  const auto problem = load(opts.common);
  const auto sol = riccati::solve_finite(problem.model, problem.weights, opts.horizon);
  if (!sol.solvable) {
    const auto& f = *sol.failure;
    out << "unsolvable\n";
    out << fmt::format("mode {}: {} at k={}\n", f.mode.value(), riccati::to_string(f.reason), f.k);
    return kFiniteUnsolvable;
  }

  out << fmt::format("solvable (horizon N={})\n", sol.horizon);
  std::optional<double> cost;
  if (problem.x0) {
    cost = riccati::optimal_cost_finite(sol, *problem.x0, problem.model.pi0);
    out << "optimal cost: " << num(*cost) << "\n";
  } else {
    out << "optimal cost: n/a (no x0 in problem file)\n";
  }
  for (std::size_t i = 0; i < sol.steps.front().P.size(); ++i) {
    out << fmt::format("mode {}: P(0) = {}, F(0) = {}\n", i + 1, mat(sol.steps.front().P[i]),
                       mat(sol.steps.front().F[i]));
  }

  if (!opts.out.empty()) {
    nlohmann::ordered_json report;
    report["solvable"] = true;
    report["horizon"] = sol.horizon;
    if (cost) report["optimal_cost"] = *cost;
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (int k = 0; k <= sol.horizon; ++k) {
      const auto& step = sol.steps[static_cast<std::size_t>(k)];
      nlohmann::ordered_json entry;
      entry["k"] = k;
      entry["P"] = to_json(step.P);
      entry["F"] = to_json(step.F);
      entry["Upsilon"] = to_json(step.Upsilon);
      entry["M"] = to_json(step.M);
      steps.push_back(entry);
    }
    report["steps"] = steps;
    auto file = open_output(opts.out);
    file << report.dump(2) << "\n";
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------
// solve-gare pipeline

struct GareOptions {
  CommonOptions common;
  std::string ptilde;
  double tol = 1e-11;
  int max_iterations = 100000;
  std::string out;
  bool force = false;
};

struct GareOutcome {
  int code = kSuccess;
  std::optional<riccati::StationarySolution> solution;
  bool certified = true;
};

std::string describe_membership_failure(const analysis::SetSReport& report) {
  std::string out;
  for (const auto& mode : report.failing) {
    const auto& m = report.modes[mode.position()];
    if (!out.empty()) out += ", ";
    if (!m.block_psd) {
      out += fmt::format("mode {} block indefinite (min eigenvalue {})", mode.value(),
                         num(m.block_min_eigenvalue));
    } else {
      out += fmt::format("mode {} kernel inclusion fails (||C V|| = {}, ||D V|| = {})",
                         mode.value(), num(m.kernel_defect_C), num(m.kernel_defect_D));
    }
  }
  return out;
}

GareOutcome gare_pipeline(const io::ProblemFile& problem, const GareOptions& opts,
                          std::ostream& out) {
  GareOutcome outcome;
  const MjlsModel& model = problem.model;
  const ModeMatrices ptilde = resolve_ptilde(problem, opts.ptilde);

  const auto membership = analysis::check_set_S(model, problem.weights, ptilde);
  if (!membership.member) {
    out << "not in S: " << describe_membership_failure(membership) << "\n";
    if (!opts.force) {
      outcome.code = kNotInSetS;
      return outcome;
    }
    outcome.certified = false;
  }

  bool observable = false;
  int observed_at = 0;
  try {
    ModeMatrices roots;
    for (const auto& q : membership.weights.Qt) roots.push_back(numlin::sqrt_psd(q));
    const auto obs = analysis::exact_observability(model, roots);
    observable = obs.observable;
    observed_at = obs.horizon;
  } catch (const numlin::NotPositiveSemidefinite&) {
    observable = false;
  }
  if (!observable) {
    out << "Assumption failed: (A, B, Qt^(1/2)) is not exactly observable\n";
    if (!opts.force) {
      outcome.code = kNotObservable;
      return outcome;
    }
    outcome.certified = false;
  } else {
    out << fmt::format("observable (T={})\n", observed_at);
  }

  riccati::NgareOptions ng;
  ng.tol = opts.tol;
  ng.max_iterations = opts.max_iterations;
  try {
    outcome.solution = riccati::solve_gare(model, problem.weights, ptilde, ng);
  } catch (const riccati::NgareDiverged& e) {
    out << "not mean-square stabilizable under the tested certificate\n";
    out << "  " << e.what() << "\n";
    outcome.code = kGareDiverged;
    return outcome;
  } catch (const riccati::InconsistentSolution& e) {
    out << "stationary solution failed its certificates\n";
    out << "  " << e.what() << "\n";
    outcome.code = kGareDiverged;
    return outcome;
  }
  return outcome;
}

int cmd_solve_gare(const GareOptions& opts, std::ostream& out) {
  const auto problem = load(opts.common);
  auto outcome = gare_pipeline(problem, opts, out);
  if (outcome.code != kSuccess) return outcome.code;
  const auto& sol = *outcome.solution;
  const MjlsModel& model = problem.model;

  const auto cert = analysis::ms_stability(model, sol.F);
  if (!outcome.certified) out << "UNCERTIFIED: preconditions failed, results forced\n";
  out << fmt::format("converged in {} iterations\n", sol.iterations);
  for (std::size_t i = 0; i < sol.P.size(); ++i) {
    out << fmt::format("mode {}: P = {}, F = {}, X = {}\n", i + 1, mat(sol.P[i]), mat(sol.F[i]),
                       mat(sol.X[i]));
  }
  out << "GARE residual: " << num(sol.residual) << "\n";
  out << "spectral radius: " << num(cert.spectral_radius) << (cert.stable ? " (stable)" : " (not stable)")
      << "\n";
  std::optional<double> cost;
  if (problem.x0) {
    cost = riccati::stationary_cost(sol.P, *problem.x0, model.pi0);
    out << "optimal cost: " << num(*cost) << "\n";
  }

  if (!opts.out.empty()) {
    nlohmann::ordered_json report;
    report["certified"] = outcome.certified;
    report["iterations"] = sol.iterations;
    report["P"] = to_json(sol.P);
    report["X"] = to_json(sol.X);
    report["F"] = to_json(sol.F);
    report["gare_residual"] = sol.residual;
    report["spectral_radius"] = cert.spectral_radius;
    report["stable"] = cert.stable;
    if (cost) report["optimal_cost"] = *cost;
    auto file = open_output(opts.out);
    file << report.dump(2) << "\n";
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------
// check-s, region-scan, observability

struct PtildeOptions {
  CommonOptions common;
  std::string ptilde;
  int horizon = -1;
};

int cmd_check_s(const PtildeOptions& opts, std::ostream& out) {
  const auto problem = load(opts.common);
  const auto ptilde = resolve_ptilde(problem, opts.ptilde);
  const auto report = analysis::check_set_S(problem.model, problem.weights, ptilde);
  out << (report.member ? "member of S\n" : "not in S\n");
  for (std::size_t i = 0; i < report.modes.size(); ++i) {
    const auto& m = report.modes[i];
    out << fmt::format(
        "mode {}: block min eigenvalue {} ({}), kernel dim {}, ||C V|| = {}, ||D V|| = {} ({})\n",
        i + 1, num(m.block_min_eigenvalue), m.block_psd ? "psd" : "indefinite", m.kernel_dim,
        num(m.kernel_defect_C), num(m.kernel_defect_D), m.kernel_ok ? "ok" : "fails");
  }
  return kSuccess;
}

struct RegionOptions {
  CommonOptions common;
  std::vector<double> grid;
  double step = 0.5;
  std::string out;
};

void write_region_csv(std::ostream& os, int modes, const std::vector<analysis::RegionPoint>& points) {
  for (int i = 0; i < modes; ++i) os << "ptilde_" << i + 1 << ",";
  os << "member\n";
  for (const auto& p : points) {
    for (double v : p.ptilde) os << fmt::format("{}", v) << ",";
    os << (p.member ? 1 : 0) << "\n";
  }
}

int cmd_region_scan(const RegionOptions& opts, std::ostream& out) {
  const auto problem = load(opts.common);
  const int L = problem.model.modes;
  if (static_cast<int>(opts.grid.size()) != 2 * L) {
    throw InputError(fmt::format("--grid needs {} numbers (lo hi per mode), got {}", 2 * L,
                                 opts.grid.size()));
  }
  if (!(opts.step > 0.0)) throw InputError("--step must be positive");
  std::vector<analysis::GridAxis> axes;
  for (int i = 0; i < L; ++i) {
    axes.push_back({opts.grid[static_cast<std::size_t>(2 * i)],
                    opts.grid[static_cast<std::size_t>(2 * i + 1)], opts.step});
  }
  std::vector<analysis::RegionPoint> points;
  try {
    points = analysis::region_scan(problem.model, problem.weights, axes);
  } catch (const analysis::UnsupportedOperation& e) {
    throw InputError(e.what());
  }
  if (opts.out.empty()) {
    write_region_csv(out, L, points);
  } else {
    auto file = open_output(opts.out);
    write_region_csv(file, L, points);
    const auto members = std::count_if(points.begin(), points.end(),
                                       [](const auto& p) { return p.member; });
    out << fmt::format("{} grid points, {} members\n", points.size(), members);
  }
  return kSuccess;
}

int cmd_observability(const PtildeOptions& opts, std::ostream& out) {
  const auto problem = load(opts.common);
  const auto ptilde = resolve_ptilde(problem, opts.ptilde);
  const auto sw = riccati::shifted_weights(problem.model, problem.weights, ptilde);
  ModeMatrices roots;
  for (std::size_t i = 0; i < sw.Qt.size(); ++i) {
    try {
      roots.push_back(numlin::sqrt_psd(sw.Qt[i]));
    } catch (const numlin::NotPositiveSemidefinite& e) {
      out << fmt::format("not observable: Qt_{} is indefinite (min eigenvalue {})\n", i + 1,
                         num(e.min_eigenvalue()));
      return kSuccess;
    }
  }
  std::optional<int> horizon;
  if (opts.horizon >= 0) horizon = opts.horizon;
  const auto report = analysis::exact_observability(problem.model, roots, horizon);
  out << (report.observable ? "observable" : "not observable") << fmt::format(" (T={})\n", report.horizon);
  for (std::size_t i = 0; i < report.min_eigenvalues.size(); ++i) {
    out << fmt::format("mode {}: min eigenvalue of G(T) = {}\n", i + 1, num(report.min_eigenvalues[i]));
  }
  return kSuccess;
}

// ---------------------------------------------------------------------------
// stability, simulate

/// "auto" runs the stationary pipeline; anything else is a flat row-major list.
std::optional<ModeMatrices> resolve_gains(const io::ProblemFile& problem, const std::string& flag,
                                          const std::string& ptilde, std::ostream& out, int& code) {
  const MjlsModel& model = problem.model;
  if (flag == "auto") {
    GareOptions gare;
    gare.ptilde = ptilde;
    auto outcome = gare_pipeline(problem, gare, out);
    if (outcome.code != kSuccess) {
      code = outcome.code;
      return std::nullopt;
    }
    return outcome.solution->F;
  }
  return io::split_modes(io::parse_number_list(flag), model.modes, model.input_dim, model.state_dim);
}

struct StabilityOptions {
  CommonOptions common;
  std::string gains;
  std::string ptilde;
};

int cmd_stability(const StabilityOptions& opts, std::ostream& out) {
  const auto problem = load(opts.common);
  int code = kSuccess;
  const auto gains = resolve_gains(problem, opts.gains, opts.ptilde, out, code);
  if (!gains) return code;
  const auto cert = analysis::ms_stability(problem.model, *gains);
  out << "spectral radius: " << num(cert.spectral_radius) << "\n";
  out << (cert.stable ? "mean-square stable\n" : "not mean-square stable\n");
  return kSuccess;
}

struct SimulateOptions {
  CommonOptions common;
  std::string gains = "auto";
  std::string ptilde;
  int paths = 10000;
  int horizon = 20;
  std::uint64_t seed = 0;
  int theta0 = 0;
  int threads = 0;
  std::string out;
};

void write_trajectory_csv(std::ostream& os, const simulate::SimulationReport& report) {
  const auto L = report.occupancy.cols();
  os << "k,second_moment,stderr";
  for (Eigen::Index i = 0; i < L; ++i) os << ",occupancy_" << i + 1;
  os << "\n";
  for (std::size_t k = 0; k < report.second_moment.size(); ++k) {
    const auto& e = report.second_moment[k];
    os << k << "," << fmt::format("{}", e.mean) << "," << fmt::format("{}", e.std_error);
    for (Eigen::Index i = 0; i < L; ++i) {
      os << "," << fmt::format("{}", report.occupancy(static_cast<Eigen::Index>(k), i));
    }
    os << "\n";
  }
}

int cmd_simulate(const SimulateOptions& opts, std::ostream& out) {
  const auto problem = load(opts.common);
  if (!problem.x0) throw InputError("simulate needs \"x0\" or \"x0_second_moment\" in the problem file");
  int code = kSuccess;
  std::ostringstream pipeline_log;
  const auto gains = resolve_gains(problem, opts.gains, opts.ptilde, pipeline_log, code);
  if (!gains) {
    out << pipeline_log.str();
    return code;
  }
  simulate::SimConfig cfg;
  cfg.paths = opts.paths;
  cfg.horizon = opts.horizon;
  cfg.seed = opts.seed;
  cfg.x0 = *problem.x0;
  cfg.threads = opts.threads;
  if (opts.theta0 > 0) {
    if (opts.theta0 > problem.model.modes) {
      throw InputError(fmt::format("--theta0 must be in 1..{}", problem.model.modes));
    }
    cfg.theta0 = ModeIndex(opts.theta0);
  }
  cfg.gains = simulate::GainSchedule::stationary(*gains);
  const auto report = simulate::simulate(problem.model, problem.weights, cfg);
  if (opts.out.empty()) {
    write_trajectory_csv(out, report);
  } else {
    auto file = open_output(opts.out);
    write_trajectory_csv(file, report);
    out << fmt::format("{} paths, horizon {}, seed {}\n", cfg.paths, cfg.horizon, cfg.seed);
    out << fmt::format("empirical cost: {} +/- {}\n", num(report.empirical_cost.mean),
                       num(report.empirical_cost.std_error));
  }
  return kSuccess;
}

void add_common(CLI::App* sub, CommonOptions& common) {
  sub->add_option("file", common.file, "Problem file (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_flag("--symmetrize", common.symmetrize,
                "Average weights whose asymmetry is below 1e-8 instead of rejecting them");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Indefinite LQ control and mean-square stabilization of Markov jump linear systems"};
  app.require_subcommand(1);

  FiniteOptions finite;
  auto* solve_finite = app.add_subcommand("solve-finite", "Backward Riccati recursion over a finite horizon");
  add_common(solve_finite, finite.common);
  solve_finite->add_option("--horizon,-N", finite.horizon, "Horizon N (steps 0..N)")
      ->required()
      ->check(CLI::NonNegativeNumber);
  solve_finite->add_option("--out", finite.out, "Write the per-step report (JSON)");

  GareOptions gare;
  auto* solve_gare = app.add_subcommand("solve-gare", "Maximal stationary solution and stabilizing gains");
  add_common(solve_gare, gare.common);
  solve_gare->add_option("--ptilde", gare.ptilde, "Set-S element: inline numbers or @file");
  solve_gare->add_option("--tol", gare.tol, "Successive-iterate stopping tolerance");
  solve_gare->add_option("--max-iter", gare.max_iterations, "Iteration cap");
  solve_gare->add_option("--out", gare.out, "Write the solution (JSON)");
  solve_gare->add_flag("--force", gare.force, "Run even when the preconditions fail (uncertified)");

  PtildeOptions check;
  auto* check_s = app.add_subcommand("check-s", "Test a candidate for membership in the set S");
  add_common(check_s, check.common);
  check_s->add_option("--ptilde", check.ptilde, "Candidate: inline numbers or @file");

  RegionOptions region;
  auto* region_scan = app.add_subcommand("region-scan", "Grid scan of set-S membership (scalar state)");
  add_common(region_scan, region.common);
  region_scan->add_option("--grid", region.grid, "lo hi for each mode")->required()->expected(2, 6);
  region_scan->add_option("--step", region.step, "Grid step")->required();
  region_scan->add_option("--out", region.out, "CSV output path (stdout when absent)");

  PtildeOptions obs;
  auto* observability = app.add_subcommand("observability", "Exact observability of (A, B, Qt^(1/2))");
  add_common(observability, obs.common);
  observability->add_option("--ptilde", obs.ptilde, "Set-S element: inline numbers or @file");
  observability->add_option("--horizon", obs.horizon, "Gramian horizon T (default n*L)");

  StabilityOptions stab;
  auto* stability = app.add_subcommand("stability", "Mean-square stability of a mode-dependent feedback");
  add_common(stability, stab.common);
  stability->add_option("--gains", stab.gains, "auto, or m*n numbers per mode row-major")->required();
  stability->add_option("--ptilde", stab.ptilde, "Set-S element used by --gains auto");

  SimulateOptions sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo second-moment trajectory");
  add_common(simulate_cmd, sim.common);
  simulate_cmd->add_option("--gains", sim.gains, "auto, or m*n numbers per mode row-major");
  simulate_cmd->add_option("--ptilde", sim.ptilde, "Set-S element used by --gains auto");
  simulate_cmd->add_option("--paths", sim.paths, "Number of sample paths")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--horizon", sim.horizon, "Number of transitions")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", sim.seed, "Master seed");
  simulate_cmd->add_option("--theta0", sim.theta0, "Fixed initial mode (default: sample pi0)");
  simulate_cmd->add_option("--threads", sim.threads, "Worker threads (0 = all cores)");
  simulate_cmd->add_option("--out", sim.out, "CSV output path (stdout when absent)");

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kInputError;
  }

  try {
    if (*solve_finite) return cmd_solve_finite(finite, out);
    if (*solve_gare) return cmd_solve_gare(gare, out);
    if (*check_s) return cmd_check_s(check, out);
    if (*region_scan) return cmd_region_scan(region, out);
    if (*observability) return cmd_observability(obs, out);
    if (*stability) return cmd_stability(stab, out);
    if (*simulate_cmd) return cmd_simulate(sim, out);
  } catch (const io::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const InvalidModel& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace mjls::cli
