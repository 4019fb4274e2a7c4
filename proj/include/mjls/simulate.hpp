#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mjls/model.hpp"
#include "mjls/riccati.hpp"

namespace mjls::simulate {

/// Deterministic 64-bit finalizer (SplitMix64). Bijective on uint64.
std::uint64_t mix64(std::uint64_t z);

/// Seed of the substream of one path:
///   mix64(master_seed + 0x9E3779B97F4A7C15 * (path_index + 1))
std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index);

/// Random source of a single path: mt19937_64 seeded with path_seed.
/// Uniforms take the top 53 bits of one engine output; normals use the
/// Box-Muller cosine branch on two uniforms.
class PathRandom {
 public:
  PathRandom(std::uint64_t master_seed, std::uint64_t path_index);

  /// Uniform on [0, 1).
  double uniform();
  double standard_normal();
  /// Zero-mean noise with variance sigma2 of the requested kind.
  double noise(NoiseKind kind, double sigma2);
  /// Position j with probability weights(j), by inversion of the cumulative sum.
  std::size_t categorical(const Eigen::Ref<const Eigen::RowVectorXd>& weights);

 private:
  std::mt19937_64 engine_;
};

/// Feedback gains u = K x, either one per mode or one per (step, mode).
class GainSchedule {
 public:
  static GainSchedule stationary(ModeMatrices gains);
  /// per_step[k][i]; steps beyond the table are an error.
  static GainSchedule time_varying(std::vector<ModeMatrices> per_step);
  /// Gains F_i(k) of a finite-horizon solution.
  static GainSchedule from_finite(const riccati::FiniteSolution& sol);

  const Matrix& at(int k, std::size_t position) const;
  bool is_stationary() const { return table_.size() == 1 && stationary_; }
  /// Same schedule with `offset` added to every gain entry.
  GainSchedule shifted(double offset) const;

 private:
  std::vector<ModeMatrices> table_;
  bool stationary_ = true;
};

struct SimConfig {
  int paths = 1000;
  int horizon = 20;
  std::uint64_t seed = 0;
  InitialState x0 = InitialState::deterministic(Vector::Ones(1));
  /// Fixed initial mode; sampled from model.pi0 when empty.
  std::optional<ModeIndex> theta0;
  GainSchedule gains = GainSchedule::stationary({});
  /// Worker threads; 0 picks std::thread::hardware_concurrency(). Results do
  /// not depend on this value.
  int threads = 0;
};

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(paths)
};

struct SimulationReport {
  std::vector<Estimate> second_moment;  // E[x(k)'x(k)], k = 0..horizon
  Matrix occupancy;                     // (horizon+1) x L mode frequencies
  /// sum_{k<horizon} (x'Q x + u'R u) + x(horizon)' terminal_P x(horizon)
  Estimate empirical_cost;
  int paths_used = 0;
};

/// Monte Carlo rollout of the closed loop under cfg.gains.
SimulationReport simulate(const MjlsModel& model, const CostWeights& weights, const SimConfig& cfg);

struct CostIdentity {
  Estimate lhs;         // realized cost J_N
  Estimate rhs;         // x0' P_theta0(0) x0 + sum_k (u - F*(k) x)' Upsilon(k) (u - F*(k) x)
  Estimate penalty;     // the sum term alone
  Estimate difference;  // lhs - rhs, paired on the same paths
  double optimal = 0.0; // E[x0' P_theta0(0) x0] from the recursion
  double z_score = 0.0;
};

/// Both sides of the completion-of-squares decomposition, estimated on the
/// same sample paths under an arbitrary gain schedule. cfg.horizon is
/// ignored: the rollout length is sol.horizon + 1 transitions.
CostIdentity empirical_cost_identity(const MjlsModel& model, const CostWeights& weights,
                                     const riccati::FiniteSolution& sol, const SimConfig& cfg);

struct BruteForceResult {
  double value = 0.0;
  /// gains[k][i] for k = 0..N; irrelevant entries are left at zero.
  std::vector<std::vector<double>> gains;
  /// Whether mode i is reachable at step k from theta0 (its gain matters).
  std::vector<std::vector<bool>> relevant;
  /// Objective did not vary over the search grid.
  bool flat = false;
  long evaluations = 0;
};

struct BruteForceOptions {
  double span = 10.0;
  double resolution = 1e-6;
  long joint_grid_budget = 2000000;
};

/// Exact expected cost of a scalar problem under per-(step, mode) feedback
/// gains, by propagating mode-conditioned second moments.
double expected_cost_scalar(const MjlsModel& model, const CostWeights& weights, double x0,
                            ModeIndex theta0, const std::vector<std::vector<double>>& gains);

/// Minimizes expected_cost_scalar over all gains (n = m = 1, L <= 3, N <= 2):
/// joint grid on [-span, span] followed by coordinate descent down to
/// `resolution`.
BruteForceResult brute_force_finite(const MjlsModel& model, const CostWeights& weights, int horizon,
                                    double x0, ModeIndex theta0, const BruteForceOptions& options = {});

}  // namespace mjls::simulate
