#include "mjls/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "mjls/numlin.hpp"

namespace mjls::simulate {

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t path_seed(std::uint64_t master_seed, std::uint64_t path_index) {
  return mix64(master_seed + 0x9E3779B97F4A7C15ULL * (path_index + 1));
}

PathRandom::PathRandom(std::uint64_t master_seed, std::uint64_t path_index)
    : engine_(path_seed(master_seed, path_index)) {}

double PathRandom::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double PathRandom::standard_normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double PathRandom::noise(NoiseKind kind, double sigma2) {
  const double sigma = std::sqrt(sigma2);
  switch (kind) {
    case NoiseKind::gaussian:
      return sigma * standard_normal();
    case NoiseKind::rademacher:
      return uniform() < 0.5 ? -sigma : sigma;
  }
  return 0.0;
}

std::size_t PathRandom::categorical(const Eigen::Ref<const Eigen::RowVectorXd>& weights) {
  const double u = uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    if (weights(j) <= 0.0) continue;
    last_positive = static_cast<std::size_t>(j);
    cumulative += weights(j);
    if (u < cumulative) return last_positive;
  }
  // Row sums are 1 only up to round-off.
  return last_positive;
}

GainSchedule GainSchedule::stationary(ModeMatrices gains) {
  GainSchedule s;
  s.table_.push_back(std::move(gains));
  s.stationary_ = true;
  return s;
}

GainSchedule GainSchedule::time_varying(std::vector<ModeMatrices> per_step) {
  GainSchedule s;
  s.table_ = std::move(per_step);
  s.stationary_ = false;
  return s;
}

GainSchedule GainSchedule::from_finite(const riccati::FiniteSolution& sol) {
  std::vector<ModeMatrices> table;
  for (const auto& step : sol.steps) table.push_back(step.F);
  return time_varying(std::move(table));
}

const Matrix& GainSchedule::at(int k, std::size_t position) const {
  if (stationary_) return table_.at(0).at(position);
  if (k < 0 || static_cast<std::size_t>(k) >= table_.size()) {
    throw std::out_of_range(
        fmt::format("gain schedule has {} steps, step {} requested", table_.size(), k));
  }
  return table_[static_cast<std::size_t>(k)].at(position);
}

GainSchedule GainSchedule::shifted(double offset) const {
  GainSchedule s = *this;
  for (auto& step : s.table_) {
    for (auto& g : step) g.array() += offset;
  }
  return s;
}

namespace {

/// Streaming mean and sum of squared deviations, mergeable in a fixed order.
struct Moments {
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  void merge(const Moments& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const long total = count + other.count;
    const double delta = other.mean - mean;
    mean += delta * static_cast<double>(other.count) / static_cast<double>(total);
    m2 += other.m2 + delta * delta * static_cast<double>(count) *
                         static_cast<double>(other.count) / static_cast<double>(total);
    count = total;
  }

  Estimate estimate() const {
    Estimate e;
    e.mean = mean;
    if (count > 1) {
      const double variance = m2 / static_cast<double>(count - 1);
      e.std_error = std::sqrt(std::max(variance, 0.0) / static_cast<double>(count));
    }
    return e;
  }
};

constexpr int kChunkPaths = 512;

/// Runs `work(begin, end)` for fixed path chunks on a worker pool and returns
/// the chunk results in chunk order, independent of the thread count.
template <class Result, class Work>
std::vector<Result> run_chunks(int paths, int threads, Work work) {
  const int chunks = (paths + kChunkPaths - 1) / kChunkPaths;
  std::vector<Result> results(static_cast<std::size_t>(chunks));
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, std::max(1, chunks));

  std::atomic<int> next{0};
  auto drain = [&] {
    for (int c = next++; c < chunks; c = next++) {
      const int begin = c * kChunkPaths;
      const int end = std::min(paths, begin + kChunkPaths);
      results[static_cast<std::size_t>(c)] = work(begin, end);
    }
  };
  if (workers == 1) {
    drain();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(drain);
  }
  return results;
}

class Rollout {
 public:
  Rollout(const MjlsModel& model, const SimConfig& cfg, const Matrix& x0_root, int path)
      : model_(model), rng_(cfg.seed, static_cast<std::uint64_t>(path)) {
    if (cfg.theta0) {
      mode_ = cfg.theta0->position();
    } else {
      mode_ = rng_.categorical(model.pi0.transpose());
    }
    if (cfg.x0.is_deterministic()) {
      x_ = *cfg.x0.point();
    } else {
      Vector g(x0_root.rows());
      for (Eigen::Index r = 0; r < g.size(); ++r) g(r) = rng_.standard_normal();
      x_ = x0_root * g;
    }
  }

  std::size_t mode() const { return mode_; }
  const Vector& x() const { return x_; }

  void advance(const Vector& u) {
    const double w = rng_.noise(model_.noise_kind, model_.sigma2);
    const std::size_t i = mode_;
    x_ = (model_.A[i] * x_ + model_.C[i] * u) + w * (model_.B[i] * x_ + model_.D[i] * u);
    mode_ = rng_.categorical(model_.rho.row(static_cast<Eigen::Index>(i)));
  }

 private:
  const MjlsModel& model_;
  PathRandom rng_;
  std::size_t mode_ = 0;
  Vector x_;
};

void check_config(const MjlsModel& model, const SimConfig& cfg, int steps) {
  if (cfg.paths < 1) throw std::invalid_argument("paths must be >= 1");
  if (cfg.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (cfg.theta0 && !cfg.theta0->valid_for(model.modes)) {
    throw std::invalid_argument(fmt::format("theta0 = {} is not a mode", cfg.theta0->value()));
  }
  const auto report = validate_initial_state(cfg.x0, model.state_dim);
  if (!report.ok()) throw std::invalid_argument(report.to_string());
  for (int k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(model.modes); ++i) {
      const Matrix& K = cfg.gains.at(k, i);
      if (K.rows() != model.input_dim || K.cols() != model.state_dim) {
        throw std::invalid_argument(fmt::format("gain for mode {} at step {} is {}x{}, expected {}x{}",
                                                i + 1, k, K.rows(), K.cols(), model.input_dim,
                                                model.state_dim));
      }
    }
    if (cfg.gains.is_stationary()) break;
  }
}

Matrix initial_root(const SimConfig& cfg) {
  if (cfg.x0.is_deterministic()) return Matrix();
  return numlin::sqrt_psd(cfg.x0.second_moment());
}

}  // namespace

SimulationReport simulate(const MjlsModel& model, const CostWeights& weights, const SimConfig& cfg) {
  require_valid(model, weights);
  check_config(model, cfg, cfg.horizon);
  const int H = cfg.horizon;
  const auto L = static_cast<Eigen::Index>(model.modes);
  const Matrix x0_root = initial_root(cfg);

  struct Chunk {
    std::vector<Moments> second_moment;
    Matrix occupancy;
    Moments cost;
  };

  auto work = [&](int begin, int end) {
    Chunk chunk;
    chunk.second_moment.resize(static_cast<std::size_t>(H) + 1);
    chunk.occupancy = Matrix::Zero(H + 1, L);
    for (int path = begin; path < end; ++path) {
      Rollout roll(model, cfg, x0_root, path);
      double cost = 0.0;
      for (int k = 0; k < H; ++k) {
        const std::size_t i = roll.mode();
        const Vector& x = roll.x();
        chunk.second_moment[static_cast<std::size_t>(k)].add(x.squaredNorm());
        chunk.occupancy(k, static_cast<Eigen::Index>(i)) += 1.0;
        const Vector u = cfg.gains.at(k, i) * x;
        cost += x.dot(weights.Q[i] * x) + u.dot(weights.R[i] * u);
        roll.advance(u);
      }
      const Vector& x = roll.x();
      const std::size_t i = roll.mode();
      chunk.second_moment[static_cast<std::size_t>(H)].add(x.squaredNorm());
      chunk.occupancy(H, static_cast<Eigen::Index>(i)) += 1.0;
      cost += x.dot(weights.terminal_P[i] * x);
      chunk.cost.add(cost);
    }
    return chunk;
  };

  const auto chunks = run_chunks<Chunk>(cfg.paths, cfg.threads, work);

  std::vector<Moments> second_moment(static_cast<std::size_t>(H) + 1);
  Matrix occupancy = Matrix::Zero(H + 1, L);
  Moments cost;
  for (const auto& chunk : chunks) {
    for (std::size_t k = 0; k < second_moment.size(); ++k) second_moment[k].merge(chunk.second_moment[k]);
    occupancy += chunk.occupancy;
    cost.merge(chunk.cost);
  }

  SimulationReport report;
  report.paths_used = cfg.paths;
  for (const auto& m : second_moment) report.second_moment.push_back(m.estimate());
  report.occupancy = occupancy / static_cast<double>(cfg.paths);
  report.empirical_cost = cost.estimate();
  return report;
}

CostIdentity empirical_cost_identity(const MjlsModel& model, const CostWeights& weights,
                                     const riccati::FiniteSolution& sol, const SimConfig& cfg) {
  if (!sol.solvable) {
    throw riccati::Unsolvable("cost identity needs a solvable Riccati recursion");
  }
  require_valid(model, weights);
  const int N = sol.horizon;
  SimConfig run = cfg;
  run.horizon = N + 1;
  check_config(model, run, N + 1);
  const Matrix x0_root = initial_root(run);

  struct Chunk {
    Moments lhs, rhs, penalty, difference;
  };

  auto work = [&](int begin, int end) {
    Chunk chunk;
    for (int path = begin; path < end; ++path) {
      Rollout roll(model, run, x0_root, path);
      const Vector x0 = roll.x();
      const std::size_t mode0 = roll.mode();
      double lhs = 0.0;
      double penalty = 0.0;
      for (int k = 0; k <= N; ++k) {
        const std::size_t i = roll.mode();
        const Vector& x = roll.x();
        const auto& step = sol.steps[static_cast<std::size_t>(k)];
        const Vector u = run.gains.at(k, i) * x;
        lhs += x.dot(weights.Q[i] * x) + u.dot(weights.R[i] * u);
        // Upsilon^+ M x = -F x
        const Vector deviation = u - step.F[i] * x;
        penalty += deviation.dot(step.Upsilon[i] * deviation);
        roll.advance(u);
      }
      lhs += roll.x().dot(weights.terminal_P[roll.mode()] * roll.x());
      const double rhs = x0.dot(sol.steps.front().P[mode0] * x0) + penalty;
      chunk.lhs.add(lhs);
      chunk.rhs.add(rhs);
      chunk.penalty.add(penalty);
      chunk.difference.add(lhs - rhs);
    }
    return chunk;
  };

  Chunk total;
  for (const auto& chunk : run_chunks<Chunk>(run.paths, run.threads, work)) {
    total.lhs.merge(chunk.lhs);
    total.rhs.merge(chunk.rhs);
    total.penalty.merge(chunk.penalty);
    total.difference.merge(chunk.difference);
  }

  CostIdentity out;
  out.lhs = total.lhs.estimate();
  out.rhs = total.rhs.estimate();
  out.penalty = total.penalty.estimate();
  out.difference = total.difference.estimate();
  if (run.theta0) {
    Vector e = Vector::Zero(model.modes);
    e(static_cast<Eigen::Index>(run.theta0->position())) = 1.0;
    out.optimal = riccati::optimal_cost_finite(sol, run.x0, e);
  } else {
    out.optimal = riccati::optimal_cost_finite(sol, run.x0, model.pi0);
  }
  if (out.difference.std_error > 0.0) {
    out.z_score = out.difference.mean / out.difference.std_error;
  } else {
    out.z_score = out.difference.mean == 0.0 ? 0.0 : std::copysign(INFINITY, out.difference.mean);
  }
  return out;
}

}  // namespace mjls::simulate
