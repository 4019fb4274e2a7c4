#include "mjls/simulate.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mjls::simulate {

double expected_cost_scalar(const MjlsModel& model, const CostWeights& weights, double x0,
                            ModeIndex theta0, const std::vector<std::vector<double>>& gains) {
  const auto L = static_cast<std::size_t>(model.modes);
  const double s2 = model.sigma2;
  // z[i] = E[x(k)^2 1{theta(k) = i}]
  std::vector<double> z(L, 0.0);
  std::vector<double> next(L, 0.0);
  z[theta0.position()] = x0 * x0;
  double total = 0.0;
  for (const auto& step : gains) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < L; ++i) {
      if (z[i] == 0.0) continue;
      const double f = step[i];
      const double a = model.A[i](0, 0) + model.C[i](0, 0) * f;
      const double b = model.B[i](0, 0) + model.D[i](0, 0) * f;
      total += z[i] * (weights.Q[i](0, 0) + weights.R[i](0, 0) * f * f);
      const double carried = z[i] * (a * a + s2 * b * b);
      for (std::size_t j = 0; j < L; ++j) {
        next[j] += model.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * carried;
      }
    }
    z.swap(next);
  }
  for (std::size_t i = 0; i < L; ++i) total += z[i] * weights.terminal_P[i](0, 0);
  return total;
}

namespace {

struct Coordinate {
  std::size_t k;
  std::size_t i;
};

}  // namespace

BruteForceResult brute_force_finite(const MjlsModel& model, const CostWeights& weights, int horizon,
                                    double x0, ModeIndex theta0, const BruteForceOptions& options) {
  if (model.state_dim != 1 || model.input_dim != 1 || model.modes > 3 || horizon < 0 ||
      horizon > 2) {
    throw std::invalid_argument(fmt::format(
        "brute force oracle supports n = m = 1, L <= 3, N <= 2 (got n = {}, m = {}, L = {}, N = {})",
        model.state_dim, model.input_dim, model.modes, horizon));
  }
  require_valid(model, weights);
  if (!theta0.valid_for(model.modes)) throw std::invalid_argument("theta0 is not a mode");

  const auto L = static_cast<std::size_t>(model.modes);
  const auto steps = static_cast<std::size_t>(horizon) + 1;
  BruteForceResult out;
  out.gains.assign(steps, std::vector<double>(L, 0.0));
  out.relevant.assign(steps, std::vector<bool>(L, false));

  // Reachability of each mode from theta0 under the chain alone.
  std::vector<double> reach(L, 0.0);
  reach[theta0.position()] = 1.0;
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<double> next(L, 0.0);
    for (std::size_t i = 0; i < L; ++i) {
      out.relevant[k][i] = reach[i] > 0.0 && x0 != 0.0;
      for (std::size_t j = 0; j < L; ++j) {
        next[j] += reach[i] * model.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
    reach = next;
  }

  // Later steps first: with the tail fixed at its optimum, each earlier
  // coordinate problem is exact.
  std::vector<Coordinate> coords;
  for (std::size_t k = steps; k-- > 0;) {
    for (std::size_t i = 0; i < L; ++i) {
      if (out.relevant[k][i]) coords.push_back({k, i});
    }
  }

  auto objective = [&](const std::vector<std::vector<double>>& g) {
    ++out.evaluations;
    return expected_cost_scalar(model, weights, x0, theta0, g);
  };

  auto gains = out.gains;
  double best = objective(gains);
  if (coords.empty()) {
    out.value = best;
    out.flat = true;
    return out;
  }

  // Joint grid, odd point count per axis so 0 is on it.
  const std::size_t d = coords.size();
  long per_axis = static_cast<long>(std::floor(
      std::pow(static_cast<double>(options.joint_grid_budget), 1.0 / static_cast<double>(d))));
  per_axis = std::clamp(per_axis, 3L, 401L);
  if (per_axis % 2 == 0) --per_axis;
  const double grid_step = 2.0 * options.span / static_cast<double>(per_axis - 1);
  long total = 1;
  for (std::size_t c = 0; c < d; ++c) total *= per_axis;

  double grid_lo = INFINITY;
  double grid_hi = -INFINITY;
  std::vector<std::vector<double>> trial = gains;
  for (long flat = 0; flat < total; ++flat) {
    long rest = flat;
    for (std::size_t c = 0; c < d; ++c) {
      trial[coords[c].k][coords[c].i] =
          -options.span + static_cast<double>(rest % per_axis) * grid_step;
      rest /= per_axis;
    }
    const double value = objective(trial);
    grid_lo = std::min(grid_lo, value);
    grid_hi = std::max(grid_hi, value);
    if (value < best) {
      best = value;
      gains = trial;
    }
  }
  out.flat = (grid_hi - grid_lo) <= 1e-12 * std::max(1.0, std::abs(grid_lo));

  // Coordinate descent: a global 1-D scan of each coordinate, then nested
  // zoom around the best point until the step is below the resolution.
  auto minimize_coordinate = [&](const Coordinate& c) {
    double& slot = gains[c.k][c.i];
    double best_x = slot;
    double best_v = objective(gains);
    auto scan = [&](double lo, double hi, int points) {
      const double h = (hi - lo) / static_cast<double>(points - 1);
      for (int p = 0; p < points; ++p) {
        slot = std::clamp(lo + h * p, -options.span, options.span);
        const double v = objective(gains);
        if (v < best_v) {
          best_v = v;
          best_x = slot;
        }
      }
      slot = best_x;
      return h;
    };
    double h = scan(-options.span, options.span, 2001);
    while (h > options.resolution * 0.1) h = scan(best_x - 2.0 * h, best_x + 2.0 * h, 41);
    return best_v;
  };

  for (int sweep = 0; sweep < 50; ++sweep) {
    double value = best;
    for (const auto& c : coords) value = minimize_coordinate(c);
    const bool settled = best - value <= 1e-15 * std::max(1.0, std::abs(value));
    best = std::min(best, value);
    if (settled) break;
  }

  out.value = best;
  out.gains = gains;
  return out;
}

}  // namespace mjls::simulate
