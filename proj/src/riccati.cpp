#include "mjls/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "mjls/numlin.hpp"

namespace mjls::riccati {

std::string to_string(StepDefect defect) {
  switch (defect) {
    case StepDefect::none:
      return "regular";
    case StepDefect::upsilon_indefinite:
      return "Upsilon indefinite";
    case StepDefect::regularity_violated:
      return "regularity violated";
  }
  return "unknown";
}

bool RiccatiStep::all_regular() const {
  return std::all_of(defects.begin(), defects.end(),
                     [](StepDefect d) { return d == StepDefect::none; });
}

StepDefect classify_regularity(const Matrix& Upsilon, const Matrix& M) {
  if (numlin::psd_check(Upsilon) == numlin::Definiteness::indefinite) {
    return StepDefect::upsilon_indefinite;
  }
  const Matrix projected = Upsilon * numlin::pinv_sym(Upsilon) * M;
  const double defect = numlin::max_abs(projected - M);
  if (defect > kRegularityTolerance * std::max(1.0, numlin::max_abs(M))) {
    return StepDefect::regularity_violated;
  }
  return StepDefect::none;
}

namespace {

Matrix symmetric_part(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void require_family(std::span<const Matrix> family, const char* name, int modes,
                    Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<int>(family.size()) != modes) {
    throw std::invalid_argument(
        fmt::format("{} has {} mode entries, expected {}", name, family.size(), modes));
  }
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (family[i].rows() != rows || family[i].cols() != cols) {
      throw std::invalid_argument(fmt::format("{}_{} is {}x{}, expected {}x{}", name, i + 1,
                                              family[i].rows(), family[i].cols(), rows, cols));
    }
  }
}

double max_norm(const ModeMatrices& family) {
  double out = 0.0;
  for (const auto& m : family) out = std::max(out, numlin::max_abs(m));
  return out;
}

}  // namespace

RiccatiStep gdre_step(const ModeMatrices& P_next, const MjlsModel& model,
                      std::span<const Matrix> Q, std::span<const Matrix> R,
                      std::span<const Matrix> cross) {
  const int L = model.modes;
  const Eigen::Index n = model.state_dim;
  const Eigen::Index m = model.input_dim;
  require_family(P_next, "P_next", L, n, n);
  require_family(Q, "Q", L, n, n);
  require_family(R, "R", L, m, m);
  if (!cross.empty()) require_family(cross, "L", L, m, n);

  const double s2 = model.sigma2;
  RiccatiStep step;
  step.P.resize(static_cast<std::size_t>(L));
  step.Upsilon.resize(static_cast<std::size_t>(L));
  step.M.resize(static_cast<std::size_t>(L));
  step.F.resize(static_cast<std::size_t>(L));
  step.defects.resize(static_cast<std::size_t>(L));

  for (std::size_t i = 0; i < static_cast<std::size_t>(L); ++i) {
    const Matrix& A = model.A[i];
    const Matrix& B = model.B[i];
    const Matrix& C = model.C[i];
    const Matrix& D = model.D[i];
    const Matrix S = model.expected_next(P_next, i);

    Matrix Upsilon = symmetric_part(C.transpose() * S * C + s2 * D.transpose() * S * D + R[i]);
    Matrix M = C.transpose() * S * A + s2 * D.transpose() * S * B;
    if (!cross.empty()) M += cross[i];

    const Matrix Upsilon_pinv = numlin::pinv_sym(Upsilon);
    Matrix F = -Upsilon_pinv * M;
    step.P[i] = symmetric_part(A.transpose() * S * A + s2 * B.transpose() * S * B + Q[i] -
                               M.transpose() * Upsilon_pinv * M);
    step.defects[i] = classify_regularity(Upsilon, M);
    step.Upsilon[i] = std::move(Upsilon);
    step.M[i] = std::move(M);
    step.F[i] = std::move(F);
  }
  return step;
}

const Matrix& FiniteSolution::P(int k, std::size_t position) const {
  if (k == horizon + 1) return terminal.at(position);
  return steps.at(static_cast<std::size_t>(k)).P.at(position);
}

FiniteSolution solve_finite(const MjlsModel& model, const CostWeights& weights, int horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be >= 0");
  require_valid(model, weights);

  FiniteSolution sol;
  sol.horizon = horizon;
  sol.terminal = weights.terminal_P;
  sol.steps.resize(static_cast<std::size_t>(horizon) + 1);
  sol.solvable = true;

  const ModeMatrices* next = &sol.terminal;
  for (int k = horizon; k >= 0; --k) {
    auto& step = sol.steps[static_cast<std::size_t>(k)];
    step = gdre_step(*next, model, weights.Q, weights.R);
    for (std::size_t i = 0; i < step.defects.size(); ++i) {
      if (step.defects[i] != StepDefect::none) {
        if (!sol.failure) {
          sol.failure = FailurePoint{k, ModeIndex::from_position(i), step.defects[i]};
        }
        sol.solvable = false;
      }
    }
    next = &step.P;
  }
  return sol;
}

double stationary_cost(const ModeMatrices& P, const InitialState& init, const Vector& pi0) {
  if (static_cast<Eigen::Index>(P.size()) != pi0.size()) {
    throw std::invalid_argument("pi0 length does not match the number of modes");
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (P[i].rows() != init.dim()) {
      throw std::invalid_argument("initial state dimension does not match P");
    }
    cost += pi0(static_cast<Eigen::Index>(i)) * (P[i] * init.second_moment()).trace();
  }
  return cost;
}

double optimal_cost_finite(const FiniteSolution& sol, const InitialState& init, const Vector& pi0) {
  if (!sol.solvable) {
    throw Unsolvable("optimal cost requested for an unsolvable Riccati recursion");
  }
  return stationary_cost(sol.steps.front().P, init, pi0);
}

CostateResidual costate_residual(const FiniteSolution& sol, const MjlsModel& model,
                                 const CostWeights& weights) {
  CostateResidual out;
  out.per_step.assign(sol.steps.size(), 0.0);
  const double s2 = model.sigma2;
  for (int k = 0; k <= sol.horizon; ++k) {
    const RiccatiStep& stored = sol.steps[static_cast<std::size_t>(k)];
    const ModeMatrices& next =
        k == sol.horizon ? sol.terminal : sol.steps[static_cast<std::size_t>(k) + 1].P;
    double worst = 0.0;
    for (std::size_t i = 0; i < stored.P.size(); ++i) {
      const Matrix& A = model.A[i];
      const Matrix& B = model.B[i];
      const Matrix& C = model.C[i];
      const Matrix& D = model.D[i];
      const Matrix S = model.expected_next(next, i);

      const double stat = numlin::max_abs(stored.M[i] + stored.Upsilon[i] * stored.F[i]);

      const Matrix Upsilon = C.transpose() * S * C + s2 * D.transpose() * S * D + weights.R[i];
      const Matrix M = C.transpose() * S * A + s2 * D.transpose() * S * B;
      const Matrix rhs = A.transpose() * S * A + s2 * B.transpose() * S * B + weights.Q[i] +
                         stored.M[i].transpose() * stored.F[i];
      const double costate = std::max({numlin::max_abs(stored.P[i] - rhs),
                                       numlin::max_abs(stored.M[i] - M),
                                       numlin::max_abs(stored.Upsilon[i] - Upsilon)});
      out.stationarity = std::max(out.stationarity, stat);
      out.costate = std::max(out.costate, costate);
      worst = std::max({worst, stat, costate});
    }
    out.per_step[static_cast<std::size_t>(k)] = worst;
  }
  out.max = std::max(out.stationarity, out.costate);
  return out;
}

Matrix ShiftedWeights::block(std::size_t position) const {
  const Matrix& Q = Qt.at(position);
  const Matrix& L = Lt.at(position);
  const Matrix& R = Rt.at(position);
  const Eigen::Index n = Q.rows();
  const Eigen::Index m = R.rows();
  Matrix out(n + m, n + m);
  out.topLeftCorner(n, n) = Q;
  out.topRightCorner(n, m) = L.transpose();
  out.bottomLeftCorner(m, n) = L;
  out.bottomRightCorner(m, m) = R;
  return out;
}

ShiftedWeights shifted_weights(const MjlsModel& model, const CostWeights& weights,
                               const ModeMatrices& Ptilde) {
  const int L = model.modes;
  const Eigen::Index n = model.state_dim;
  const Eigen::Index m = model.input_dim;
  require_family(Ptilde, "Ptilde", L, n, n);
  require_family(weights.Q, "Q", L, n, n);
  require_family(weights.R, "R", L, m, m);

  const double s2 = model.sigma2;
  ShiftedWeights sw;
  sw.Ptilde = Ptilde;
  for (std::size_t i = 0; i < static_cast<std::size_t>(L); ++i) {
    const Matrix& A = model.A[i];
    const Matrix& B = model.B[i];
    const Matrix& C = model.C[i];
    const Matrix& D = model.D[i];
    const Matrix S = model.expected_next(Ptilde, i);
    sw.Qt.push_back(symmetric_part(A.transpose() * S * A + s2 * B.transpose() * S * B +
                                   weights.Q[i] - Ptilde[i]));
    sw.Lt.push_back(C.transpose() * S * A + s2 * D.transpose() * S * B);
    sw.Rt.push_back(symmetric_part(C.transpose() * S * C + s2 * D.transpose() * S * D +
                                   weights.R[i]));
  }
  return sw;
}

NgareDiverged::NgareDiverged(std::string reason, std::vector<double> iterate_norms,
                             int iterations)
    : std::runtime_error(std::move(reason)), norms_(std::move(iterate_norms)),
      iterations_(iterations) {}

namespace {

constexpr double kBlowUp = 1e150;

}  // namespace

NgareResult solve_ngare(const MjlsModel& model, const ShiftedWeights& sw,
                        const NgareOptions& options) {
  const auto L = static_cast<std::size_t>(model.modes);
  const Eigen::Index n = model.state_dim;
  NgareResult out;
  ModeMatrices X(L, Matrix::Zero(n, n));
  std::vector<double> norms;

  for (int t = 1; t <= options.max_iterations; ++t) {
    RiccatiStep step = gdre_step(X, model, sw.Qt, sw.Rt, sw.Lt);
    const double norm = max_norm(step.P);
    norms.push_back(norm);
    bool finite = true;
    for (const auto& m : step.P) finite = finite && m.allFinite();
    if (!finite || norm > kBlowUp) {
      throw NgareDiverged(
          fmt::format("shifted Riccati iteration blew up after {} iterations (||X|| = {:.6g})", t,
                      norm),
          std::move(norms), t);
    }
    out.regular = out.regular && step.all_regular();

    double change = 0.0;
    const double slack = options.tol * std::max(1.0, max_norm(X));
    for (std::size_t i = 0; i < L; ++i) {
      const Matrix delta = step.P[i] - X[i];
      change = std::max(change, numlin::max_abs(delta));
      if (numlin::min_eigenvalue(0.5 * (delta + delta.transpose())) < -slack) {
        out.monotone = false;
      }
      if (!numlin::is_psd(step.P[i])) out.psd_iterates = false;
    }
    X = std::move(step.P);
    out.iterations = t;
    out.last_change = change;
    if (change <= options.tol * std::max(1.0, norm)) {
      out.Ft = gdre_step(X, model, sw.Qt, sw.Rt, sw.Lt).F;
      out.X = std::move(X);
      return out;
    }
  }
  const double last = norms.empty() ? 0.0 : norms.back();
  throw NgareDiverged(
      fmt::format("shifted Riccati iteration did not converge in {} iterations (||X|| = {:.6g}, "
                  "last change {:.3g})",
                  options.max_iterations, last, out.last_change),
      std::move(norms), options.max_iterations);
}

GareResidual gare_residual(const MjlsModel& model, const CostWeights& weights,
                           const ModeMatrices& P) {
  const RiccatiStep step = gdre_step(P, model, weights.Q, weights.R);
  GareResidual out;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double defect = numlin::max_abs(P[i] - step.P[i]);
    out.absolute = std::max(out.absolute, defect);
    out.relative = std::max(out.relative, defect / std::max(1.0, numlin::max_abs(P[i])));
  }
  out.regular = step.all_regular();
  return out;
}

InconsistentSolution::InconsistentSolution(const std::string& what, double residual,
                                           double gain_mismatch)
    : std::runtime_error(what), residual_(residual), gain_mismatch_(gain_mismatch) {}

StationarySolution solve_gare(const MjlsModel& model, const CostWeights& weights,
                              const ModeMatrices& Ptilde, const NgareOptions& options) {
  require_valid(model, weights);
  const ShiftedWeights sw = shifted_weights(model, weights, Ptilde);
  NgareResult ng = solve_ngare(model, sw, options);

  StationarySolution sol;
  sol.Ptilde = Ptilde;
  sol.X = ng.X;
  sol.iterations = ng.iterations;
  sol.monotone = ng.monotone;
  for (std::size_t i = 0; i < Ptilde.size(); ++i) {
    sol.P.push_back(symmetric_part(ng.X[i] + Ptilde[i]));
  }
  const RiccatiStep at_P = gdre_step(sol.P, model, weights.Q, weights.R);
  sol.Upsilon = at_P.Upsilon;
  sol.M = at_P.M;
  sol.F = at_P.F;

  sol.residual = gare_residual(model, weights, sol.P).relative;
  sol.x_positive_definite = true;
  for (std::size_t i = 0; i < sol.X.size(); ++i) {
    sol.gain_mismatch = std::max(sol.gain_mismatch, numlin::max_abs(sol.F[i] - ng.Ft[i]));
    if (numlin::psd_check(sol.X[i]) != numlin::Definiteness::positive_definite) {
      sol.x_positive_definite = false;
    }
  }
  if (sol.residual > kGareResidualTolerance || sol.gain_mismatch > kGainMismatchTolerance) {
    throw InconsistentSolution(
        fmt::format("stationary solution failed its certificates: GARE residual {:.3g}, "
                    "gain mismatch {:.3g}",
                    sol.residual, sol.gain_mismatch),
        sol.residual, sol.gain_mismatch);
  }
  return sol;
}

}  // namespace mjls::riccati
