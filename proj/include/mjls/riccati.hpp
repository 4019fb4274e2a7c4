#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mjls/model.hpp"

namespace mjls::riccati {

/// Why a mode fails the solvability side conditions at one backward step.
enum class StepDefect {
  none,
  upsilon_indefinite,   // Upsilon_i has a negative eigenvalue
  regularity_violated,  // Upsilon_i Upsilon_i^+ M_i != M_i
};

std::string to_string(StepDefect defect);

inline constexpr double kRegularityTolerance = 1e-8;

/// One backward step of the coupled generalized Riccati recursion.
struct RiccatiStep {
  ModeMatrices P;        // n x n
  ModeMatrices Upsilon;  // m x m
  ModeMatrices M;        // m x n
  ModeMatrices F;        // m x n, F_i = -Upsilon_i^+ M_i
  std::vector<StepDefect> defects;

  bool regular(std::size_t position) const { return defects[position] == StepDefect::none; }
  bool all_regular() const;
};

/// Classifies (Upsilon, M) against the two side conditions of the recursion.
StepDefect classify_regularity(const Matrix& Upsilon, const Matrix& M);

/// Evaluates one step of
///
///   S_i       = sum_j rho_ij P_next_j
///   Upsilon_i = C_i' S_i C_i + sigma2 D_i' S_i D_i + R_i
///   M_i       = C_i' S_i A_i + sigma2 D_i' S_i B_i + L_i
///   P_i       = A_i' S_i A_i + sigma2 B_i' S_i B_i + Q_i - M_i' Upsilon_i^+ M_i
///
/// `cross` holds the optional m x n cross weights L_i; empty means zero.
/// The step is always computed; irregular modes are flagged, not rejected.
RiccatiStep gdre_step(const ModeMatrices& P_next, const MjlsModel& model,
                      std::span<const Matrix> Q, std::span<const Matrix> R,
                      std::span<const Matrix> cross = {});

struct FailurePoint {
  int k;
  ModeIndex mode;
  StepDefect reason;
};

struct FiniteSolution {
  std::vector<RiccatiStep> steps;  // steps[k], k = 0..horizon
  int horizon = 0;
  ModeMatrices terminal;
  bool solvable = false;
  /// First irregular (k, mode) met by the backward sweep: largest k, then
  /// lowest mode.
  std::optional<FailurePoint> failure;

  /// P_i(k) for k = 0..horizon+1; k = horizon+1 yields the terminal weight.
  const Matrix& P(int k, std::size_t position) const;
};

class Unsolvable : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Backward recursion from P(N+1) = weights.terminal_P down to k = 0.
FiniteSolution solve_finite(const MjlsModel& model, const CostWeights& weights, int horizon);

/// sum_i pi0_i trace(P_i(0) E[x0 x0']). Throws Unsolvable on an unsolvable solution.
double optimal_cost_finite(const FiniteSolution& sol, const InitialState& init, const Vector& pi0);

struct CostateResidual {
  std::vector<double> per_step;  // per k = 0..horizon
  double stationarity = 0.0;     // max_k,i ||M_i(k) + Upsilon_i(k) F_i(k)||_inf
  double costate = 0.0;          // max_k,i defect of the costate recursion
  double max = 0.0;
};

/// Checks the stationarity condition and the costate relation
/// lambda_{k-1} = (sum_j rho_ij P_j(k)) x(k) as matrix identities: the stored
/// (Upsilon, M, P) are recomputed from P(k+1) and
///   P_i(k) = A_i' S_i A_i + sigma2 B_i' S_i B_i + Q_i + M_i' F_i
/// must hold for the stored gains.
CostateResidual costate_residual(const FiniteSolution& sol, const MjlsModel& model,
                                 const CostWeights& weights);

/// Shifted weights induced by a candidate Ptilde:
///   Qt_i = A_i' St_i A_i + sigma2 B_i' St_i B_i + Q_i - Ptilde_i
///   Lt_i = C_i' St_i A_i + sigma2 D_i' St_i B_i          (m x n)
///   Rt_i = C_i' St_i C_i + sigma2 D_i' St_i D_i + R_i
/// with St_i = sum_j rho_ij Ptilde_j.
struct ShiftedWeights {
  ModeMatrices Qt;
  ModeMatrices Lt;
  ModeMatrices Rt;
  ModeMatrices Ptilde;

  /// [[Qt_i, Lt_i'], [Lt_i, Rt_i]].
  Matrix block(std::size_t position) const;
};

ShiftedWeights shifted_weights(const MjlsModel& model, const CostWeights& weights,
                               const ModeMatrices& Ptilde);

struct NgareOptions {
  double tol = 1e-11;
  int max_iterations = 100000;
};

struct NgareResult {
  ModeMatrices X;
  ModeMatrices Ft;  // -Upsilon~^+ M~ at the fixed point
  int iterations = 0;
  double last_change = 0.0;
  /// Every iterate satisfied X(t+1) >= X(t) - tol I.
  bool monotone = true;
  /// Every iterate was PSD within tolerance.
  bool psd_iterates = true;
  /// Every step met the regularity side conditions.
  bool regular = true;
};

class NgareDiverged : public std::runtime_error {
 public:
  NgareDiverged(std::string reason, std::vector<double> iterate_norms, int iterations);
  const std::vector<double>& iterate_norms() const { return norms_; }
  int iterations() const { return iterations_; }

 private:
  std::vector<double> norms_;
  int iterations_;
};

/// Monotone value iteration of the shifted recursion from X = 0 until the
/// successive-iterate distance drops below tol * max(1, ||X||_inf).
/// Throws NgareDiverged when it does not settle within max_iterations or the
/// iterates blow up.
NgareResult solve_ngare(const MjlsModel& model, const ShiftedWeights& sw,
                        const NgareOptions& options = {});

struct GareResidual {
  /// max_i ||P_i - rhs_i||_inf / max(1, ||P_i||_inf)
  double relative = 0.0;
  double absolute = 0.0;
  bool regular = true;
};

/// Defect of the stationary coupled equation P_i = A'SA + sigma2 B'SB + Q - M'Upsilon^+ M.
GareResidual gare_residual(const MjlsModel& model, const CostWeights& weights,
                           const ModeMatrices& P);

struct StationarySolution {
  ModeMatrices P;
  ModeMatrices X;
  ModeMatrices F;
  ModeMatrices Upsilon;
  ModeMatrices M;
  ModeMatrices Ptilde;
  int iterations = 0;
  double residual = 0.0;       // relative GARE defect
  double gain_mismatch = 0.0;  // max_i ||F_i - Ft_i||_inf
  bool x_positive_definite = false;
  bool monotone = true;
};

class InconsistentSolution : public std::runtime_error {
 public:
  InconsistentSolution(const std::string& what, double residual, double gain_mismatch);
  double residual() const { return residual_; }
  double gain_mismatch() const { return gain_mismatch_; }

 private:
  double residual_;
  double gain_mismatch_;
};

inline constexpr double kGareResidualTolerance = 1e-8;
inline constexpr double kGainMismatchTolerance = 1e-7;

/// Maximal solution of the stationary coupled Riccati equation built from a
/// set-S element Ptilde: P = X + Ptilde with X from solve_ngare, gains
/// F_i = -Upsilon_i^+ M_i evaluated at P. Membership of Ptilde is the caller's
/// responsibility (see analysis::check_set_S).
StationarySolution solve_gare(const MjlsModel& model, const CostWeights& weights,
                              const ModeMatrices& Ptilde, const NgareOptions& options = {});

/// sum_i pi0_i trace(P_i E[x0 x0']).
double stationary_cost(const ModeMatrices& P, const InitialState& init, const Vector& pi0);

}  // namespace mjls::riccati
