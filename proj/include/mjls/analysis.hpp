#pragma once

#include <optional>
#include <vector>

#include "mjls/model.hpp"
#include "mjls/riccati.hpp"

namespace mjls::analysis {

struct ModeMembership {
  double block_min_eigenvalue = 0.0;
  double block_tolerance = 0.0;
  bool block_psd = false;
  /// ||C_i V||_inf and ||D_i V||_inf for the kernel basis V of Rt_i.
  double kernel_defect_C = 0.0;
  double kernel_defect_D = 0.0;
  double kernel_tolerance = 0.0;
  bool kernel_ok = false;
  int kernel_dim = 0;

  bool member() const { return block_psd && kernel_ok; }
};

struct SetSReport {
  bool member = false;
  std::vector<ModeMembership> modes;
  std::vector<ModeIndex> failing;
  riccati::ShiftedWeights weights;
};

struct SetSTolerances {
  /// Block PSD slack: psd_scale * max(1, ||block||_2).
  double psd_scale = 1e-9;
  /// Kernel inclusion slack: kernel_scale * max(1, ||C_i||, ||D_i||).
  double kernel_scale = 1e-8;
};

/// Tests whether Ptilde belongs to the set S: per mode, the block
/// [[Qt_i, Lt_i'], [Lt_i, Rt_i]] is PSD and Ker(Rt_i) lies in Ker C_i and Ker D_i.
SetSReport check_set_S(const MjlsModel& model, const CostWeights& weights,
                       const ModeMatrices& Ptilde, const SetSTolerances& tol = {});

/// Defects of the three consequences of a PSD shifted block:
/// Rt >= 0, Qt - Lt' Rt^+ Lt >= 0, Lt'(I - Rt Rt^+) = 0.
struct ShiftedConsequences {
  double rt_min_eigenvalue = 0.0;
  double schur_min_eigenvalue = 0.0;
  double range_defect = 0.0;
};

ShiftedConsequences shifted_consequences(const riccati::ShiftedWeights& sw, std::size_t position);

/// Extended Schur lemma, condition (i): M - N R^+ N' >= 0, R >= 0, N(I - R R^+) = 0.
bool schur_condition(const Matrix& M, const Matrix& N, const Matrix& R, double tol);
/// Condition (ii): [[M, N], [N', R]] >= 0.
bool schur_block_condition(const Matrix& M, const Matrix& N, const Matrix& R, double tol);

struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  double step = 1.0;

  /// Number of points lo, lo+step, ... not exceeding hi (0 when hi < lo).
  std::size_t count() const;
  double at(std::size_t index) const;
};

struct RegionPoint {
  std::vector<double> ptilde;
  bool member = false;
};

class UnsupportedOperation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluates check_set_S on a row-major grid of scalar Ptilde values (one
/// axis per mode, last axis fastest). Requires n = 1 and L <= 3.
std::vector<RegionPoint> region_scan(const MjlsModel& model, const CostWeights& weights,
                                     const std::vector<GridAxis>& axes,
                                     const SetSTolerances& tol = {});

struct ObservabilityReport {
  bool observable = false;
  int horizon = 0;
  /// Smallest horizon t <= horizon at which every G_i(t) is PD, if any.
  std::optional<int> first_observable_horizon;
  ModeMatrices gramians;  // G_i(horizon)
  std::vector<double> min_eigenvalues;
  double tolerance = 0.0;
};

/// Exact observability of (A, B, Qsqrt) through mode-conditioned Gramians
///   G_i(0) = Qt_i,
///   G_i(t+1) = Qt_i + A_i' (sum_j rho_ij G_j(t)) A_i + sigma2 B_i' (sum_j rho_ij G_j(t)) B_i,
/// with Qt_i = Qsqrt_i^2, so x0' G_i(T) x0 = E[sum_{k<=T} |y(k)|^2 | x0, theta(0) = i].
/// Observable iff every G_i(T) is positive definite. Default T = n L.
ObservabilityReport exact_observability(const MjlsModel& model, const ModeMatrices& Qsqrt,
                                        std::optional<int> horizon = std::nullopt,
                                        std::optional<double> tol = std::nullopt);

struct StabilityCertificate {
  double spectral_radius = 0.0;
  bool stable = false;
  double margin = 1e-9;
  ModeMatrices closed_A;  // A_i + C_i F_i
  ModeMatrices closed_B;  // B_i + D_i F_i
};

/// Second-moment map of the closed loop x(k+1) = (Abar_i + w Bbar_i) x(k):
///   Z'_j = sum_i rho_ij (Abar_i Z_i Abar_i' + sigma2 Bbar_i Z_i Bbar_i').
ModeMatrices second_moment_map(const MjlsModel& model, const ModeMatrices& closed_A,
                               const ModeMatrices& closed_B, const ModeMatrices& Z);

/// Mean-square stability of u = F_theta x via the spectral radius of the
/// second-moment map. stable iff radius < 1 - margin.
StabilityCertificate ms_stability(const MjlsModel& model, const ModeMatrices& F,
                                  double margin = 1e-9);

struct MaximalityReport {
  bool holds = false;
  /// Most negative eigenvalue of P_i - Ptilde_i over all candidates/modes.
  double worst_eigenvalue = 0.0;
  std::size_t worst_candidate = 0;
  std::optional<ModeIndex> worst_mode;
};

MaximalityReport maximality_check(const ModeMatrices& P, const std::vector<ModeMatrices>& candidates,
                                  double tol = 1e-8);

}  // namespace mjls::analysis
