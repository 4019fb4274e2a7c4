#include "mjls/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "mjls/numlin.hpp"

namespace mjls::analysis {

namespace {

double spectral_norm_sym(const numlin::SymEig& eig) {
  return eig.eigenvalues.size() == 0 ? 0.0 : eig.eigenvalues.cwiseAbs().maxCoeff();
}

}  // namespace

SetSReport check_set_S(const MjlsModel& model, const CostWeights& weights,
                       const ModeMatrices& Ptilde, const SetSTolerances& tol) {
  SetSReport report;
  report.weights = riccati::shifted_weights(model, weights, Ptilde);
  const auto& sw = report.weights;
  report.member = true;
  for (std::size_t i = 0; i < static_cast<std::size_t>(model.modes); ++i) {
    ModeMembership mode;
    const Matrix block = sw.block(i);
    const numlin::SymEig eig = numlin::sym_eig(0.5 * (block + block.transpose()));
    mode.block_min_eigenvalue = eig.eigenvalues.minCoeff();
    mode.block_tolerance = tol.psd_scale * std::max(1.0, spectral_norm_sym(eig));
    mode.block_psd = mode.block_min_eigenvalue >= -mode.block_tolerance;

    const Matrix V = numlin::kernel_basis(sw.Rt[i]);
    mode.kernel_dim = static_cast<int>(V.cols());
    mode.kernel_tolerance =
        tol.kernel_scale *
        std::max({1.0, numlin::max_abs(model.C[i]), numlin::max_abs(model.D[i])});
    if (V.cols() > 0) {
      mode.kernel_defect_C = numlin::max_abs(model.C[i] * V);
      mode.kernel_defect_D = numlin::max_abs(model.D[i] * V);
    }
    mode.kernel_ok = mode.kernel_defect_C <= mode.kernel_tolerance &&
                     mode.kernel_defect_D <= mode.kernel_tolerance;
    if (!mode.member()) {
      report.member = false;
      report.failing.push_back(ModeIndex::from_position(i));
    }
    report.modes.push_back(mode);
  }
  return report;
}

ShiftedConsequences shifted_consequences(const riccati::ShiftedWeights& sw, std::size_t position) {
  const Matrix& Qt = sw.Qt.at(position);
  const Matrix& Lt = sw.Lt.at(position);
  const Matrix& Rt = sw.Rt.at(position);
  const Matrix Rt_pinv = numlin::pinv_sym(Rt);
  ShiftedConsequences out;
  out.rt_min_eigenvalue = numlin::min_eigenvalue(Rt);
  const Matrix schur = Qt - Lt.transpose() * Rt_pinv * Lt;
  out.schur_min_eigenvalue = numlin::min_eigenvalue(0.5 * (schur + schur.transpose()));
  const Matrix I = Matrix::Identity(Rt.rows(), Rt.cols());
  out.range_defect = numlin::max_abs(Lt.transpose() * (I - Rt * Rt_pinv));
  return out;
}

bool schur_condition(const Matrix& M, const Matrix& N, const Matrix& R, double tol) {
  if (numlin::min_eigenvalue(R) < -tol) return false;
  const Matrix R_pinv = numlin::pinv_sym(R);
  const Matrix I = Matrix::Identity(R.rows(), R.cols());
  if (numlin::max_abs(N * (I - R * R_pinv)) > tol) return false;
  const Matrix schur = M - N * R_pinv * N.transpose();
  return numlin::min_eigenvalue(0.5 * (schur + schur.transpose())) >= -tol;
}

bool schur_block_condition(const Matrix& M, const Matrix& N, const Matrix& R, double tol) {
  const Eigen::Index p = M.rows();
  const Eigen::Index q = R.rows();
  Matrix block(p + q, p + q);
  block << M, N, N.transpose(), R;
  return numlin::min_eigenvalue(0.5 * (block + block.transpose())) >= -tol;
}

std::size_t GridAxis::count() const {
  if (!(step > 0.0) || hi < lo) return 0;
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

double GridAxis::at(std::size_t index) const { return lo + static_cast<double>(index) * step; }

std::vector<RegionPoint> region_scan(const MjlsModel& model, const CostWeights& weights,
                                     const std::vector<GridAxis>& axes,
                                     const SetSTolerances& tol) {
  if (model.state_dim != 1) {
    throw UnsupportedOperation(
        fmt::format("region scan needs a scalar state, got state_dim = {}", model.state_dim));
  }
  if (model.modes > 3) {
    throw UnsupportedOperation(
        fmt::format("region scan supports at most 3 modes, got {}", model.modes));
  }
  if (static_cast<int>(axes.size()) != model.modes) {
    throw std::invalid_argument(
        fmt::format("region scan needs one axis per mode ({}), got {}", model.modes, axes.size()));
  }

  std::size_t total = 1;
  for (const auto& axis : axes) total *= axis.count();
  std::vector<RegionPoint> points;
  points.reserve(total);

  std::vector<std::size_t> index(axes.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    for (std::size_t a = axes.size(); a-- > 0;) {
      index[a] = rest % axes[a].count();
      rest /= axes[a].count();
    }
    RegionPoint point;
    ModeMatrices Ptilde;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double value = axes[a].at(index[a]);
      point.ptilde.push_back(value);
      Ptilde.push_back(Matrix::Constant(1, 1, value));
    }
    point.member = check_set_S(model, weights, Ptilde, tol).member;
    points.push_back(std::move(point));
  }
  return points;
}

ObservabilityReport exact_observability(const MjlsModel& model, const ModeMatrices& Qsqrt,
                                        std::optional<int> horizon, std::optional<double> tol) {
  const auto L = static_cast<std::size_t>(model.modes);
  if (Qsqrt.size() != L) {
    throw std::invalid_argument("Qsqrt needs one matrix per mode");
  }
  ObservabilityReport report;
  report.horizon = horizon.value_or(model.state_dim * model.modes);
  if (report.horizon < 0) throw std::invalid_argument("observability horizon must be >= 0");

  ModeMatrices Qt;
  for (const auto& root : Qsqrt) {
    numlin::require_symmetric(root);
    Qt.push_back(root * root);
  }

  auto all_pd = [&](const ModeMatrices& G) {
    return std::all_of(G.begin(), G.end(), [&](const Matrix& g) {
      return numlin::psd_check(g, tol) == numlin::Definiteness::positive_definite;
    });
  };

  ModeMatrices G = Qt;
  if (all_pd(G)) report.first_observable_horizon = 0;
  for (int t = 1; t <= report.horizon; ++t) {
    ModeMatrices next(L);
    for (std::size_t i = 0; i < L; ++i) {
      const Matrix S = model.expected_next(G, i);
      const Matrix g = Qt[i] + model.A[i].transpose() * S * model.A[i] +
                       model.sigma2 * model.B[i].transpose() * S * model.B[i];
      next[i] = 0.5 * (g + g.transpose());
    }
    G = std::move(next);
    if (!report.first_observable_horizon && all_pd(G)) report.first_observable_horizon = t;
  }

  report.observable = true;
  report.tolerance = 0.0;
  for (const auto& g : G) {
    const double t = tol.value_or(numlin::default_psd_tolerance(g));
    report.tolerance = std::max(report.tolerance, t);
    const double lo = numlin::min_eigenvalue(g);
    report.min_eigenvalues.push_back(lo);
    if (!(lo > t)) report.observable = false;
  }
  report.gramians = std::move(G);
  return report;
}

ModeMatrices second_moment_map(const MjlsModel& model, const ModeMatrices& closed_A,
                               const ModeMatrices& closed_B, const ModeMatrices& Z) {
  const auto L = static_cast<std::size_t>(model.modes);
  ModeMatrices contribution(L);
  for (std::size_t i = 0; i < L; ++i) {
    contribution[i] = closed_A[i] * Z[i] * closed_A[i].transpose() +
                      model.sigma2 * closed_B[i] * Z[i] * closed_B[i].transpose();
  }
  ModeMatrices out(L, Matrix::Zero(Z.front().rows(), Z.front().cols()));
  for (std::size_t j = 0; j < L; ++j) {
    for (std::size_t i = 0; i < L; ++i) {
      out[j] += model.rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                contribution[i];
    }
  }
  return out;
}

StabilityCertificate ms_stability(const MjlsModel& model, const ModeMatrices& F, double margin) {
  const auto L = static_cast<std::size_t>(model.modes);
  if (F.size() != L) throw std::invalid_argument("one gain per mode is required");
  StabilityCertificate cert;
  cert.margin = margin;
  for (std::size_t i = 0; i < L; ++i) {
    if (F[i].rows() != model.input_dim || F[i].cols() != model.state_dim) {
      throw std::invalid_argument(fmt::format("F_{} is {}x{}, expected {}x{}", i + 1,
                                              F[i].rows(), F[i].cols(), model.input_dim,
                                              model.state_dim));
    }
    cert.closed_A.push_back(model.A[i] + model.C[i] * F[i]);
    cert.closed_B.push_back(model.B[i] + model.D[i] * F[i]);
  }
  const numlin::TupleMap map = [&](const ModeMatrices& Z) {
    return second_moment_map(model, cert.closed_A, cert.closed_B, Z);
  };
  cert.spectral_radius = numlin::tuple_operator_spectral_radius(map, model.modes, model.state_dim);
  cert.stable = cert.spectral_radius < 1.0 - margin;
  return cert;
}

MaximalityReport maximality_check(const ModeMatrices& P, const std::vector<ModeMatrices>& candidates,
                                  double tol) {
  MaximalityReport report;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& candidate = candidates[c];
    if (candidate.size() != P.size()) {
      throw std::invalid_argument("candidate has the wrong number of modes");
    }
    for (std::size_t i = 0; i < P.size(); ++i) {
      const Matrix gap = P[i] - candidate[i];
      const double lo = numlin::min_eigenvalue(0.5 * (gap + gap.transpose()));
      if (lo < worst) {
        worst = lo;
        report.worst_candidate = c;
        report.worst_mode = ModeIndex::from_position(i);
      }
    }
  }
  report.worst_eigenvalue = candidates.empty() ? 0.0 : worst;
  report.holds = report.worst_eigenvalue >= -tol;
  return report;
}

}  // namespace mjls::analysis
