#include "mjls/numlin.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mjls::numlin {

NotSymmetric::NotSymmetric(double defect)
    : std::invalid_argument(fmt::format("matrix not symmetric (defect {:.3g})", defect)),
      defect_(defect) {}

NotPositiveSemidefinite::NotPositiveSemidefinite(double min_eigenvalue)
    : std::invalid_argument(
          fmt::format("matrix is indefinite (min eigenvalue {:.12g})", min_eigenvalue)),
      min_eigenvalue_(min_eigenvalue) {}

PowerIterationFailed::PowerIterationFailed(double previous, double last, int iterations)
    : std::runtime_error(fmt::format(
          "power iteration did not converge after {} iterations (last estimates {:.12g}, {:.12g})",
          iterations, previous, last)),
      previous_(previous),
      last_(last) {}

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

void require_symmetric(const Matrix& S) {
  if (S.rows() != S.cols()) throw NotSymmetric(std::numeric_limits<double>::infinity());
  if (S.size() == 0) return;
  const double defect = asymmetry(S);
  if (defect > kInputSymmetryTolerance * std::max(1.0, max_abs(S))) throw NotSymmetric(defect);
}

SymEig sym_eig(const Matrix& S) {
  require_symmetric(S);
  SymEig out;
  if (S.size() == 0) {
    out.eigenvalues = Vector(0);
    out.eigenvectors = Matrix(0, 0);
    return out;
  }
  // Only the lower triangle is read; symmetrize so round-off asymmetry does not bias it.
  const Matrix sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  // Eigen returns ascending order.
  out.eigenvalues = eig.eigenvalues().reverse();
  out.eigenvectors = eig.eigenvectors().rowwise().reverse();
  return out;
}

Matrix pinv_sym(const Matrix& S, double tol) {
  const SymEig eig = sym_eig(S);
  const Eigen::Index p = S.rows();
  if (p == 0) return Matrix(0, 0);
  const double largest = eig.eigenvalues.cwiseAbs().maxCoeff();
  const double cutoff = tol * std::max(1.0, largest);
  Vector inv = Vector::Zero(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double lambda = eig.eigenvalues(i);
    if (std::abs(lambda) > cutoff) inv(i) = 1.0 / lambda;
  }
  const Matrix& V = eig.eigenvectors;
  Matrix out = V * inv.asDiagonal() * V.transpose();
  return 0.5 * (out + out.transpose());
}

std::string to_string(Definiteness d) {
  switch (d) {
    case Definiteness::positive_definite:
      return "positive_definite";
    case Definiteness::positive_semidefinite:
      return "positive_semidefinite";
    case Definiteness::indefinite:
      return "indefinite";
  }
  return "unknown";
}

double min_eigenvalue(const Matrix& S) {
  if (S.size() == 0) return 0.0;
  return sym_eig(S).eigenvalues.minCoeff();
}

double default_psd_tolerance(const Matrix& S) {
  if (S.size() == 0) return 1e-9;
  // ||S||_2 for symmetric S is its largest |eigenvalue|; bound it by the
  // Frobenius norm, which is cheap and never smaller.
  return 1e-9 * std::max(1.0, S.norm());
}

Definiteness psd_check(const Matrix& S, std::optional<double> tol) {
  const double t = tol.value_or(default_psd_tolerance(S));
  if (S.size() == 0) return Definiteness::positive_definite;
  const double lo = min_eigenvalue(S);
  if (lo > t) return Definiteness::positive_definite;
  if (lo > -t) return Definiteness::positive_semidefinite;
  return Definiteness::indefinite;
}

Matrix kernel_basis(const Matrix& S, std::optional<double> tol) {
  const double t = tol.value_or(default_psd_tolerance(S));
  const SymEig eig = sym_eig(S);
  std::vector<Eigen::Index> picked;
  for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
    if (std::abs(eig.eigenvalues(i)) <= t) picked.push_back(i);
  }
  Matrix basis(S.rows(), static_cast<Eigen::Index>(picked.size()));
  for (std::size_t c = 0; c < picked.size(); ++c) {
    basis.col(static_cast<Eigen::Index>(c)) = eig.eigenvectors.col(picked[c]);
  }
  return basis;
}

Matrix sqrt_psd(const Matrix& S, std::optional<double> tol) {
  const double t = tol.value_or(default_psd_tolerance(S));
  const SymEig eig = sym_eig(S);
  if (S.size() == 0) return Matrix(0, 0);
  Vector root(eig.eigenvalues.size());
  for (Eigen::Index i = 0; i < root.size(); ++i) {
    const double lambda = eig.eigenvalues(i);
    if (lambda < -t) throw NotPositiveSemidefinite(eig.eigenvalues.minCoeff());
    root(i) = lambda > 0.0 ? std::sqrt(lambda) : 0.0;
  }
  const Matrix& V = eig.eigenvectors;
  Matrix out = V * root.asDiagonal() * V.transpose();
  return 0.5 * (out + out.transpose());
}

namespace {

Vector flatten(const ModeMatrices& tuple, int dim) {
  const Eigen::Index block = static_cast<Eigen::Index>(dim) * dim;
  Vector v(block * static_cast<Eigen::Index>(tuple.size()));
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    v.segment(static_cast<Eigen::Index>(i) * block, block) =
        Eigen::Map<const Vector>(tuple[i].data(), block);
  }
  return v;
}

ModeMatrices unflatten(const Vector& v, int modes, int dim) {
  const Eigen::Index block = static_cast<Eigen::Index>(dim) * dim;
  ModeMatrices out(static_cast<std::size_t>(modes));
  for (int i = 0; i < modes; ++i) {
    out[static_cast<std::size_t>(i)] = Eigen::Map<const Matrix>(v.data() + i * block, dim, dim);
  }
  return out;
}

}  // namespace

Matrix tuple_operator_matrix(const TupleMap& apply, int modes, int dim) {
  const Eigen::Index size = static_cast<Eigen::Index>(modes) * dim * dim;
  Matrix op(size, size);
  Vector unit = Vector::Zero(size);
  for (Eigen::Index c = 0; c < size; ++c) {
    unit(c) = 1.0;
    op.col(c) = flatten(apply(unflatten(unit, modes, dim)), dim);
    unit(c) = 0.0;
  }
  return op;
}

double tuple_operator_spectral_radius_power(const TupleMap& apply, int modes, int dim,
                                            double tol, int max_iterations) {
  const Eigen::Index size = static_cast<Eigen::Index>(modes) * dim * dim;
  if (size == 0) return 0.0;
  // Start from the identity tuple (interior of the PSD cone) with a fixed
  // generic perturbation so non-positive maps still see every direction.
  ModeMatrices start(static_cast<std::size_t>(modes), Matrix::Identity(dim, dim));
  Vector v = flatten(start, dim);
  for (Eigen::Index i = 0; i < size; ++i) v(i) += 0.1 * std::sin(1.0 + 0.7 * static_cast<double>(i));
  v.normalize();

  double previous = 0.0;
  double estimate = 0.0;
  for (int it = 1; it <= max_iterations; ++it) {
    Vector w = flatten(apply(unflatten(v, modes, dim)), dim);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    previous = estimate;
    estimate = norm;
    v = w / norm;
    if (it > 1 && std::abs(estimate - previous) <= tol * std::max(1.0, estimate)) {
      return estimate;
    }
  }
  throw PowerIterationFailed(previous, estimate, max_iterations);
}

double tuple_operator_spectral_radius(const TupleMap& apply, int modes, int dim,
                                      const SpectralRadiusOptions& options) {
  const long size = static_cast<long>(modes) * dim * dim;
  if (size == 0) return 0.0;
  if (size <= options.dense_limit) {
    const Matrix op = tuple_operator_matrix(apply, modes, dim);
    Eigen::EigenSolver<Matrix> eig(op, /*computeEigenvectors=*/false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
  }
  return tuple_operator_spectral_radius_power(apply, modes, dim, options.power_tolerance,
                                              options.power_max_iterations);
}

}  // namespace mjls::numlin
