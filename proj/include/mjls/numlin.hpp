#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "mjls/model.hpp"

namespace mjls::numlin {

/// Symmetric eigen-decomposition with eigenvalues sorted descending.
struct SymEig {
  Vector eigenvalues;
  Matrix eigenvectors;
};

inline constexpr double kPinvTolerance = 1e-10;
inline constexpr double kInputSymmetryTolerance = 1e-10;

class NotSymmetric : public std::invalid_argument {
 public:
  explicit NotSymmetric(double defect);
  double defect() const { return defect_; }

 private:
  double defect_;
};

class NotPositiveSemidefinite : public std::invalid_argument {
 public:
  explicit NotPositiveSemidefinite(double min_eigenvalue);
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// Throws NotSymmetric unless ||S - S'||_inf <= kInputSymmetryTolerance * max(1, ||S||_inf).
void require_symmetric(const Matrix& S);

SymEig sym_eig(const Matrix& S);

double max_abs(const Matrix& m);

/// Moore-Penrose pseudo-inverse of a symmetric matrix via its eigen-decomposition.
/// Eigenvalues with |lambda| <= tol * max(1, |lambda|_max) are treated as zero.
Matrix pinv_sym(const Matrix& S, double tol = kPinvTolerance);

enum class Definiteness { positive_definite, positive_semidefinite, indefinite };

std::string to_string(Definiteness d);

/// Default absolute tolerance used by psd_check: 1e-9 * max(1, ||S||_2).
double default_psd_tolerance(const Matrix& S);

/// Classification by the smallest eigenvalue: PD if > tol, PSD if > -tol.
Definiteness psd_check(const Matrix& S, std::optional<double> tol = std::nullopt);

inline bool is_psd(const Matrix& S, std::optional<double> tol = std::nullopt) {
  return psd_check(S, tol) != Definiteness::indefinite;
}

double min_eigenvalue(const Matrix& S);

/// Orthonormal basis (as columns) of the eigenspace with |lambda| <= tol.
/// Zero columns means the kernel is trivial. Default tol as psd_check.
Matrix kernel_basis(const Matrix& S, std::optional<double> tol = std::nullopt);

/// Symmetric PSD square root. Eigenvalues in [-tol, 0) are clamped to zero;
/// anything more negative throws NotPositiveSemidefinite.
Matrix sqrt_psd(const Matrix& S, std::optional<double> tol = std::nullopt);

/// A linear map acting on L-tuples of n x n matrices.
using TupleMap = std::function<ModeMatrices(const ModeMatrices&)>;

struct SpectralRadiusOptions {
  /// Dense eigen-solve is used while L*n*n does not exceed this.
  int dense_limit = 400;
  double power_tolerance = 1e-10;
  int power_max_iterations = 100000;
};

class PowerIterationFailed : public std::runtime_error {
 public:
  PowerIterationFailed(double previous, double last, int iterations);
  double previous_estimate() const { return previous_; }
  double last_estimate() const { return last_; }

 private:
  double previous_;
  double last_;
};

/// Matrix of the linear map in the basis of elementary tuples, column-major
/// vectorization of each mode stacked in mode order: size (L n^2) x (L n^2).
Matrix tuple_operator_matrix(const TupleMap& apply, int modes, int dim);

/// Spectral radius of a linear map on L-tuples of n x n matrices. Exact dense
/// eigenvalues at desk scale, power iteration on the map itself otherwise.
double tuple_operator_spectral_radius(const TupleMap& apply, int modes, int dim,
                                      const SpectralRadiusOptions& options = {});

/// Power iteration path alone; exposed so both paths can be cross-checked.
double tuple_operator_spectral_radius_power(const TupleMap& apply, int modes, int dim,
                                            double tol = 1e-10, int max_iterations = 100000);

}  // namespace mjls::numlin
