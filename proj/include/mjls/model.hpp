#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mjls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One matrix per Markov mode. Position i holds the data of mode i+1.
using ModeMatrices = std::vector<Eigen::MatrixXd>;

/// 1-based Markov mode label, as used in every report and file.
class ModeIndex {
 public:
  constexpr explicit ModeIndex(int value) : value_(value) {}

  static constexpr ModeIndex from_position(std::size_t position) {
    return ModeIndex(static_cast<int>(position) + 1);
  }

  constexpr int value() const { return value_; }
  constexpr std::size_t position() const {
    return static_cast<std::size_t>(value_ - 1);
  }

  constexpr bool valid_for(int mode_count) const {
    return value_ >= 1 && value_ <= mode_count;
  }

  friend constexpr auto operator<=>(ModeIndex, ModeIndex) = default;

 private:
  int value_;
};

enum class NoiseKind { gaussian, rademacher };

std::string to_string(NoiseKind kind);
std::optional<NoiseKind> parse_noise_kind(const std::string& text);

/// Markov jump linear system with scalar multiplicative noise:
///
///   x(k+1) = (A_i + B_i w(k)) x(k) + (C_i + D_i w(k)) u(k),  i = theta(k)
///
/// where w(k) is white with zero mean and variance sigma2, and theta is a
/// Markov chain with transition matrix rho and initial law pi0. A and B are
/// n x n, C and D are n x m.
struct MjlsModel {
  int modes = 0;
  int state_dim = 0;
  int input_dim = 0;
  ModeMatrices A;
  ModeMatrices B;
  ModeMatrices C;
  ModeMatrices D;
  double sigma2 = 0.0;
  NoiseKind noise_kind = NoiseKind::gaussian;
  Matrix rho;
  Vector pi0;

  /// sum_j rho(i, j) * P_j for the mode at `position`.
  Matrix expected_next(const ModeMatrices& P, std::size_t position) const;
};

/// Quadratic weights; Q and R may be indefinite.
struct CostWeights {
  ModeMatrices Q;
  ModeMatrices R;
  ModeMatrices terminal_P;
};

/// Initial state, either deterministic or described by its second moment.
class InitialState {
 public:
  static InitialState deterministic(Vector x0);
  static InitialState from_second_moment(Matrix second_moment);

  /// E[x0 x0'].
  const Matrix& second_moment() const { return second_moment_; }
  const std::optional<Vector>& point() const { return point_; }
  bool is_deterministic() const { return point_.has_value(); }
  int dim() const { return static_cast<int>(second_moment_.rows()); }

 private:
  InitialState() = default;
  std::optional<Vector> point_;
  Matrix second_moment_;
};

struct ValidationReport {
  std::vector<std::string> issues;

  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

class InvalidModel : public std::invalid_argument {
 public:
  explicit InvalidModel(const ValidationReport& report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

inline constexpr double kStochasticTolerance = 1e-12;
inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kSymmetrizeLimit = 1e-8;

/// Checks every structural invariant of the problem data and reports each
/// violation with its 1-based mode/row index. Never throws.
ValidationReport validate_model(const MjlsModel& model, const CostWeights& weights);

ValidationReport validate_initial_state(const InitialState& init, int state_dim);

/// Throws InvalidModel when validate_model reports anything.
void require_valid(const MjlsModel& model, const CostWeights& weights);

/// Replaces each weight matrix by (M + M')/2 when its asymmetry is below
/// kSymmetrizeLimit. Larger defects are left alone for validation to reject.
/// Returns the number of matrices that were modified.
int symmetrize_weights(CostWeights& weights);

/// Infinity norm of M - M'.
double asymmetry(const Matrix& m);

}  // namespace mjls
