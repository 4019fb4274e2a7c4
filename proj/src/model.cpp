#include "mjls/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <fmt/format.h>

namespace mjls {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian:
      return "gaussian";
    case NoiseKind::rademacher:
      return "rademacher";
  }
  return "unknown";
}

std::optional<NoiseKind> parse_noise_kind(const std::string& text) {
  if (text == "gaussian") return NoiseKind::gaussian;
  if (text == "rademacher") return NoiseKind::rademacher;
  return std::nullopt;
}

Matrix MjlsModel::expected_next(const ModeMatrices& P, std::size_t position) const {
  Matrix S = Matrix::Zero(P.front().rows(), P.front().cols());
  for (std::size_t j = 0; j < P.size(); ++j) {
    S += rho(static_cast<Eigen::Index>(position), static_cast<Eigen::Index>(j)) * P[j];
  }
  return S;
}

InitialState InitialState::deterministic(Vector x0) {
  InitialState s;
  s.second_moment_ = x0 * x0.transpose();
  s.point_ = std::move(x0);
  return s;
}

InitialState InitialState::from_second_moment(Matrix second_moment) {
  InitialState s;
  s.second_moment_ = std::move(second_moment);
  return s;
}

std::string ValidationReport::to_string() const {
  std::string out;
  for (const auto& issue : issues) {
    if (!out.empty()) out += '\n';
    out += issue;
  }
  return out;
}

InvalidModel::InvalidModel(const ValidationReport& report)
    : std::invalid_argument("invalid model:\n" + report.to_string()), report_(report) {}

double asymmetry(const Matrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

namespace {

void check_family(ValidationReport& report, const ModeMatrices& family, const char* name,
                  int modes, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<int>(family.size()) != modes) {
    report.issues.push_back(
        fmt::format("{} has {} mode entries, expected {}", name, family.size(), modes));
    return;
  }
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto& m = family[i];
    if (m.rows() != rows || m.cols() != cols) {
      report.issues.push_back(fmt::format("{}_{} is {}x{}, expected {}x{}", name, i + 1,
                                          m.rows(), m.cols(), rows, cols));
    } else if (!m.allFinite()) {
      report.issues.push_back(fmt::format("{}_{} has non-finite entries", name, i + 1));
    }
  }
}

void check_symmetric(ValidationReport& report, const ModeMatrices& family, const char* name) {
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto& m = family[i];
    if (m.rows() != m.cols() || m.size() == 0) continue;
    const double defect = asymmetry(m);
    if (defect > kSymmetryTolerance) {
      report.issues.push_back(
          fmt::format("{}_{} not symmetric (defect {:.3g})", name, i + 1, defect));
    }
  }
}

}  // namespace

ValidationReport validate_model(const MjlsModel& model, const CostWeights& weights) {
  ValidationReport report;
  const int L = model.modes;
  const int n = model.state_dim;
  const int m = model.input_dim;
  if (L < 1) report.issues.push_back(fmt::format("modes must be >= 1, got {}", L));
  if (n < 1) report.issues.push_back(fmt::format("state_dim must be >= 1, got {}", n));
  if (m < 1) report.issues.push_back(fmt::format("input_dim must be >= 1, got {}", m));
  if (!report.ok()) return report;

  check_family(report, model.A, "A", L, n, n);
  check_family(report, model.B, "B", L, n, n);
  check_family(report, model.C, "C", L, n, m);
  check_family(report, model.D, "D", L, n, m);
  check_family(report, weights.Q, "Q", L, n, n);
  check_family(report, weights.R, "R", L, m, m);
  check_family(report, weights.terminal_P, "terminal_P", L, n, n);

  if (!(model.sigma2 >= 0.0) || !std::isfinite(model.sigma2)) {
    report.issues.push_back(fmt::format("sigma2 must be finite and >= 0, got {}", model.sigma2));
  }

  if (model.rho.rows() != L || model.rho.cols() != L) {
    report.issues.push_back(
        fmt::format("rho is {}x{}, expected {}x{}", model.rho.rows(), model.rho.cols(), L, L));
  } else {
    for (int i = 0; i < L; ++i) {
      for (int j = 0; j < L; ++j) {
        const double p = model.rho(i, j);
        if (!(p >= 0.0 && p <= 1.0)) {
          report.issues.push_back(
              fmt::format("rho({},{}) = {} outside [0,1]", i + 1, j + 1, p));
        }
      }
      const double row_sum = model.rho.row(i).sum();
      if (!(std::abs(row_sum - 1.0) <= kStochasticTolerance)) {
        report.issues.push_back(fmt::format("rho row {} sums to {:.12g}", i + 1, row_sum));
      }
    }
  }

  if (model.pi0.size() != L) {
    report.issues.push_back(fmt::format("pi0 has {} entries, expected {}", model.pi0.size(), L));
  } else {
    for (int i = 0; i < L; ++i) {
      const double p = model.pi0(i);
      if (!(p >= 0.0 && p <= 1.0)) {
        report.issues.push_back(fmt::format("pi0({}) = {} outside [0,1]", i + 1, p));
      }
    }
    const double total = model.pi0.sum();
    if (!(std::abs(total - 1.0) <= kStochasticTolerance)) {
      report.issues.push_back(fmt::format("pi0 sums to {:.12g}", total));
    }
  }

  check_symmetric(report, weights.Q, "Q");
  check_symmetric(report, weights.R, "R");
  check_symmetric(report, weights.terminal_P, "terminal_P");
  return report;
}

ValidationReport validate_initial_state(const InitialState& init, int state_dim) {
  ValidationReport report;
  const Matrix& X0 = init.second_moment();
  if (X0.rows() != state_dim || X0.cols() != state_dim) {
    report.issues.push_back(
        fmt::format("initial state has dimension {}, expected {}", X0.rows(), state_dim));
    return report;
  }
  if (!init.is_deterministic()) {
    const double scale = std::max(1.0, X0.cwiseAbs().maxCoeff());
    if (asymmetry(X0) > 1e-12 * scale) {
      report.issues.push_back("x0 second moment not symmetric");
    } else {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(X0, Eigen::EigenvaluesOnly);
      const double lo = eig.eigenvalues().minCoeff();
      if (lo < -1e-9 * scale) {
        report.issues.push_back(
            fmt::format("x0 second moment not PSD (min eigenvalue {:.6g})", lo));
      }
    }
  }
  return report;
}

void require_valid(const MjlsModel& model, const CostWeights& weights) {
  auto report = validate_model(model, weights);
  if (!report.ok()) throw InvalidModel(report);
}

int symmetrize_weights(CostWeights& weights) {
  int changed = 0;
  for (ModeMatrices* family : {&weights.Q, &weights.R, &weights.terminal_P}) {
    for (auto& m : *family) {
      if (m.rows() != m.cols()) continue;
      const double defect = asymmetry(m);
      if (defect > 0.0 && defect < kSymmetrizeLimit) {
        m = 0.5 * (m + m.transpose()).eval();
        ++changed;
      }
    }
  }
  return changed;
}

}  // namespace mjls
