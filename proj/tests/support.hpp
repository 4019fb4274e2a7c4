#pragma once

#include <cmath>
#include <random>

#include "mjls/model.hpp"

namespace mjls::testing {

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

inline ModeMatrices scalars(std::initializer_list<double> values) {
  ModeMatrices out;
  for (double v : values) out.push_back(scalar(v));
  return out;
}

/// Two-mode scalar example with an indefinite state weight in mode 1 and a
/// negative control weight.
inline MjlsModel example_model() {
  MjlsModel m;
  m.modes = 2;
  m.state_dim = 1;
  m.input_dim = 1;
  m.A = scalars({0.5, 0.25});
  m.B = scalars({-0.5, -0.25});
  m.C = scalars({0.5, 0.25});
  m.D = scalars({-0.5, -0.25});
  m.sigma2 = 1.0;
  m.noise_kind = NoiseKind::gaussian;
  m.rho.resize(2, 2);
  m.rho << 0.2, 0.8, 0.4, 0.6;
  m.pi0 = Vector::Constant(2, 0.5);
  return m;
}

inline CostWeights example_weights(double terminal = 20.0) {
  CostWeights w;
  w.Q = scalars({-1.0, 20.0});
  w.R = scalars({-3.0, 0.0});
  w.terminal_P = scalars({terminal, terminal});
  return w;
}

/// Larger root of p^2 + 54 p + 290 = 0: mode-1 stationary value obtained by
/// substituting S_1 = 0.2 p + 16 into the scalar stationary equation.
inline double oracle_p1() { return -27.0 + std::sqrt(439.0); }

inline double oracle_f1() {
  const double s1 = 0.2 * oracle_p1() + 16.0;
  return -(s1 / 2.0) / (s1 / 2.0 - 3.0);
}

/// Single-mode scalar model x+ = (a + b w) x + (c + d w) u.
inline MjlsModel scalar_model(double a, double b, double c, double d, double sigma2) {
  MjlsModel m;
  m.modes = 1;
  m.state_dim = 1;
  m.input_dim = 1;
  m.A = {scalar(a)};
  m.B = {scalar(b)};
  m.C = {scalar(c)};
  m.D = {scalar(d)};
  m.sigma2 = sigma2;
  m.rho = Matrix::Ones(1, 1);
  m.pi0 = Vector::Ones(1);
  return m;
}

inline CostWeights scalar_weights(double q, double r, double terminal) {
  CostWeights w;
  w.Q = {scalar(q)};
  w.R = {scalar(r)};
  w.terminal_P = {scalar(terminal)};
  return w;
}

inline Matrix random_symmetric(std::mt19937_64& rng, int p) {
  std::normal_distribution<double> normal;
  Matrix g(p, p);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) g(r, c) = normal(rng);
  return 0.5 * (g + g.transpose());
}

/// Random PSD matrix of the given rank (G G' with G p x rank).
inline Matrix random_psd(std::mt19937_64& rng, int p, int rank) {
  std::normal_distribution<double> normal;
  Matrix g(p, rank);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < rank; ++c) g(r, c) = normal(rng);
  return g * g.transpose();
}

/// Random symmetric matrix with prescribed rank and mixed-sign spectrum.
inline Matrix random_symmetric_rank(std::mt19937_64& rng, int p, int rank) {
  std::normal_distribution<double> normal;
  Matrix g(p, p);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) g(r, c) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Vector lambda = Vector::Zero(p);
  for (int i = 0; i < rank; ++i) {
    const double mag = 0.5 + std::abs(normal(rng));
    lambda(i) = (i % 2 == 0) ? mag : -mag;
  }
  return q * lambda.asDiagonal() * q.transpose();
}

}  // namespace mjls::testing
