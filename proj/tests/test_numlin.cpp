#include <doctest.h>

#include <random>

#include "mjls/numlin.hpp"
#include "support.hpp"

using namespace mjls;
using namespace mjls::numlin;
using mjls::testing::random_psd;
using mjls::testing::random_symmetric;
using mjls::testing::random_symmetric_rank;

namespace {
Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}
}  // namespace

TEST_CASE("pinv_sym examples") {
  CHECK(max_abs(pinv_sym(diag2(2, 0)) - diag2(0.5, 0)) < 1e-15);
  CHECK(max_abs(pinv_sym(Matrix::Zero(3, 3))) == 0.0);
  Matrix bad(2, 2);
  bad << 1, 2, 0, 1;
  CHECK_THROWS_AS(pinv_sym(bad), NotSymmetric);
}

TEST_CASE("pinv_sym satisfies the Penrose identities on random inputs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int rank = trial % 5;
    const Matrix S = rank == 4 ? random_symmetric(rng, 4) : random_symmetric_rank(rng, 4, rank);
    const Matrix Sp = pinv_sym(S);
    CHECK(max_abs(S * Sp * S - S) < 1e-9);
    CHECK(max_abs(Sp * S * Sp - Sp) < 1e-9);
    CHECK(max_abs((S * Sp).transpose() - S * Sp) < 1e-9);
    CHECK(max_abs((Sp * S).transpose() - Sp * S) < 1e-9);
    CHECK(max_abs(Sp - Sp.transpose()) < 1e-9);
    CHECK(max_abs(S * Sp - Sp * S) < 1e-9);
  }
}

TEST_CASE("definiteness is preserved by the pseudo-inverse") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix S = trial % 2 == 0 ? random_psd(rng, 3, 1 + trial % 3) : random_symmetric(rng, 3);
    CHECK(is_psd(S) == is_psd(pinv_sym(S)));
  }
}

TEST_CASE("psd_check examples") {
  CHECK(psd_check(diag2(1, 0)) == Definiteness::positive_semidefinite);
  CHECK(psd_check(Matrix::Constant(1, 1, -3.0)) == Definiteness::indefinite);
  CHECK(psd_check(diag2(1e-15, 1)) == Definiteness::positive_semidefinite);
  CHECK(psd_check(Matrix::Identity(2, 2)) == Definiteness::positive_definite);
}

TEST_CASE("kernel_basis examples") {
  const Matrix k = kernel_basis(diag2(1, 0));
  REQUIRE(k.cols() == 1);
  CHECK(std::abs(k(0, 0)) < 1e-15);
  CHECK(std::abs(std::abs(k(1, 0)) - 1.0) < 1e-15);
  CHECK(kernel_basis(Matrix::Identity(3, 3)).cols() == 0);
  const Matrix ones = Matrix::Ones(2, 2);
  const Matrix v = kernel_basis(ones);
  REQUIRE(v.cols() == 1);
  CHECK(std::abs(v(0, 0) + v(1, 0)) < 1e-12);
  CHECK(std::abs(std::abs(v(0, 0)) - 1.0 / std::sqrt(2.0)) < 1e-12);
}

TEST_CASE("sqrt_psd examples and properties") {
  CHECK(max_abs(sqrt_psd(diag2(4, 9)) - diag2(2, 3)) < 1e-14);
  CHECK(max_abs(sqrt_psd(Matrix::Zero(2, 2))) == 0.0);
  CHECK_THROWS_AS(sqrt_psd(diag2(1, -1)), NotPositiveSemidefinite);
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix S = random_psd(rng, 3, 1 + trial % 3);
    const Matrix r = sqrt_psd(S);
    CHECK(max_abs(r * r - S) < 1e-9 * std::max(1.0, max_abs(S)));
    CHECK(is_psd(r));
    const Matrix k = kernel_basis(S, 1e-9 * std::max(1.0, max_abs(S)));
    if (k.cols() > 0) CHECK(max_abs(r * k) < 1e-6);
  }
}

TEST_CASE("sym_eig reconstructs with descending eigenvalues") {
  std::mt19937_64 rng(14);
  const Matrix S = random_symmetric(rng, 5);
  const auto e = sym_eig(S);
  for (int i = 1; i < 5; ++i) CHECK(e.eigenvalues(i - 1) >= e.eigenvalues(i));
  CHECK(max_abs(e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose() - S) < 1e-10);
  CHECK(max_abs(e.eigenvectors.transpose() * e.eigenvectors - Matrix::Identity(5, 5)) < 1e-10);
}

TEST_CASE("spectral radius of simple tuple maps") {
  TupleMap half = [](const ModeMatrices& x) { return ModeMatrices{0.5 * x[0]}; };
  CHECK(tuple_operator_spectral_radius(half, 1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  TupleMap zero = [](const ModeMatrices& x) { return ModeMatrices{Matrix::Zero(x[0].rows(), x[0].cols())}; };
  CHECK(tuple_operator_spectral_radius(zero, 1, 2) == 0.0);
}

TEST_CASE("dense and power spectral radius agree") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int trial = 0; trial < 10; ++trial) {
    const int modes = 1 + trial % 3;
    const int dim = 1 + trial % 2;
    ModeMatrices a;
    for (int i = 0; i < modes; ++i) {
      Matrix m(dim, dim);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) m(r, c) = u(rng);
      a.push_back(m);
    }
    Matrix rho = Matrix::Constant(modes, modes, 1.0 / modes);
    TupleMap map = [&](const ModeMatrices& z) {
      ModeMatrices out(modes, Matrix::Zero(dim, dim));
      for (int j = 0; j < modes; ++j)
        for (int i = 0; i < modes; ++i) out[j] += rho(i, j) * (a[i] * z[i] * a[i].transpose());
      return out;
    };
    const double dense = tuple_operator_spectral_radius(map, modes, dim);
    const double power = tuple_operator_spectral_radius_power(map, modes, dim);
    CHECK(std::abs(dense - power) < 1e-8);
  }
}
