#include <doctest.h>

#include <random>

#include "mjls/analysis.hpp"
#include "mjls/numlin.hpp"
#include "mjls/simulate.hpp"
#include "support.hpp"

using namespace mjls;
using namespace mjls::analysis;
using namespace mjls::testing;

TEST_CASE("set S membership examples") {
  const auto m = example_model();
  const auto w = example_weights();
  const auto in = check_set_S(m, w, scalars({-10, 19}));
  CHECK(in.member);
  CHECK(in.failing.empty());

  const auto out = check_set_S(m, w, scalars({0, 10}));
  CHECK_FALSE(out.member);
  REQUIRE(out.failing.size() == 1);
  CHECK(out.failing[0].value() == 1);
  const auto& sw = out.weights;
  CHECK(sw.Qt[0](0, 0) * sw.Rt[0](0, 0) - sw.Lt[0](0, 0) * sw.Lt[0](0, 0) == doctest::Approx(-13.0));

  MjlsModel definite = example_model();
  CostWeights dw = example_weights();
  dw.Q = scalars({1, 2});
  dw.R = scalars({1, 1});
  CHECK(check_set_S(definite, dw, scalars({0, 0})).member);
}

TEST_CASE("kernel inclusion failure is detected") {
  auto m = example_model();
  auto w = example_weights();
  w.Q = scalars({1, 1});
  w.R = scalars({0, 0});
  m.C = scalars({0, 0});
  m.D = scalars({0, 0});
  CHECK(check_set_S(m, w, scalars({0, 0})).member);
  m.C = scalars({1, 0});
  const auto report = check_set_S(m, w, scalars({0, 0}));
  CHECK_FALSE(report.member);
  CHECK(report.modes[0].block_psd);
  CHECK_FALSE(report.modes[0].kernel_ok);
}

TEST_CASE("membership implies the shifted-weight consequences") {
  const auto m = example_model();
  const auto w = example_weights();
  const auto points = region_scan(m, w, {{-30, 10, 2.0}, {0, 25, 1.0}});
  int members = 0;
  for (const auto& p : points) {
    if (!p.member) continue;
    ++members;
    const auto report = check_set_S(m, w, scalars({p.ptilde[0], p.ptilde[1]}));
    for (std::size_t i = 0; i < 2; ++i) {
      const auto c = shifted_consequences(report.weights, i);
      CHECK(c.rt_min_eigenvalue >= -1e-8);
      CHECK(c.schur_min_eigenvalue >= -1e-8);
      CHECK(c.range_defect <= 1e-8);
    }
  }
  CHECK(members > 0);
}

TEST_CASE("region scan examples") {
  const auto m = example_model();
  const auto w = example_weights();
  const auto points = region_scan(m, w, {{-30, 10, 0.5}, {0, 25, 0.5}});
  CHECK(points.size() == 81u * 51u);
  bool has_member = false, has_in = false, has_out = false;
  for (const auto& p : points) {
    has_member |= p.member;
    if (p.ptilde[0] == -10 && p.ptilde[1] == 19) has_in = p.member;
    if (p.ptilde[0] == 0 && p.ptilde[1] == 10) has_out = !p.member;
    if (p.ptilde[1] > 20) CHECK_FALSE(p.member);
  }
  CHECK(has_member);
  CHECK(has_in);
  CHECK(has_out);

  CHECK(region_scan(m, w, {{1, 0, 0.5}, {0, 1, 0.5}}).empty());
  for (const auto& p : region_scan(m, w, {{-30, 10, 1.0}, {20.5, 30, 0.5}})) CHECK_FALSE(p.member);

  auto wide = m;
  wide.state_dim = 2;
  CHECK_THROWS_AS(region_scan(wide, w, {{0, 1, 1}, {0, 1, 1}}), UnsupportedOperation);
}

TEST_CASE("observability examples") {
  const auto m = example_model();
  const auto sw = riccati::shifted_weights(m, example_weights(), scalars({-10, 19}));
  ModeMatrices roots{numlin::sqrt_psd(sw.Qt[0]), numlin::sqrt_psd(sw.Qt[1])};
  const auto obs = exact_observability(m, roots);
  CHECK(obs.observable);
  CHECK(obs.horizon == 2);
  REQUIRE(obs.first_observable_horizon.has_value());
  CHECK(*obs.first_observable_horizon == 0);

  CHECK_FALSE(exact_observability(m, scalars({0, 0})).observable);

  MjlsModel swap = example_model();
  swap.state_dim = 2;
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  swap.A = {a, a};
  swap.B = {Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  swap.C = {Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
  swap.D = swap.C;
  Matrix e1 = Matrix::Zero(2, 2);
  e1(0, 0) = 1;
  const auto two = exact_observability(swap, {e1, e1}, 1);
  CHECK(two.observable);
  CHECK(*two.first_observable_horizon == 1);
  CHECK_FALSE(exact_observability(swap, {e1, e1}, 0).observable);
}

TEST_CASE("stability examples") {
  const auto m = example_model();
  const auto cert = ms_stability(m, scalars({oracle_f1(), -1.0}));
  CHECK(cert.spectral_radius == doctest::Approx(0.0466).epsilon(0.02));
  CHECK(cert.stable);

  const double c1 = std::pow(0.5 + 0.5 * oracle_f1(), 2) + std::pow(-0.5 - 0.5 * oracle_f1(), 2);
  CHECK(cert.spectral_radius == doctest::Approx(0.2 * c1).epsilon(1e-10));

  const auto unstable = ms_stability(scalar_model(2, 0, 1, 0, 1), {scalar(0)});
  CHECK(unstable.spectral_radius == doctest::Approx(4.0));
  CHECK_FALSE(unstable.stable);
  CHECK(ms_stability(scalar_model(0, 0, 1, 0, 1), {scalar(0)}).spectral_radius == 0.0);
}

TEST_CASE("maximality examples") {
  const ModeMatrices P = scalars({oracle_p1(), 20});
  CHECK(maximality_check(P, {scalars({-10, 19})}).holds);
  const auto same = maximality_check(P, {P});
  CHECK(same.holds);
  CHECK(same.worst_eigenvalue == doctest::Approx(0.0));
  const auto fail = maximality_check(scalars({-11, 18}), {scalars({-10, 19})});
  CHECK_FALSE(fail.holds);
  CHECK(fail.worst_eigenvalue == doctest::Approx(-1.0));
}

TEST_CASE("extended Schur lemma equivalence on random triples") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  int agree = 0, positives = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 3;
    const int m = 1 + (trial / 3) % 3;
    const int rank = trial % (m + 1);
    const Matrix R = random_psd(rng, m, rank);
    Matrix N(n, m);
    if (trial % 2 == 0) {
      Matrix G(n, m);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) G(r, c) = normal(rng);
      N = G * R;
    } else {
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < m; ++c) N(r, c) = normal(rng);
    }
    Matrix M = N * numlin::pinv_sym(R) * N.transpose() + random_psd(rng, n, n);
    if (trial % 5 == 0) M -= 2.0 * Matrix::Identity(n, n);
    const bool i = schur_condition(M, N, R, 1e-8);
    const bool ii = schur_block_condition(M, N, R, 1e-8);
    CHECK(i == ii);
    agree += (i == ii);
    positives += i;
  }
  CHECK(agree == 300);
  CHECK(positives > 50);
}
