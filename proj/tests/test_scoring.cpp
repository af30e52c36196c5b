#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "oracles.hpp"
#include "rescore/errors.hpp"
#include "rescore/scoring.hpp"

using namespace rescore;

namespace {

Eigen::MatrixXd random_matrix(int d, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = scale * normal(rng);
  }
  return m;
}

Eigen::VectorXd flat(const Eigen::MatrixXd& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

Eigen::MatrixXd unflat(const Eigen::VectorXd& v, int d) { return Eigen::Map<const Eigen::MatrixXd>(v.data(), d, d); }

double h_gradient_error(AcyclicityKind kind, const Eigen::MatrixXd& a) {
  const int d = static_cast<int>(a.rows());
  const auto f = [&](const Eigen::VectorXd& v) { return acyclicity(kind, unflat(v, d)).value; };
  const Eigen::VectorXd numeric = oracle::finite_difference(f, flat(a), 1e-5);
  return oracle::relative_error(flat(acyclicity(kind, a).gradient), numeric);
}

}  // namespace

TEST_CASE("per-sample losses") {
  DataMatrix x;
  x.values.resize(4, 2);
  x.values << 1.0, 2.0, -0.5, -1.0, 0.0, 0.0, 3.0, 6.0;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
  b(0, 1) = 2.0;
  // Only the root keeps a residual: its own value.
  const Eigen::VectorXd fitted = per_sample_losses(b, x, {});
  for (int i = 0; i < 4; ++i) CHECK(fitted(i) == 0.5 * x.values(i, 0) * x.values(i, 0));
  DataMatrix noiseless;
  noiseless.values = simulate_linear_sem(b, 5, make_noise_spec(NoiseKind::homogeneous, 2), 1).values * 0.0;
  CHECK(per_sample_losses(b, noiseless, {}).isZero());

  const Eigen::VectorXd plain = per_sample_losses(Eigen::MatrixXd::Zero(2, 2), x, {});
  for (int i = 0; i < 4; ++i) CHECK(plain(i) == doctest::Approx(0.5 * x.values.row(i).squaredNorm()));

  DataMatrix zero;
  zero.values = Eigen::MatrixXd::Zero(3, 5);
  ScoreConfig nll;
  nll.loss = LossKind::gaussian_nll;
  const Eigen::VectorXd l = per_sample_losses(Eigen::MatrixXd::Zero(5, 5), zero, nll);
  for (int i = 0; i < 3; ++i) CHECK(l(i) == doctest::Approx(5.0 * std::log(std::sqrt(2.0 * std::numbers::pi))));
  CHECK(l(0) == doctest::Approx(0.9189385 * 5).epsilon(1e-6));

  nll.sigma = Eigen::VectorXd::Constant(5, 2.0);
  zero.values(0, 0) = 2.0;
  const Eigen::VectorXd scaled = per_sample_losses(Eigen::MatrixXd::Zero(5, 5), zero, nll);
  CHECK(scaled(0) == doctest::Approx(5.0 * std::log(2.0 * std::sqrt(2.0 * std::numbers::pi)) + 4.0 / 8.0));

  CHECK_THROWS_AS((void)per_sample_losses(Eigen::MatrixXd::Zero(3, 3), x, {}), InvalidParameter);
}

TEST_CASE("weighted score") {
  Eigen::VectorXd w(2);
  w << 0.75, 0.25;
  Eigen::VectorXd losses(2);
  losses << 2.0, 1.0;
  CHECK(weighted_score(losses, SampleWeights(w, 0.5), 0.0) == doctest::Approx(1.75));

  const Eigen::VectorXd same = Eigen::VectorXd::Constant(2, 3.5);
  CHECK(weighted_score(same, SampleWeights(w, 0.5), 0.25) == doctest::Approx(3.75));

  Eigen::VectorXd bad(3);
  bad << 1, 2, 3;
  CHECK_THROWS_AS((void)weighted_score(bad, SampleWeights(w, 0.5), 0.0), InvalidParameter);
}

TEST_CASE("uniform weights reproduce the average score bitwise") {
  std::mt19937_64 rng(3);
  std::exponential_distribution<double> expo(1.0);
  for (const int n : {1, 7, 100, 1001}) {
    Eigen::VectorXd losses(n);
    for (int i = 0; i < n; ++i) losses(i) = expo(rng) * 1e3;
    const double a = weighted_score(losses, SampleWeights::uniform(n), 0.125);
    const double b = average_score(losses, 0.125);
    CHECK(a == b);
    CHECK(a == doctest::Approx(losses.mean() + 0.125));
  }
}

TEST_CASE("weighted score is linear in the losses") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd losses(50);
  for (int i = 0; i < 50; ++i) losses(i) = u(rng);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(50, 1.0 / 50);
  w(0) += 0.005;
  w(1) -= 0.005;
  const SampleWeights sw(w, 0.7);
  CHECK(weighted_score(losses * 3.0, sw, 0.0) == doctest::Approx(3.0 * weighted_score(losses, sw, 0.0)));
}

TEST_CASE("matrix_exp special cases") {
  CHECK(matrix_exp(Eigen::MatrixXd::Zero(3, 3)).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  CHECK(matrix_exp(Eigen::MatrixXd::Identity(4, 4)).isApprox(std::exp(1.0) * Eigen::MatrixXd::Identity(4, 4), 1e-14));
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(2, 2);
  n(0, 1) = 3.7;
  CHECK((matrix_exp(n) - (Eigen::MatrixXd::Identity(2, 2) + n)).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS((void)matrix_exp(bad), InvalidParameter);
}

TEST_CASE("matrix_exp matches reference implementations") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = 2 + trial % 9;
    Eigen::MatrixXd a = random_matrix(d, 1.0, rng);
    const double target = 0.01 + 10.0 * (trial % 10) / 9.0;
    a *= std::min(target, 10.0) / a.lpNorm<1>();
    const Eigen::MatrixXd reference = a.exp();
    const double err = (matrix_exp(a) - reference).norm() / reference.norm();
    CHECK(err <= 1e-10);
    if (a.lpNorm<1>() <= 2.0) {
      CHECK((matrix_exp(a) - oracle::taylor_expm(a)).norm() / reference.norm() <= 1e-12);
    }
  }
}

TEST_CASE("h_expm values") {
  std::mt19937_64 rng(2);
  for (int d = 2; d <= 8; ++d) {
    Eigen::MatrixXd a = random_matrix(d, 1.0, rng).triangularView<Eigen::StrictlyUpper>();
    CHECK(std::abs(h_expm(a).value) <= 1e-12);
    CHECK(std::abs(h_expm(a.transpose()).value) <= 1e-12);
  }
  Eigen::MatrixXd cyc = Eigen::MatrixXd::Zero(2, 2);
  cyc(0, 1) = 1.0;
  cyc(1, 0) = 1.0;
  const double expected = oracle::taylor_expm(cyc).trace() - 2.0;
  CHECK(h_expm(cyc).value == doctest::Approx(expected).epsilon(1e-13));
  CHECK(h_expm(cyc).value == doctest::Approx(2.0 * std::cosh(1.0) - 2.0).epsilon(1e-13));
  CHECK(h_expm(cyc).value == doctest::Approx(1.08616).epsilon(1e-5));
}

TEST_CASE("h_poly values") {
  Eigen::MatrixXd cyc = Eigen::MatrixXd::Zero(2, 2);
  cyc(0, 1) = 1.0;
  cyc(1, 0) = 1.0;
  const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2) + cyc;
  CHECK(h_poly(cyc, 1.0).value == doctest::Approx((m * m).trace() - 2.0));
  CHECK(h_poly(cyc, 1.0).value == doctest::Approx(2.0));
  std::mt19937_64 rng(4);
  for (int d = 2; d <= 8; ++d) {
    Eigen::MatrixXd a = random_matrix(d, 1.0, rng).triangularView<Eigen::StrictlyUpper>();
    CHECK(std::abs(h_poly(a).value) <= 1e-12);
  }
}

TEST_CASE("acyclicity gradients match finite differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd a = random_matrix(10, 0.3, rng);
    CHECK(h_gradient_error(AcyclicityKind::expm, a) < 1e-5);
    CHECK(h_gradient_error(AcyclicityKind::poly, a) < 1e-5);
  }
  const Eigen::MatrixXd a = random_matrix(4, 0.5, rng);
  const auto f = [&](const Eigen::VectorXd& v) { return h_poly(unflat(v, 4), 0.7).value; };
  CHECK(oracle::relative_error(flat(h_poly(a, 0.7).gradient), oracle::finite_difference(f, flat(a), 1e-5)) < 1e-5);
}

TEST_CASE("h vanishes exactly on acyclic supports") {
  // Exhaustive for d <= 4, sampled patterns for d = 5 and 6.
  auto check_pattern = [](const Eigen::MatrixXd& a) {
    AdjacencyMatrix adj = (a.array() != 0.0).cast<int>();
    const bool acyclic = is_acyclic(adj);
    const double he = h_expm(a).value;
    const double hp = h_poly(a).value;
    CHECK((he <= 1e-9) == acyclic);
    CHECK((hp <= 1e-9) == acyclic);
  };
  for (int d = 1; d <= 4; ++d) {
    const int slots = d * (d - 1);
    for (unsigned mask = 0; mask < (1u << slots); ++mask) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
      int bit = 0;
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
          if (i != j && ((mask >> bit++) & 1u)) a(i, j) = 1.0;
        }
      }
      check_pattern(a);
    }
  }
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.2);
  std::uniform_real_distribution<double> mag(0.3, 2.0);
  for (int trial = 0; trial < 4000; ++trial) {
    const int d = 5 + trial % 2;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (i != j && coin(rng)) a(i, j) = mag(rng);
      }
    }
    check_pattern(a);
  }
}

TEST_CASE("h_expm and h_poly share their zero set on random matrices") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd a = random_matrix(6, 1.0, rng);
    if (trial % 2 == 0) a = a.triangularView<Eigen::StrictlyLower>();
    CHECK((h_expm(a).value > 1e-9) == (h_poly(a).value > 1e-9));
  }
}
