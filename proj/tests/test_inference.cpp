#include <Eigen/Dense>

#include "doctest.h"
#include "proxyctl/error.hpp"
#include "proxyctl/inference.hpp"
#include "test_helpers.hpp"

using namespace proxyctl;
using testutil::random_matrix;
using testutil::random_vector;

namespace {

ScoreNuisances random_nuisances(Eigen::Index dx, Eigen::Index dz,
                                Eigen::Index dv, Eigen::Index dd,
                                Xoshiro256pp& rng) {
  ScoreNuisances nu;
  nu.xi = random_vector(dv, rng);
  nu.mu = random_matrix(dx, dz, rng);
  nu.gamma_y = random_matrix(dd, 1, rng);
  nu.gamma_v = random_matrix(dd, dv, rng);
  nu.gamma_x1 = random_matrix(dd, dx, rng);
  nu.gamma_x2 = random_matrix(dd, dx, rng);
  nu.omega_z = random_matrix(dx + dd, dz, rng);
  nu.omega_y = random_matrix(dx + dd, 1, rng);
  nu.omega_v = random_matrix(dx + dd, dv, rng);
  return nu;
}

}  // namespace

TEST_CASE("score with mu = 0 reduces to the first moment term") {
  Xoshiro256pp rng(71);
  ScoreNuisances nu = random_nuisances(2, 3, 2, 1, rng);
  nu.mu.setZero();
  const VectorXd x = random_vector(2, rng);
  const VectorXd z = random_vector(3, rng);
  const VectorXd v = random_vector(2, rng);
  const VectorXd d = VectorXd::Ones(1);
  const VectorXd beta = random_vector(2, rng);
  const double y = rng.next_normal();

  const VectorXd g = score(x, y, z, v, d, beta, nu);
  const VectorXd x1 = x - nu.gamma_x1.transpose() * d;
  const VectorXd x2 = x - nu.gamma_x2.transpose() * d;
  const double resid = (y - (nu.gamma_y.transpose() * d)(0)) -
                       nu.xi.dot(v - nu.gamma_v.transpose() * d) -
                       beta.dot(x2);
  CHECK((g - x1 * resid).norm() < 1e-12);
}

TEST_CASE("score with xi = beta = mu = 0 and zero gammas is x * y") {
  Xoshiro256pp rng(72);
  ScoreNuisances nu = random_nuisances(2, 2, 2, 1, rng);
  nu.mu.setZero();
  nu.xi.setZero();
  nu.gamma_x1.setZero();
  nu.gamma_x2.setZero();
  nu.gamma_y.setZero();
  nu.gamma_v.setZero();
  const VectorXd x = random_vector(2, rng);
  const double y = rng.next_normal();
  const VectorXd g = score(x, y, random_vector(2, rng), random_vector(2, rng),
                           VectorXd::Ones(1), VectorXd::Zero(2), nu);
  CHECK((g - x * y).norm() < 1e-12);
}

TEST_CASE("score matches a hand-expanded symbolic formula") {
  // Scalar case, d_X = d_Z = d_V = d_D = 1, expanded by hand:
  // g = (x - g1) * ((y - gy) - xi (v - gv) - b (x - g2))
  //     - m (z - wz1 x - wz2) * ((y - wy1 x - wy2) - xi (v - wv1 x - wv2)).
  ScoreNuisances nu;
  nu.xi = VectorXd::Constant(1, 0.7);
  nu.mu = MatrixXd::Constant(1, 1, -1.3);
  nu.gamma_y = MatrixXd::Constant(1, 1, 0.2);
  nu.gamma_v = MatrixXd::Constant(1, 1, -0.4);
  nu.gamma_x1 = MatrixXd::Constant(1, 1, 0.5);
  nu.gamma_x2 = MatrixXd::Constant(1, 1, -0.1);
  nu.omega_z = (MatrixXd(2, 1) << 0.3, -0.6).finished();
  nu.omega_y = (MatrixXd(2, 1) << -0.2, 0.8).finished();
  nu.omega_v = (MatrixXd(2, 1) << 0.9, 0.1).finished();

  const double x = 1.7, y = -0.9, z = 0.4, v = 2.2, b = 0.6;
  const VectorXd g =
      score(VectorXd::Constant(1, x), y, VectorXd::Constant(1, z),
            VectorXd::Constant(1, v), VectorXd::Ones(1),
            VectorXd::Constant(1, b), nu);

  const double first =
      (x - 0.5) * ((y - 0.2) - 0.7 * (v + 0.4) - b * (x + 0.1));
  const double zbar = z - 0.3 * x + 0.6;
  const double ybar = y + 0.2 * x - 0.8;
  const double vbar = v - 0.9 * x - 0.1;
  const double second = -1.3 * zbar * (ybar - 0.7 * vbar);
  CHECK(g(0) == doctest::Approx(first - second).epsilon(1e-12));
}

TEST_CASE("score validates shapes") {
  Xoshiro256pp rng(73);
  ScoreNuisances nu = random_nuisances(2, 3, 2, 1, rng);
  nu.mu = MatrixXd::Zero(2, 2);  // wrong column count
  CHECK_THROWS_AS(score(random_vector(2, rng), 0.0, random_vector(3, rng),
                        random_vector(2, rng), VectorXd::Ones(1),
                        VectorXd::Zero(2), nu),
                  DimensionError);
}

TEST_CASE("variance of all-zero scores is zero") {
  ScoreSet set;
  set.scores = MatrixXd::Zero(10, 2);
  set.sigma_x = MatrixXd::Identity(2, 2);
  CHECK(variance(set).isZero(0.0));
}

TEST_CASE("variance with identity sigma_x is the mean outer product") {
  Xoshiro256pp rng(74);
  ScoreSet set;
  set.scores = random_matrix(50, 2, rng);
  set.sigma_x = MatrixXd::Identity(2, 2);
  const MatrixXd expected =
      set.scores.transpose() * set.scores / 50.0;
  CHECK((variance(set) - expected).norm() < 1e-12);
}

TEST_CASE("variance matches the scalar sandwich formula") {
  Xoshiro256pp rng(75);
  ScoreSet set;
  set.scores = random_matrix(30, 1, rng);
  set.sigma_x = MatrixXd::Constant(1, 1, 2.5);
  double expected = 0.0;
  for (Eigen::Index i = 0; i < 30; ++i) {
    expected += set.scores(i, 0) * set.scores(i, 0) / (2.5 * 2.5);
  }
  expected /= 30.0;
  CHECK(variance(set)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("variance is invariant to permuting scores and scales as c^2") {
  Xoshiro256pp rng(76);
  ScoreSet set;
  set.scores = random_matrix(20, 2, rng);
  set.sigma_x = MatrixXd::Identity(2, 2) * 1.7;
  const MatrixXd base = variance(set);

  ScoreSet permuted = set;
  permuted.scores.row(0).swap(permuted.scores.row(19));
  permuted.scores.row(3).swap(permuted.scores.row(11));
  CHECK((variance(permuted) - base).norm() < 1e-12);

  ScoreSet scaled = set;
  scaled.scores *= 3.0;
  CHECK((variance(scaled) - 9.0 * base).norm() < 1e-10);
}

TEST_CASE("variance requires at least two scores") {
  ScoreSet set;
  set.scores = MatrixXd::Zero(1, 1);
  set.sigma_x = MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(variance(set), InvalidInputError);
}

TEST_CASE("confidence interval: degenerate, analytic, nested, shrinking") {
  const VectorXd beta = VectorXd::Constant(1, 2.0);
  const VectorXd l = VectorXd::Ones(1);

  const ConfidenceInterval degenerate =
      confidence_interval(beta, MatrixXd::Zero(1, 1), l, 0.95, 100);
  CHECK(degenerate.lower == doctest::Approx(2.0));
  CHECK(degenerate.upper == doctest::Approx(2.0));

  const ConfidenceInterval c95 =
      confidence_interval(beta, MatrixXd::Identity(1, 1), l, 0.95, 100);
  CHECK(c95.upper - c95.center == doctest::Approx(0.1959964).epsilon(1e-6));

  const ConfidenceInterval c90 =
      confidence_interval(beta, MatrixXd::Identity(1, 1), l, 0.90, 100);
  const ConfidenceInterval c99 =
      confidence_interval(beta, MatrixXd::Identity(1, 1), l, 0.99, 100);
  CHECK(c90.lower > c95.lower);
  CHECK(c95.lower > c99.lower);
  CHECK(c90.upper < c95.upper);
  CHECK(c95.upper < c99.upper);

  const ConfidenceInterval wide =
      confidence_interval(beta, MatrixXd::Identity(1, 1), l, 0.95, 50);
  CHECK(wide.upper - wide.lower > c95.upper - c95.lower);

  CHECK_THROWS_AS(
      confidence_interval(beta, MatrixXd::Identity(1, 1), l, 1.2, 10),
      InvalidInputError);
}

TEST_CASE("normal quantile is accurate on the probability grid") {
  for (int k = 5; k <= 995; k += 5) {
    const double p = k / 1000.0;
    CHECK(std::abs(norm_cdf(norm_ppf(p)) - p) <= 1e-10);
  }
  CHECK_THROWS_AS(norm_ppf(0.0), InvalidInputError);
  CHECK_THROWS_AS(norm_ppf(1.0), InvalidInputError);
}
