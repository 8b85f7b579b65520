#include <Eigen/Dense>

#include "doctest.h"
#include "proxyctl/error.hpp"
#include "proxyctl/folds.hpp"
#include "proxyctl/partialling.hpp"
#include "test_helpers.hpp"

using namespace proxyctl;
using testutil::make_dataset;
using testutil::random_matrix;
using testutil::random_vector;

TEST_CASE("OLS residualizer on a ones column returns column means") {
  Xoshiro256pp rng(31);
  const MatrixXd target = random_matrix(25, 3, rng);
  const ResidualizerFit fit =
      fit_ols_residualizer(MatrixXd::Ones(25, 1), target);
  CHECK((fit.coeffs - target.colwise().mean()).norm() < 1e-12);
}

TEST_CASE("OLS residualizer recovers exact linear coefficients") {
  Xoshiro256pp rng(32);
  const MatrixXd r = random_matrix(30, 4, rng);
  const MatrixXd b = random_matrix(4, 2, rng);
  const ResidualizerFit fit = fit_ols_residualizer(r, r * b);
  CHECK((fit.coeffs - b).norm() < 1e-9);
  CHECK((r * b - r * fit.coeffs).norm() < 1e-9);
}

TEST_CASE("rank-deficient regressors: residual matches column-drop oracle") {
  Xoshiro256pp rng(33);
  MatrixXd r(20, 3);
  r.col(0) = random_vector(20, rng);
  r.col(1) = r.col(0);  // duplicate
  r.col(2) = random_vector(20, rng);
  const MatrixXd h = random_matrix(20, 2, rng);

  const ResidualizerFit fit = fit_ols_residualizer(r, h);
  const MatrixXd resid = h - r * fit.coeffs;

  MatrixXd pruned(20, 2);
  pruned << r.col(0), r.col(2);
  const ResidualizerFit oracle = fit_ols_residualizer(pruned, h);
  const MatrixXd resid_oracle = h - pruned * oracle.coeffs;
  CHECK((resid - resid_oracle).norm() < 1e-8);
}

TEST_CASE("lasso residualizer at penalty zero equals OLS") {
  Xoshiro256pp rng(34);
  MatrixXd r(50, 3);
  r.col(0).setOnes();
  r.col(1) = random_vector(50, rng);
  r.col(2) = 3.0 * random_vector(50, rng);
  const MatrixXd h = random_matrix(50, 1, rng);
  const ResidualizerFit lasso = fit_lasso_residualizer(r, h, 0.0);
  const ResidualizerFit ols = fit_ols_residualizer(r, h);
  CHECK((lasso.coeffs - ols.coeffs).norm() < 1e-6);
}

TEST_CASE("lasso residualizer full-shrinkage threshold") {
  Xoshiro256pp rng(35);
  MatrixXd r(40, 3);
  r.col(0).setOnes();
  r.col(1) = random_vector(40, rng);
  r.col(2) = random_vector(40, rng);
  r.col(1).array() -= r.col(1).mean();
  r.col(2).array() -= r.col(2).mean();
  MatrixXd h = random_matrix(40, 1, rng);
  h.col(0).array() -= h.col(0).mean();

  MatrixXd centered(40, 2);
  centered << r.col(1), r.col(2);
  const double threshold =
      2.0 * (centered.transpose() * h.col(0)).cwiseAbs().maxCoeff();
  const ResidualizerFit fit = fit_lasso_residualizer(r, h, threshold * 1.001);
  CHECK(std::abs(fit.coeffs(1, 0)) < 1e-10);
  CHECK(std::abs(fit.coeffs(2, 0)) < 1e-10);
}

TEST_CASE("lasso residualizer satisfies KKT in original coordinates") {
  Xoshiro256pp rng(36);
  for (int trial = 0; trial < 10; ++trial) {
    MatrixXd r(60, 4);
    r.col(0).setOnes();
    for (Eigen::Index j = 1; j < 4; ++j) {
      r.col(j) = (1.0 + j) * random_vector(60, rng);
    }
    const MatrixXd h = random_matrix(60, 1, rng);
    const double penalty = 4.0 + trial;
    const ResidualizerFit fit = fit_lasso_residualizer(r, h, penalty);
    const VectorXd resid = h.col(0) - r * fit.coeffs.col(0);
    // Intercept is unpenalized: its gradient must vanish.
    CHECK(std::abs(2.0 * r.col(0).dot(resid)) < 1e-6);
    for (Eigen::Index j = 1; j < 4; ++j) {
      const double grad = 2.0 * r.col(j).dot(resid);
      if (fit.coeffs(j, 0) == 0.0) {
        CHECK(std::abs(grad) <= penalty + 1e-6);
      } else {
        const double sign = fit.coeffs(j, 0) > 0.0 ? 1.0 : -1.0;
        CHECK(grad == doctest::Approx(penalty * sign).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("lasso residualizer rejects negative penalty") {
  CHECK_THROWS_AS(
      fit_lasso_residualizer(MatrixXd::Ones(5, 1), MatrixXd::Zero(5, 1), -1.0),
      InvalidInputError);
}

TEST_CASE("residualize with intercept-only D demeans") {
  Xoshiro256pp rng(37);
  const DataMatrices data = make_dataset(30, 2, 1, 3, 3, rng);
  const ResidualizedSample resid = residualize(data);
  CHECK((resid.y_hat -
         (data.y.rowwise() - data.y.colwise().mean()))
            .norm() < 1e-10);
  CHECK((resid.v_hat -
         (data.v.rowwise() - data.v.colwise().mean()))
            .norm() < 1e-10);
}

TEST_CASE("residualize: target exactly linear in D vanishes on fit rows") {
  Xoshiro256pp rng(38);
  DataMatrices data = make_dataset(30, 2, 1, 2, 2, rng);
  MatrixXd d(30, 2);
  d.col(0).setOnes();
  d.col(1) = random_vector(30, rng);
  data.d = d;
  data.y = d * Eigen::Vector2d(0.5, -2.0);  // exactly linear in D
  const ResidualizedSample resid = residualize(data);
  CHECK(resid.y_hat.norm() < 1e-9);
}

TEST_CASE("split residualization matches a two-pass oracle") {
  Xoshiro256pp rng(39);
  DataMatrices data = make_dataset(20, 2, 1, 2, 2, rng);
  MatrixXd d(20, 2);
  d.col(0).setOnes();
  d.col(1) = random_vector(20, rng);
  data.d = d;

  std::vector<Eigen::Index> fit_on, apply_on;
  for (Eigen::Index i = 0; i < 12; ++i) fit_on.push_back(i);
  for (Eigen::Index i = 12; i < 20; ++i) apply_on.push_back(i);
  const ResidualizedSample resid = residualize(data, fit_on, apply_on);

  // Straight-line oracle: fit on the first rows, apply to the rest.
  const MatrixXd d_fit = data.d.topRows(12);
  const MatrixXd y_fit = data.y.topRows(12);
  const MatrixXd gamma = testutil::gauss_inverse(d_fit.transpose() * d_fit) *
                         d_fit.transpose() * y_fit;
  const MatrixXd expected = data.y.bottomRows(8) - data.d.bottomRows(8) * gamma;
  CHECK((resid.y_hat - expected).norm() < 1e-10);

  MatrixXd xd_fit(12, 3);
  xd_fit << data.x.topRows(12), d_fit;
  const MatrixXd omega = testutil::gauss_inverse(xd_fit.transpose() * xd_fit) *
                         xd_fit.transpose() * data.z.topRows(12);
  MatrixXd xd_apply(8, 3);
  xd_apply << data.x.bottomRows(8), data.d.bottomRows(8);
  const MatrixXd expected_check = data.z.bottomRows(8) - xd_apply * omega;
  CHECK((resid.z_check - expected_check).norm() < 1e-10);
}

TEST_CASE("residualize rejects empty fit set and bad indices") {
  Xoshiro256pp rng(40);
  const DataMatrices data = make_dataset(10, 1, 1, 2, 2, rng);
  CHECK_THROWS_AS(residualize(data, {}, all_rows(10)), InvalidInputError);
  CHECK_THROWS_AS(residualize(data, {0, 99}, all_rows(10)), InvalidInputError);
}

TEST_CASE("idempotence: residualizing twice changes nothing") {
  Xoshiro256pp rng(41);
  DataMatrices data = make_dataset(40, 2, 1, 3, 3, rng);
  MatrixXd d(40, 2);
  d.col(0).setOnes();
  d.col(1) = random_vector(40, rng);
  data.d = d;
  const ResidualizedSample once = residualize(data);
  DataMatrices second = data;
  second.y = once.y_hat;
  second.x = once.x_hat;
  second.z = once.z_hat;
  second.v = once.v_hat;
  const ResidualizedSample twice = residualize(second);
  CHECK(testutil::rel_frob(twice.y_hat - once.y_hat, once.y_hat) < 1e-8);
  CHECK(testutil::rel_frob(twice.v_hat - once.v_hat, once.v_hat) < 1e-8);
}

TEST_CASE("orthogonality of OLS residuals") {
  Xoshiro256pp rng(42);
  DataMatrices data = make_dataset(35, 2, 2, 3, 3, rng);
  MatrixXd d(35, 2);
  d.col(0).setOnes();
  d.col(1) = random_vector(35, rng);
  data.d = d;
  const ResidualizedSample resid = residualize(data);
  const double scale_d = data.d.norm();
  CHECK((data.d.transpose() * resid.y_hat).norm() <=
        1e-8 * scale_d * data.y.norm());
  CHECK((data.d.transpose() * resid.v_hat).norm() <=
        1e-8 * scale_d * data.v.norm());
  MatrixXd xd(35, 4);
  xd << data.x, data.d;
  CHECK((xd.transpose() * resid.z_check).norm() <=
        1e-8 * xd.norm() * data.z.norm());
  CHECK((xd.transpose() * resid.y_check).norm() <=
        1e-8 * xd.norm() * data.y.norm());
}

TEST_CASE("residualizing X on (X, D) gives the zero matrix") {
  Xoshiro256pp rng(43);
  const DataMatrices data = make_dataset(30, 2, 2, 3, 3, rng);
  MatrixXd xd(30, 3);
  xd << data.x, data.d;
  const ResidualizerFit fit = fit_ols_residualizer(xd, data.x);
  CHECK((data.x - xd * fit.coeffs).norm() < 1e-9);
}

TEST_CASE("lasso-mode residualize honors per-role penalties and CV default") {
  Xoshiro256pp rng(44);
  const DataMatrices data = make_dataset(60, 2, 1, 2, 2, rng);
  ResidualizeOptions opts;
  opts.mode = ResidMode::kLasso;
  opts.penalties.y = 0.0;
  opts.penalties.x = 0.0;
  opts.penalties.z = 0.0;
  opts.penalties.v = 0.0;
  const ResidualizedSample lasso = residualize(data, opts);
  const ResidualizedSample ols = residualize(data);
  CHECK((lasso.y_hat - ols.y_hat).norm() < 1e-5);
  CHECK((lasso.z_check - ols.z_check).norm() < 1e-5);

  // CV default runs end to end and produces finite output.
  ResidualizeOptions cv_opts;
  cv_opts.mode = ResidMode::kLasso;
  cv_opts.seed = 11;
  const ResidualizedSample cv = residualize(data, cv_opts);
  CHECK(cv.y_hat.allFinite());
  CHECK(cv.v_check.allFinite());
}

TEST_CASE("DataMatrices validation catches malformed input") {
  Xoshiro256pp rng(45);
  DataMatrices data = make_dataset(10, 1, 1, 2, 2, rng);
  DataMatrices bad = data;
  bad.d(0, 0) = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidInputError);
  bad = data;
  bad.x = MatrixXd::Zero(9, 1);
  CHECK_THROWS_AS(bad.validate(), DimensionError);
  bad = data;
  bad.v(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(bad.validate(), InvalidInputError);
}

TEST_CASE("fold plans are balanced partitions") {
  const FoldPlan plan = make_fold_plan(23, 5, 99);
  std::vector<int> sizes(5, 0);
  for (int f : plan.assignments) ++sizes[static_cast<std::size_t>(f)];
  int lo = 23, hi = 0;
  for (int s : sizes) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  CHECK(lo >= 1);
  CHECK(hi - lo <= 1);
  const FoldPlan again = make_fold_plan(23, 5, 99);
  CHECK(plan.assignments == again.assignments);
}

TEST_CASE("lasso-mode residualize satisfies KKT for every fitted column") {
  Xoshiro256pp rng(46);
  DataMatrices data = testutil::make_dataset(80, 2, 1, 2, 3, rng);
  MatrixXd d(80, 3);
  d.col(0).setOnes();
  d.col(1) = random_vector(80, rng);
  d.col(2) = 2.0 * random_vector(80, rng);
  data.d = d;

  ResidualizeOptions opts;
  opts.mode = ResidMode::kLasso;
  opts.penalties.y = 3.0;
  opts.penalties.x = 2.0;
  opts.penalties.z = 4.0;
  opts.penalties.v = 1.5;
  const ResidualizedSample resid = residualize(data, opts);

  auto check_kkt = [&](const MatrixXd& regressors, const MatrixXd& target,
                       const ResidualizerFit& fit, double penalty) {
    for (Eigen::Index c = 0; c < target.cols(); ++c) {
      const VectorXd res = target.col(c) - regressors * fit.coeffs.col(c);
      for (Eigen::Index j = 0; j < regressors.cols(); ++j) {
        const double grad = 2.0 * regressors.col(j).dot(res);
        const bool constant_col =
            regressors.col(j).maxCoeff() == regressors.col(j).minCoeff();
        if (constant_col) {
          CHECK(std::abs(grad) < 1e-6);
        } else if (fit.coeffs(j, c) == 0.0) {
          CHECK(std::abs(grad) <= penalty + 1e-6);
        } else {
          const double sign = fit.coeffs(j, c) > 0.0 ? 1.0 : -1.0;
          CHECK(grad == doctest::Approx(penalty * sign).epsilon(1e-6));
        }
      }
    }
  };

  MatrixXd xd(80, 4);
  xd << data.x, data.d;
  check_kkt(data.d, data.y, resid.fits.gamma_y, 3.0);
  check_kkt(data.d, data.v, resid.fits.gamma_v, 1.5);
  check_kkt(data.d, data.z, resid.fits.gamma_z, 4.0);
  check_kkt(xd, data.z, resid.fits.omega_z, 4.0);
  check_kkt(xd, data.v, resid.fits.omega_v, 1.5);
}
