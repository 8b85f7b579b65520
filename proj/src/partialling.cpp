#include "proxyctl/partialling.hpp"

#include <cmath>

#include "proxyctl/error.hpp"
#include "proxyctl/folds.hpp"
#include "proxyctl/lasso.hpp"
#include "proxyctl/numerics.hpp"
#include "proxyctl/rng.hpp"

namespace proxyctl {

void DataMatrices::validate() const {
  const Eigen::Index rows = y.rows();
  if (rows < 1) throw InvalidInputError("DataMatrices: empty sample");
  if (y.cols() != 1) throw DimensionError("DataMatrices: y must have one column");
  if (x.rows() != rows || z.rows() != rows || v.rows() != rows ||
      d.rows() != rows) {
    throw DimensionError("DataMatrices: row counts differ");
  }
  if (d.cols() < 1) throw InvalidInputError("DataMatrices: d needs >= 1 column");
  if ((d.col(0).array() != 1.0).any()) {
    throw InvalidInputError("DataMatrices: first column of d must be all ones");
  }
  if (!y.allFinite() || !x.allFinite() || !z.allFinite() || !v.allFinite() ||
      !d.allFinite()) {
    throw InvalidInputError("DataMatrices: non-finite entries");
  }
}

namespace {

MatrixXd take_rows(const MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

}  // namespace

DataMatrices DataMatrices::select_rows(
    const std::vector<Eigen::Index>& rows) const {
  DataMatrices out;
  out.y = take_rows(y, rows);
  out.x = take_rows(x, rows);
  out.z = take_rows(z, rows);
  out.v = take_rows(v, rows);
  out.d = take_rows(d, rows);
  return out;
}

MatrixXd ResidualizedSample::zx_hat() const {
  MatrixXd out(z_hat.rows(), z_hat.cols() + x_hat.cols());
  out << z_hat, x_hat;
  return out;
}

ResidualizedSample ResidualizedSample::select_rows(
    const std::vector<Eigen::Index>& rows) const {
  ResidualizedSample out;
  out.y_hat = take_rows(y_hat, rows);
  out.x_hat = take_rows(x_hat, rows);
  out.z_hat = take_rows(z_hat, rows);
  out.v_hat = take_rows(v_hat, rows);
  out.y_check = take_rows(y_check, rows);
  out.z_check = take_rows(z_check, rows);
  out.v_check = take_rows(v_check, rows);
  out.fits = fits;
  return out;
}

ResidualizerFit fit_ols_residualizer(const MatrixXd& regressors,
                                     const MatrixXd& target) {
  if (regressors.rows() != target.rows()) {
    throw DimensionError("fit_ols_residualizer: row mismatch");
  }
  ResidualizerFit fit;
  fit.mode = ResidMode::kOls;
  fit.coeffs = pinv(regressors.transpose() * regressors) *
               (regressors.transpose() * target);
  return fit;
}

namespace {

struct ColumnScaling {
  VectorXd scale;            // 1 for constant columns
  std::vector<bool> constant;
};

ColumnScaling column_scaling(const MatrixXd& regressors) {
  ColumnScaling cs;
  const Eigen::Index p = regressors.cols();
  cs.scale = VectorXd::Ones(p);
  cs.constant.assign(static_cast<std::size_t>(p), false);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double lo = regressors.col(j).minCoeff();
    const double hi = regressors.col(j).maxCoeff();
    if (lo == hi) {
      cs.constant[static_cast<std::size_t>(j)] = true;
      continue;
    }
    const double mean = regressors.col(j).mean();
    const double var =
        (regressors.col(j).array() - mean).square().mean();
    if (var > 0.0) cs.scale(j) = std::sqrt(var);
  }
  return cs;
}

// Solves the exact objective sum (h - w'r)^2 + penalty * sum_{j penalized}
// |w_j| by scaling columns to unit variance and adjusting the per-column
// penalty accordingly.
VectorXd lasso_column_fit(const MatrixXd& regressors, const VectorXd& target,
                          double penalty, const ColumnScaling& cs) {
  const Eigen::Index p = regressors.cols();
  MatrixXd scaled = regressors;
  VectorXd penalties(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (cs.constant[static_cast<std::size_t>(j)]) {
      penalties(j) = 0.0;
    } else {
      scaled.col(j) /= cs.scale(j);
      penalties(j) = penalty / cs.scale(j);
    }
  }
  LassoSolution sol = lasso_dense(scaled, target, penalties);
  VectorXd coeffs = sol.coeffs;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!cs.constant[static_cast<std::size_t>(j)]) coeffs(j) /= cs.scale(j);
  }
  return coeffs;
}

}  // namespace

ResidualizerFit fit_lasso_residualizer(const MatrixXd& regressors,
                                       const MatrixXd& target_column,
                                       double penalty) {
  if (regressors.rows() != target_column.rows()) {
    throw DimensionError("fit_lasso_residualizer: row mismatch");
  }
  if (target_column.cols() != 1) {
    throw DimensionError("fit_lasso_residualizer: target must be one column");
  }
  if (penalty < 0.0) {
    throw InvalidInputError("fit_lasso_residualizer: negative penalty");
  }
  ResidualizerFit fit;
  fit.mode = ResidMode::kLasso;
  const ColumnScaling cs = column_scaling(regressors);
  fit.coeffs = lasso_column_fit(regressors, target_column.col(0), penalty, cs);
  return fit;
}

namespace {

// Shared penalty for all columns of one role, chosen by K-fold CV on the
// fitting rows over a geometric grid anchored at the full-shrinkage
// threshold. Ties go to the larger penalty.
double cv_lasso_penalty(const MatrixXd& regressors, const MatrixXd& targets,
                        std::uint64_t seed) {
  constexpr int kGridSize = 20;
  constexpr int kFolds = 5;
  const Eigen::Index n = regressors.rows();
  const ColumnScaling cs = column_scaling(regressors);

  MatrixXd scaled = regressors;
  for (Eigen::Index j = 0; j < regressors.cols(); ++j) {
    if (!cs.constant[static_cast<std::size_t>(j)]) scaled.col(j) /= cs.scale(j);
  }
  double lambda_max = 0.0;
  for (Eigen::Index c = 0; c < targets.cols(); ++c) {
    lambda_max = std::max(lambda_max,
                          lasso_full_shrinkage_penalty(scaled, targets.col(c)));
  }
  if (lambda_max <= 0.0) return 0.0;

  std::vector<double> grid(kGridSize);
  const double ratio = std::pow(1e-4, 1.0 / (kGridSize - 1));
  for (int g = 0; g < kGridSize; ++g) {
    grid[static_cast<std::size_t>(g)] = lambda_max * std::pow(ratio, g);
  }

  const int folds = static_cast<int>(std::min<Eigen::Index>(kFolds, n));
  if (folds < 2) return grid[grid.size() / 2];
  const FoldPlan plan = make_fold_plan(n, folds, seed);

  std::vector<double> score(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    const auto train = plan.complement_rows(f);
    const auto test = plan.fold_rows(f);
    const MatrixXd r_train = take_rows(regressors, train);
    const MatrixXd r_test = take_rows(regressors, test);
    const ColumnScaling cs_f = column_scaling(r_train);
    for (Eigen::Index c = 0; c < targets.cols(); ++c) {
      const VectorXd h_train = take_rows(targets, train).col(c);
      const VectorXd h_test = take_rows(targets, test).col(c);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const VectorXd w = lasso_column_fit(r_train, h_train, grid[g], cs_f);
        score[g] += (h_test - r_test * w).squaredNorm();
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (score[g] < score[best]) best = g;  // grid is descending in penalty
  }
  return grid[best];
}

ResidualizerFit fit_role(const MatrixXd& regressors, const MatrixXd& target,
                         const std::string& role, ResidMode mode,
                         std::optional<double> penalty, std::uint64_t seed) {
  if (mode == ResidMode::kOls) {
    ResidualizerFit fit = fit_ols_residualizer(regressors, target);
    fit.target_role = role;
    return fit;
  }
  const double pen =
      penalty ? *penalty
              : cv_lasso_penalty(regressors, target,
                                 derive_seed(seed, std::hash<std::string>{}(role)));
  ResidualizerFit fit;
  fit.mode = ResidMode::kLasso;
  fit.target_role = role;
  fit.coeffs = MatrixXd(regressors.cols(), target.cols());
  const ColumnScaling cs = column_scaling(regressors);
  for (Eigen::Index c = 0; c < target.cols(); ++c) {
    fit.coeffs.col(c) = lasso_column_fit(regressors, target.col(c), pen, cs);
  }
  return fit;
}

}  // namespace

ResidualizedSample residualize(const DataMatrices& data,
                               const std::vector<Eigen::Index>& fit_on,
                               const std::vector<Eigen::Index>& apply_on,
                               const ResidualizeOptions& opts) {
  data.validate();
  if (fit_on.empty()) {
    throw InvalidInputError("residualize: fit_on must be nonempty");
  }
  for (const auto& idx : {fit_on, apply_on}) {
    for (Eigen::Index i : idx) {
      if (i < 0 || i >= data.n()) {
        throw InvalidInputError("residualize: row index out of range");
      }
    }
  }

  const MatrixXd d_fit = take_rows(data.d, fit_on);
  const MatrixXd x_fit = take_rows(data.x, fit_on);
  MatrixXd xd_fit(d_fit.rows(), data.dx() + data.dd());
  xd_fit << x_fit, d_fit;

  ResidualizedSample out;
  auto& fits = out.fits;
  fits.gamma_y = fit_role(d_fit, take_rows(data.y, fit_on), "y", opts.mode,
                          opts.penalties.y, opts.seed);
  fits.gamma_x = fit_role(d_fit, x_fit, "x", opts.mode, opts.penalties.x,
                          opts.seed);
  fits.gamma_z = fit_role(d_fit, take_rows(data.z, fit_on), "z", opts.mode,
                          opts.penalties.z, opts.seed);
  fits.gamma_v = fit_role(d_fit, take_rows(data.v, fit_on), "v", opts.mode,
                          opts.penalties.v, opts.seed);
  fits.omega_y = fit_role(xd_fit, take_rows(data.y, fit_on), "y", opts.mode,
                          opts.penalties.y, derive_seed(opts.seed, 1));
  fits.omega_z = fit_role(xd_fit, take_rows(data.z, fit_on), "z", opts.mode,
                          opts.penalties.z, derive_seed(opts.seed, 1));
  fits.omega_v = fit_role(xd_fit, take_rows(data.v, fit_on), "v", opts.mode,
                          opts.penalties.v, derive_seed(opts.seed, 1));

  const MatrixXd d_apply = take_rows(data.d, apply_on);
  const MatrixXd x_apply = take_rows(data.x, apply_on);
  MatrixXd xd_apply(d_apply.rows(), data.dx() + data.dd());
  xd_apply << x_apply, d_apply;

  out.y_hat = take_rows(data.y, apply_on) - d_apply * fits.gamma_y.coeffs;
  out.x_hat = x_apply - d_apply * fits.gamma_x.coeffs;
  out.z_hat = take_rows(data.z, apply_on) - d_apply * fits.gamma_z.coeffs;
  out.v_hat = take_rows(data.v, apply_on) - d_apply * fits.gamma_v.coeffs;
  out.y_check = take_rows(data.y, apply_on) - xd_apply * fits.omega_y.coeffs;
  out.z_check = take_rows(data.z, apply_on) - xd_apply * fits.omega_z.coeffs;
  out.v_check = take_rows(data.v, apply_on) - xd_apply * fits.omega_v.coeffs;
  return out;
}

ResidualizedSample residualize(const DataMatrices& data,
                               const ResidualizeOptions& opts) {
  const auto idx = all_rows(data.n());
  return residualize(data, idx, idx, opts);
}

}  // namespace proxyctl
