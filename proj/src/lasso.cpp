#include "proxyctl/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "proxyctl/error.hpp"

namespace proxyctl {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

LassoSolution lasso_gram(const MatrixXd& gram, const VectorXd& crossprod,
                         const VectorXd& penalties, double tol,
                         int max_sweeps) {
  const Eigen::Index p = gram.rows();
  if (gram.cols() != p || crossprod.size() != p || penalties.size() != p) {
    throw DimensionError("lasso_gram: inconsistent system dimensions");
  }
  if (penalties.minCoeff() < 0.0) {
    throw InvalidInputError("lasso_gram: negative penalty");
  }

  LassoSolution sol;
  sol.coeffs = VectorXd::Zero(p);
  // residual_corr tracks crossprod - gram * coeffs, updated per coordinate.
  VectorXd residual_corr = crossprod;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double gjj = gram(j, j);
      if (gjj <= 0.0) continue;
      const double rho = residual_corr(j) + gjj * sol.coeffs(j);
      const double updated = soft_threshold(rho, 0.5 * penalties(j)) / gjj;
      const double change = updated - sol.coeffs(j);
      if (change != 0.0) {
        residual_corr -= gram.col(j) * change;
        sol.coeffs(j) = updated;
        max_change = std::max(max_change, std::abs(change));
      }
    }
    sol.sweeps = sweep + 1;
    if (max_change < tol) {
      sol.converged = true;
      break;
    }
  }
  return sol;
}

LassoSolution lasso_dense(const MatrixXd& regressors, const VectorXd& target,
                          const VectorXd& penalties, double tol,
                          int max_sweeps) {
  if (regressors.rows() != target.size()) {
    throw DimensionError("lasso_dense: row mismatch");
  }
  const MatrixXd gram = regressors.transpose() * regressors;
  const VectorXd crossprod = regressors.transpose() * target;
  return lasso_gram(gram, crossprod, penalties, tol, max_sweeps);
}

double lasso_full_shrinkage_penalty(const MatrixXd& regressors,
                                    const VectorXd& target) {
  return 2.0 * (regressors.transpose() * target).cwiseAbs().maxCoeff();
}

}  // namespace proxyctl
