#pragma once

#include <Eigen/Dense>

namespace proxyctl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Cyclic coordinate descent for
//   min_w  ||y - R w||^2 + sum_j penalties[j] * |w_j|
// operating on the precomputed Gram system (gram = R'R, crossprod = R'y).
// penalties[j] = 0 leaves column j unpenalized. Stops when the largest
// coefficient change in a sweep falls below `tol` or after `max_sweeps`.
struct LassoSolution {
  VectorXd coeffs;
  int sweeps = 0;
  bool converged = false;
};

LassoSolution lasso_gram(const MatrixXd& gram, const VectorXd& crossprod,
                         const VectorXd& penalties, double tol = 1e-8,
                         int max_sweeps = 10000);

// Convenience wrapper forming the Gram system from a dense design.
LassoSolution lasso_dense(const MatrixXd& regressors, const VectorXd& target,
                          const VectorXd& penalties, double tol = 1e-8,
                          int max_sweeps = 10000);

// Smallest uniform penalty that shrinks every penalized coefficient of the
// design to zero: 2 * ||R' y||_inf over the penalized columns.
double lasso_full_shrinkage_penalty(const MatrixXd& regressors,
                                    const VectorXd& target);

}  // namespace proxyctl
