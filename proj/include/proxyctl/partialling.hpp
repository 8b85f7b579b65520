#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace proxyctl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// The observed sample. `d` always carries an intercept: its first column is
// identically one.
struct DataMatrices {
  MatrixXd y;  // n x 1, outcome
  MatrixXd x;  // n x d_X, treatments
  MatrixXd z;  // n x d_Z, negative control treatments
  MatrixXd v;  // n x d_V, negative control outcomes
  MatrixXd d;  // n x d_D, controls, first column all ones

  Eigen::Index n() const { return y.rows(); }
  Eigen::Index dx() const { return x.cols(); }
  Eigen::Index dz() const { return z.cols(); }
  Eigen::Index dv() const { return v.cols(); }
  Eigen::Index dd() const { return d.cols(); }

  // Throws InvalidInputError / DimensionError when an invariant fails.
  void validate() const;

  DataMatrices select_rows(const std::vector<Eigen::Index>& rows) const;
};

enum class ResidMode { kOls, kLasso };

struct ResidualizerFit {
  MatrixXd coeffs;  // regressors.cols() x target.cols()
  ResidMode mode = ResidMode::kOls;
  std::string target_role;
};

// The gamma fits regress on D; the omega fits regress on (X, D).
struct ResidualizerSet {
  ResidualizerFit gamma_y, gamma_x, gamma_z, gamma_v;
  ResidualizerFit omega_y, omega_z, omega_v;
};

// Hat variables have D partialled out, check variables have (X, D)
// partialled out; both are aligned with the apply_on rows they were built
// from.
struct ResidualizedSample {
  MatrixXd y_hat, x_hat, z_hat, v_hat;
  MatrixXd y_check, z_check, v_check;
  ResidualizerSet fits;

  MatrixXd zx_hat() const;  // [z_hat, x_hat]
  ResidualizedSample select_rows(const std::vector<Eigen::Index>& rows) const;
};

struct RolePenalties {
  std::optional<double> y, x, z, v;
};

struct ResidualizeOptions {
  ResidMode mode = ResidMode::kOls;
  // Lasso mode only: per-role penalties; a missing entry is filled by 5-fold
  // cross-validation over a 20-point geometric grid.
  RolePenalties penalties;
  std::uint64_t seed = 0;
};

// coeffs = (R'R)+ R' target.
ResidualizerFit fit_ols_residualizer(const MatrixXd& regressors,
                                     const MatrixXd& target);

// Minimizes sum_i (h_i - w'r_i)^2 + penalty * sum_j |w_j| over the
// non-constant columns; constant (intercept) columns are unpenalized.
// Columns are standardized to unit variance internally and the coefficients
// mapped back, so the returned fit solves the objective above exactly.
ResidualizerFit fit_lasso_residualizer(const MatrixXd& regressors,
                                       const MatrixXd& target_column,
                                       double penalty);

// Fits every residualizer on `fit_on` rows and produces hat/check matrices
// for `apply_on` rows. fit_on = apply_on = all rows reproduces the no-split
// quantities.
ResidualizedSample residualize(const DataMatrices& data,
                               const std::vector<Eigen::Index>& fit_on,
                               const std::vector<Eigen::Index>& apply_on,
                               const ResidualizeOptions& opts = {});

ResidualizedSample residualize(const DataMatrices& data,
                               const ResidualizeOptions& opts = {});

}  // namespace proxyctl
