#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "proxyctl/folds.hpp"
#include "proxyctl/inference.hpp"
#include "proxyctl/partialling.hpp"
#include "proxyctl/rrr.hpp"

namespace proxyctl {

struct EstimatorDiagnostics {
  bool degenerate_gram = false;       // a Gram matrix was rank-deficient
  bool weak_identification = false;   // mu Gram nearly singular
  double identification_sv_ratio = 1.0;
};

struct FixedRankEstimate {
  VectorXd beta;
  Eigen::Index rank_used = 0;
  RrrFit rrr;
  MatrixXd j_matrix;  // (d_Z + d_X) x (d_X + d_V)
  std::optional<CvLambdaResult> cv;  // present when adaptive estimation ran CV
  EstimatorDiagnostics diagnostics;
};

struct XiEstimate {
  VectorXd xi;  // original scale
  double penalty = 0.0;
  // Standardization record for the penalized problem.
  VectorXd design_means;
  VectorXd design_scales;
  double target_mean = 0.0;
  double target_scale = 1.0;
};

// Nuisance values entering the doubly-robust assembly for one fold. These
// are usually fitted on the fold complement but can be supplied directly
// (e.g. population values in oracle checks).
struct DrFoldInputs {
  MatrixXd gamma_y, gamma_x, gamma_v;        // d_D x {1, d_X, d_V}
  MatrixXd omega_z, omega_y, omega_v;        // (d_X + d_D) x {d_Z, 1, d_V}
  VectorXd xi;                               // d_V
  MatrixXd mu;                               // d_X x d_Z
  Eigen::Index rank = 0;
};

struct FoldNuisances {
  DrFoldInputs inputs;
  XiEstimate xi_detail;
  VectorXd q_eigs;  // fold-complement spectrum behind the rank choice
  double lambda_used = 0.0;
  double mu_sv_ratio = 1.0;
};

struct DrEstimate {
  VectorXd beta;
  MatrixXd sigma2;
  int folds = 0;
  double delta = 0.0;
  std::vector<FoldNuisances> per_fold;
  MatrixXd scores;   // n x d_X, fold-wise plug-in scores at beta
  MatrixXd sigma_x;  // d_X^2
  EstimatorDiagnostics diagnostics;
};

// Algorithm: residualize on D, eigendecompose Q, take the rank-r closed form
// and solve the stacked least-squares system for beta.
FixedRankEstimate estimate_fixed_rank(const DataMatrices& data,
                                      Eigen::Index r);

struct AdaptiveOptions {
  std::optional<double> lambda;  // absent: cross-validate
  int cv_folds = 5;
  std::uint64_t seed = 0;
};

// Rank-selection variant: identical to estimate_fixed_rank at
// r = select_rank(q_eigs, lambda). rank_used doubles as the estimate of the
// number of confounders.
FixedRankEstimate estimate_adaptive(const DataMatrices& data,
                                    const AdaptiveOptions& opts = {});

// Penalized least squares of y_check on z_check * m[:, 1:d_Z]', both sides
// standardized to mean zero and unit variance, coefficients mapped back.
XiEstimate estimate_xi(const ResidualizedSample& resid,
                       const MatrixXd& m_unrestricted, double delta);

// Sample analogue of the mu parameter. sv_ratio_out, when given, receives
// the min/max singular value ratio of the inner Gram (weak-identification
// diagnostic).
MatrixXd estimate_mu(const ResidualizedSample& resid, const MatrixXd& m_hat,
                     double* sv_ratio_out = nullptr);

struct DrOptions {
  std::optional<double> lambda;  // absent: full-sample CV, reused per fold
  // Lasso penalty on the raw sum-of-squares scale; absent selects d_V
  // (the d_V/n rate stated for the mean-squared objective).
  std::optional<double> delta;
  bool per_fold_cv = false;      // strict mode: re-validate within each fold
  int cv_folds = 5;
  std::uint64_t seed = 0;
};

// Cross-fitted doubly-robust estimator with sandwich variance.
DrEstimate estimate_dr(const DataMatrices& data, const FoldPlan& plan,
                       const DrOptions& opts = {});

// Assembly step alone, from externally supplied per-fold nuisances.
DrEstimate dr_assemble(const DataMatrices& data, const FoldPlan& plan,
                       const std::vector<DrFoldInputs>& inputs);

// OLS of y on (x, v, d); returns the x-block coefficients.
VectorXd estimate_naive_ols(const DataMatrices& data);

struct TslsEstimate {
  VectorXd beta;
  bool weak_instruments = false;
  double first_stage_sv_ratio = 1.0;
};

// Two-stage least squares of y on (x, v, d) instrumenting v with z.
TslsEstimate estimate_2sls(const DataMatrices& data);

}  // namespace proxyctl
