#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "proxyctl/numerics.hpp"
#include "proxyctl/partialling.hpp"

namespace proxyctl {

// Reduced-rank regression of v_hat on (z_hat, x_hat): eigenstructure of
// Q = V'(ZX) Omega+ (V'(ZX))' plus the selected-rank coefficient.
struct RrrFit {
  MatrixXd omega;     // (d_Z + d_X)^2 Gram of the design
  VectorXd q_eigs;    // eigenvalues of Q, descending
  MatrixXd e_vectors; // d_V x d_V orthonormal
  Eigen::Index rank = 0;
  MatrixXd m_hat;     // d_V x (d_Z + d_X), rows are V coordinates
  std::optional<double> lambda;  // absent for fixed-rank fits
};

// Shared factorization work: one Gram, one pseudo-inverse, one
// eigendecomposition serve every rank.
struct RrrCore {
  MatrixXd omega;
  MatrixXd omega_pinv;
  MatrixXd coef_unrestricted;  // (d_Z + d_X) x d_V, = Omega+ (ZX)'V
  MatrixXd q;
  SymEig eig;
};

RrrCore rrr_core(const MatrixXd& v_hat, const MatrixXd& zx_hat);

// m_hat (d_V x (d_Z + d_X)) from a core at rank r.
MatrixXd m_from_core(const RrrCore& core, Eigen::Index r);

// (omega, q). Throws DimensionError on row mismatch.
std::pair<MatrixXd, MatrixXd> compute_q(const MatrixXd& v_hat,
                                        const MatrixXd& zx_hat);

// Closed-form rank-r coefficient; r = d_V gives the unrestricted
// least-squares coefficient, r = 0 gives zeros.
MatrixXd m_fixed_rank(const MatrixXd& v_hat, const MatrixXd& zx_hat,
                      Eigen::Index r);

// ||v_hat - zx_hat m'||_F^2.
double rrr_objective(const MatrixXd& m, const MatrixXd& v_hat,
                     const MatrixXd& zx_hat);

// Number of eigenvalues >= lambda, ignoring values at or below the relative
// zero cutoff 1e-10 * max eigenvalue. Input must be sorted descending.
Eigen::Index select_rank(const VectorXd& q_eigs_descending, double lambda);

struct CvPoint {
  double lambda;
  double score;
};

struct CvLambdaResult {
  double lambda = 0.0;
  std::vector<CvPoint> curve;
};

// Cross-validates the rank-selection threshold. Every fold refits the
// residualizers and the RRR eigenstructure on the fold complement and scores
// the held-out rows; ties break toward the larger lambda. The default grid
// is built from the full-sample eigenvalues of Q: midpoints between
// consecutive eigenvalues plus half the smallest positive and twice the
// largest.
CvLambdaResult cv_lambda(const DataMatrices& data, int folds,
                         std::optional<std::vector<double>> grid = std::nullopt,
                         std::uint64_t seed = 0);

// Default CV grid: eigenvalue-gap midpoints above the noise level, plus the
// noise level itself and twice the spectral radius.
std::vector<double> default_lambda_grid(const VectorXd& q_eigs_descending,
                                        double noise_level);

// Estimated null-eigenvalue scale of Q: sigma_hat^2 (sqrt(d_ZX) + sqrt(d_V))^2.
double rrr_noise_level(const MatrixXd& v_hat, const MatrixXd& zx_hat,
                       const VectorXd& q_eigs);

}  // namespace proxyctl
