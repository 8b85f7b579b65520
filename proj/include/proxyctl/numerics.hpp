#pragma once

#include <Eigen/Dense>

namespace proxyctl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Symmetric eigendecomposition, eigenvalues sorted descending, columns of
// `vectors` aligned with `values`. Each eigenvector is sign-normalized so its
// largest-magnitude entry is positive.
struct SymEig {
  VectorXd values;
  MatrixXd vectors;
};

// Moore-Penrose pseudo-inverse via SVD. Singular values <= rtol * sigma_max
// are treated as zero. rtol < 0 selects the default max(rows, cols) * eps.
MatrixXd pinv(const MatrixXd& a, double rtol = -1.0);

// Eigendecomposition of (a + a') / 2. Throws DimensionError on non-square
// input.
SymEig eig_sym(const MatrixXd& a);

// Symmetric PSD square root: returns B with BB ~= a. Throws NotPsdError when
// an eigenvalue falls below -1e-8 * max |eigenvalue|.
MatrixXd sqrt_psd(const MatrixXd& a);

// Lower Cholesky factor of a symmetric positive definite matrix.
MatrixXd cholesky_lower(const MatrixXd& a);

// True when every entry is finite.
bool all_finite(const MatrixXd& a);

}  // namespace proxyctl
