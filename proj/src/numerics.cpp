#include "proxyctl/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "proxyctl/error.hpp"

namespace proxyctl {

bool all_finite(const MatrixXd& a) { return a.allFinite(); }

MatrixXd pinv(const MatrixXd& a, double rtol) {
  if (!a.allFinite()) {
    throw InvalidInputError("pinv: input has non-finite entries");
  }
  if (a.rows() == 0 || a.cols() == 0) {
    return MatrixXd::Zero(a.cols(), a.rows());
  }
  if (rtol < 0.0) {
    rtol = static_cast<double>(std::max(a.rows(), a.cols())) *
           std::numeric_limits<double>::epsilon();
  }
  Eigen::BDCSVD<MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& sv = svd.singularValues();
  const double cutoff = rtol * (sv.size() > 0 ? sv(0) : 0.0);
  VectorXd inv_sv = VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv_sv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

void fix_eigvec_signs(MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index imax = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&imax);
    if (vectors(imax, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }
}

}  // namespace

SymEig eig_sym(const MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("eig_sym: matrix must be square");
  }
  if (!a.allFinite()) {
    throw InvalidInputError("eig_sym: input has non-finite entries");
  }
  const MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw InvalidInputError("eig_sym: eigendecomposition failed to converge");
  }
  SymEig out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  fix_eigvec_signs(out.vectors);
  return out;
}

MatrixXd sqrt_psd(const MatrixXd& a) {
  SymEig eig = eig_sym(a);
  const double scale = eig.values.size() > 0 ? eig.values.cwiseAbs().maxCoeff() : 0.0;
  VectorXd clipped = eig.values;
  for (Eigen::Index i = 0; i < clipped.size(); ++i) {
    if (clipped(i) < -1e-8 * scale) {
      throw NotPsdError("sqrt_psd: matrix has a negative eigenvalue");
    }
    clipped(i) = std::sqrt(std::max(clipped(i), 0.0));
  }
  return eig.vectors * clipped.asDiagonal() * eig.vectors.transpose();
}

MatrixXd cholesky_lower(const MatrixXd& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("cholesky_lower: matrix must be square");
  }
  Eigen::LLT<MatrixXd> llt(0.5 * (a + a.transpose()));
  if (llt.info() != Eigen::Success) {
    throw NotPsdError("cholesky_lower: matrix is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace proxyctl
