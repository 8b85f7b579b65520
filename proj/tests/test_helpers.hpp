#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "proxyctl/partialling.hpp"
#include "proxyctl/rng.hpp"

namespace testutil {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                              proxyctl::Xoshiro256pp& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.next_normal();
  }
  return m;
}

inline VectorXd random_vector(Eigen::Index n, proxyctl::Xoshiro256pp& rng) {
  return random_matrix(n, 1, rng).col(0);
}

// Gauss-Jordan inverse with partial pivoting in long double arithmetic.
// Deliberately independent of Eigen's factorizations: this is the oracle
// route for normal-equations and direct-formula checks.
inline MatrixXd gauss_inverse(const MatrixXd& a) {
  const Eigen::Index n = a.rows();
  std::vector<std::vector<long double>> work(
      static_cast<std::size_t>(n), std::vector<long double>(2 * n, 0.0L));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      work[i][j] = static_cast<long double>(a(i, j));
    }
    work[i][static_cast<std::size_t>(n + i)] = 1.0L;
  }
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (std::fabs(static_cast<double>(work[r][col])) >
          std::fabs(static_cast<double>(work[pivot][col]))) {
        pivot = r;
      }
    }
    std::swap(work[col], work[pivot]);
    const long double diag = work[col][col];
    for (Eigen::Index j = 0; j < 2 * n; ++j) work[col][j] /= diag;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const long double factor = work[r][col];
      if (factor == 0.0L) continue;
      for (Eigen::Index j = 0; j < 2 * n; ++j) {
        work[r][j] -= factor * work[col][j];
      }
    }
  }
  MatrixXd inv(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      inv(i, j) = static_cast<double>(work[i][static_cast<std::size_t>(n + j)]);
    }
  }
  return inv;
}

inline double rel_frob(const MatrixXd& diff, const MatrixXd& reference) {
  const double denom = reference.norm();
  return denom > 0.0 ? diff.norm() / denom : diff.norm();
}

// Small synthetic proxy-control dataset with confounding; handy wherever a
// plausible DataMatrices instance is needed.
inline proxyctl::DataMatrices make_dataset(Eigen::Index n, Eigen::Index dw,
                                           Eigen::Index dx, Eigen::Index dz,
                                           Eigen::Index dv,
                                           proxyctl::Xoshiro256pp& rng,
                                           double noise = 1.0) {
  const MatrixXd b0 = random_matrix(dv, dw, rng);
  const MatrixXd t0 = random_matrix(dx, dw, rng);
  const MatrixXd c0 = random_matrix(dz, dw, rng);
  const MatrixXd g0 = random_matrix(dz, dx, rng);
  const MatrixXd f0 = random_matrix(1, dw, rng);
  const MatrixXd chi0 = random_matrix(1, dv, rng);
  const VectorXd beta0 = random_vector(dx, rng);

  proxyctl::DataMatrices data;
  data.y.resize(n, 1);
  data.x.resize(n, dx);
  data.z.resize(n, dz);
  data.v.resize(n, dv);
  data.d = MatrixXd::Ones(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd w = random_vector(dw, rng);
    const VectorXd x = t0 * w + noise * random_vector(dx, rng);
    const VectorXd v = b0 * w + noise * random_vector(dv, rng);
    const VectorXd z = c0 * w + g0 * x + noise * random_vector(dz, rng);
    const double y = beta0.dot(x) + (f0 * w)(0) + (chi0 * v)(0) +
                     noise * rng.next_normal();
    data.x.row(i) = x.transpose();
    data.v.row(i) = v.transpose();
    data.z.row(i) = z.transpose();
    data.y(i, 0) = y;
  }
  return data;
}

}  // namespace testutil
