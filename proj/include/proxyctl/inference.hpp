#pragma once

#include <Eigen/Dense>

namespace proxyctl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Nuisance arguments of the doubly-robust score. gamma_x1 and gamma_x2 are
// deliberately separate: the X residualizer enters the score in two places
// and the robustness property treats the occurrences as distinct arguments.
struct ScoreNuisances {
  VectorXd xi;        // d_V
  MatrixXd mu;        // d_X x d_Z
  MatrixXd gamma_y;   // d_D x 1
  MatrixXd gamma_v;   // d_D x d_V
  MatrixXd gamma_x1;  // d_D x d_X
  MatrixXd gamma_x2;  // d_D x d_X
  MatrixXd omega_z;   // (d_X + d_D) x d_Z
  MatrixXd omega_y;   // (d_X + d_D) x 1
  MatrixXd omega_v;   // (d_X + d_D) x d_V
};

// Doubly-robust score for one observation, evaluated from the raw row:
//   g = Xt(g_x1) (Yt(g_y) - xi'Vt(g_v) - beta'Xt(g_x2))
//       - mu Zb(w_z) (Yb(w_y) - xi'Vb(w_v))
// where Ht(g) = h - g'd and Hb(w) = h - w'(x', d')'.
VectorXd score(const VectorXd& x, double y, const VectorXd& z,
               const VectorXd& v, const VectorXd& d, const VectorXd& beta,
               const ScoreNuisances& nu);

struct ScoreSet {
  MatrixXd scores;   // n x d_X per-observation scores
  MatrixXd sigma_x;  // d_X^2
};

// DML2 sandwich: (1/n) sum Sx+ g_i g_i' Sx+, symmetrized.
MatrixXd variance(const ScoreSet& scores);

struct ConfidenceInterval {
  VectorXd contrast;
  double level = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double center = 0.0;
};

// [l'beta +- Phi^{-1}(1 - alpha/2) sqrt(l' sigma2 l / n)].
ConfidenceInterval confidence_interval(const VectorXd& beta,
                                       const MatrixXd& sigma2,
                                       const VectorXd& contrast, double level,
                                       Eigen::Index n);

// Standard Gaussian CDF and quantile. The quantile uses a rational
// approximation polished by one Newton step; accurate to ~1e-15.
double norm_cdf(double x);
double norm_ppf(double p);

}  // namespace proxyctl
