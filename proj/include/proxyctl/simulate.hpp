#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "proxyctl/partialling.hpp"
#include "proxyctl/rng.hpp"

namespace proxyctl {

// Ground-truth parameters of the linear proxy-control generative model:
//   V = B0 W + upsilon,  X = T0 W + eps,  Z = C0 W + G0 X + eta,
//   Y = X'beta0 + F0 W + chi0 V + e,  W ~ N(0, I).
struct DgpParams {
  VectorXd beta0;   // d_X
  MatrixXd b0;      // d_V x d_W
  MatrixXd t0;      // d_X x d_W
  MatrixXd c0;      // d_Z x d_W
  MatrixXd g0;      // d_Z x d_X
  MatrixXd f0;      // 1 x d_W
  MatrixXd chi0;    // 1 x d_V
  MatrixXd sigma_v, sigma_x, sigma_z, sigma_y;  // residual covariances, PSD

  Eigen::Index dw() const { return b0.cols(); }
  Eigen::Index dx() const { return beta0.size(); }
  Eigen::Index dv() const { return b0.rows(); }
  Eigen::Index dz() const { return c0.rows(); }
};

struct DgpSpec {
  Eigen::Index d_w = 10;
  Eigen::Index d_x = 1;
  Eigen::Index d_v = 10;
  Eigen::Index d_z = 10;
  Eigen::Index n = 1000;
  int p = 2;  // inverse-Wishart degrees-of-freedom hyperparameter
  std::uint64_t seed = 0;
  // Multiplies every drawn residual covariance; 0 removes residual noise.
  double noise_scale = 1.0;
  std::optional<DgpParams> params_override;

  void validate() const;
};

struct SimulatedDataset {
  DataMatrices data;  // d is a lone ones column
  DgpParams params;
  MatrixXd w;  // n x d_W latent draw, retained for diagnostics only
};

// Coefficient entries are N(0, 1/sqrt(cols)) with cols the input dimension
// of each map; covariances are rescaled inverse Wishart, d p Sigma^{-1} ~
// W_d(I, d p).
DgpParams draw_params(const DgpSpec& spec, Xoshiro256pp& rng);

SimulatedDataset draw_dataset(const DgpParams& params, Eigen::Index n,
                              Xoshiro256pp& rng);

// W_d(identity scale, dof) by Bartlett decomposition.
MatrixXd sample_wishart_identity(Eigen::Index dim, Eigen::Index dof,
                                 Xoshiro256pp& rng);

// Exact second moments implied by the model; the backbone of the
// identification and double-robustness oracles. Joint covariance layout is
// (y, x, z, v).
struct PopulationMoments {
  MatrixXd joint_cov;
  Eigen::Index y_offset = 0, x_offset = 0, z_offset = 0, v_offset = 0;

  MatrixXd sigma_x_tilde;  // E[Xt Xt']
  MatrixXd exv_tilde;      // E[Xt Vt']
  MatrixXd ezz_bar;        // E[Zb Zb']
  MatrixXd ezv_bar;        // E[Zb Vb']
  VectorXd ezy_bar;        // E[Zb Yb]
  MatrixXd m0;             // d_V x (d_Z + d_X)
  MatrixXd mu0;            // d_X x d_Z
  VectorXd xi0;            // minimal-l1 candidate solving E[Zb(Yb - xi'Vb)] = 0
  MatrixXd c_star;         // d_W x d_Z, population regression of W on Zb
  MatrixXd g_star;         // d_W x d_X, population regression of W on Xt
  MatrixXd omega_z0, omega_y0, omega_v0;  // (d_X + 1) x {d_Z, 1, d_V}
  bool degenerate = false;

  // Cross-moment block of the joint covariance, e.g. cov(z_offset, d_Z,
  // x_offset, d_X) = E[Z X'].
  MatrixXd cov_block(Eigen::Index row_off, Eigen::Index rows,
                     Eigen::Index col_off, Eigen::Index cols) const {
    return joint_cov.block(row_off, col_off, rows, cols);
  }
};

PopulationMoments population_moments(const DgpParams& params);

// A 2(1 + d_X + d_Z + d_V)-row sample whose Gram moments equal the
// population moments exactly: interleaved +/- rows of the symmetric square
// root of the joint covariance. Running the estimators on it realizes the
// population-level identities at machine precision.
DataMatrices population_exact_sample(const DgpParams& params);

}  // namespace proxyctl
