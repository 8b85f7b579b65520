#include "proxyctl/simulate.hpp"

#include <cmath>

#include "proxyctl/error.hpp"
#include "proxyctl/lasso.hpp"
#include "proxyctl/numerics.hpp"

namespace proxyctl {

void DgpSpec::validate() const {
  if (d_w < 1 || d_x < 1 || d_v < 1 || d_z < 1) {
    throw InvalidInputError("DgpSpec: all dimensions must be >= 1");
  }
  if (n < 1) throw InvalidInputError("DgpSpec: n must be >= 1");
  if (p < 1) throw InvalidInputError("DgpSpec: p must be >= 1");
  if (noise_scale < 0.0) {
    throw InvalidInputError("DgpSpec: noise_scale must be >= 0");
  }
}

namespace {

// Entry standard deviation 1/sqrt(cols), so each variable keeps a constant
// ratio of structural variance to residual variance as dimensions grow.
// Filled row by row; the draw order is part of the reproducibility contract.
MatrixXd draw_coeff_matrix(Eigen::Index rows, Eigen::Index cols,
                           Xoshiro256pp& rng) {
  const double sd = std::pow(static_cast<double>(cols), -0.5);
  MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      out(i, j) = sd * rng.next_normal();
    }
  }
  return out;
}

double chi_square(Eigen::Index dof, Xoshiro256pp& rng) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < dof; ++k) {
    const double u = rng.next_normal();
    sum += u * u;
  }
  return sum;
}

// Sigma = d p G^{-1} with G ~ W_d(I, d p).
MatrixXd draw_rescaled_inverse_wishart(Eigen::Index dim, int p,
                                       Xoshiro256pp& rng) {
  const Eigen::Index dof = dim * p;
  const MatrixXd g = sample_wishart_identity(dim, dof, rng);
  const MatrixXd sigma = static_cast<double>(dof) * pinv(g);
  return 0.5 * (sigma + sigma.transpose());
}

}  // namespace

MatrixXd sample_wishart_identity(Eigen::Index dim, Eigen::Index dof,
                                 Xoshiro256pp& rng) {
  if (dof < dim) {
    throw InvalidInputError("sample_wishart_identity: dof must be >= dim");
  }
  // Bartlett factor: lower triangular, chi on the diagonal, standard normal
  // below it.
  MatrixXd a = MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    a(i, i) = std::sqrt(chi_square(dof - i, rng));
    for (Eigen::Index j = 0; j < i; ++j) {
      a(i, j) = rng.next_normal();
    }
  }
  return a * a.transpose();
}

DgpParams draw_params(const DgpSpec& spec, Xoshiro256pp& rng) {
  spec.validate();
  if (spec.params_override) return *spec.params_override;

  DgpParams params;
  // beta0 maps X to Y, so its input dimension (column count) is d_X.
  params.beta0 = draw_coeff_matrix(1, spec.d_x, rng).row(0).transpose();
  params.b0 = draw_coeff_matrix(spec.d_v, spec.d_w, rng);
  params.t0 = draw_coeff_matrix(spec.d_x, spec.d_w, rng);
  params.c0 = draw_coeff_matrix(spec.d_z, spec.d_w, rng);
  params.g0 = draw_coeff_matrix(spec.d_z, spec.d_x, rng);
  params.f0 = draw_coeff_matrix(1, spec.d_w, rng);
  params.chi0 = draw_coeff_matrix(1, spec.d_v, rng);
  params.sigma_v = draw_rescaled_inverse_wishart(spec.d_v, spec.p, rng);
  params.sigma_x = draw_rescaled_inverse_wishart(spec.d_x, spec.p, rng);
  params.sigma_z = draw_rescaled_inverse_wishart(spec.d_z, spec.p, rng);
  params.sigma_y = draw_rescaled_inverse_wishart(1, spec.p, rng);
  if (spec.noise_scale != 1.0) {
    params.sigma_v *= spec.noise_scale;
    params.sigma_x *= spec.noise_scale;
    params.sigma_z *= spec.noise_scale;
    params.sigma_y *= spec.noise_scale;
  }
  return params;
}

SimulatedDataset draw_dataset(const DgpParams& params, Eigen::Index n,
                              Xoshiro256pp& rng) {
  if (n < 1) throw InvalidInputError("draw_dataset: n must be >= 1");
  const Eigen::Index dw = params.dw();
  const Eigen::Index dx = params.dx();
  const Eigen::Index dv = params.dv();
  const Eigen::Index dz = params.dz();

  // sqrt_psd tolerates exactly-zero covariances, unlike Cholesky.
  const MatrixXd root_v = sqrt_psd(params.sigma_v);
  const MatrixXd root_x = sqrt_psd(params.sigma_x);
  const MatrixXd root_z = sqrt_psd(params.sigma_z);
  const double root_y = std::sqrt(std::max(params.sigma_y(0, 0), 0.0));

  SimulatedDataset out;
  out.params = params;
  out.w = MatrixXd(n, dw);
  out.data.v = MatrixXd(n, dv);
  out.data.x = MatrixXd(n, dx);
  out.data.z = MatrixXd(n, dz);
  out.data.y = MatrixXd(n, 1);
  out.data.d = MatrixXd::Ones(n, 1);

  VectorXd buf_w(dw), buf_v(dv), buf_x(dx), buf_z(dz);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < dw; ++k) buf_w(k) = rng.next_normal();
    for (Eigen::Index k = 0; k < dv; ++k) buf_v(k) = rng.next_normal();
    for (Eigen::Index k = 0; k < dx; ++k) buf_x(k) = rng.next_normal();
    for (Eigen::Index k = 0; k < dz; ++k) buf_z(k) = rng.next_normal();
    const double e = root_y * rng.next_normal();

    out.w.row(i) = buf_w.transpose();
    const VectorXd v = params.b0 * buf_w + root_v * buf_v;
    const VectorXd x = params.t0 * buf_w + root_x * buf_x;
    const VectorXd z = params.c0 * buf_w + params.g0 * x + root_z * buf_z;
    const double y = params.beta0.dot(x) + (params.f0 * buf_w)(0) +
                     (params.chi0 * v)(0) + e;
    out.data.v.row(i) = v.transpose();
    out.data.x.row(i) = x.transpose();
    out.data.z.row(i) = z.transpose();
    out.data.y(i, 0) = y;
  }
  return out;
}

namespace {

// Minimal-l1 candidate for A xi = c: a small-penalty lasso finds the
// support, then an exact solve on that support; min-norm fallback when the
// restricted system is inconsistent.
VectorXd min_l1_candidate(const MatrixXd& a, const VectorXd& c) {
  const VectorXd fallback = pinv(a) * c;
  const double scale = c.cwiseAbs().maxCoeff();
  if (scale <= 0.0) return VectorXd::Zero(a.cols());

  const double penalty = 1e-8 * scale * scale;
  const VectorXd penalties = VectorXd::Constant(a.cols(), penalty);
  const LassoSolution sol = lasso_dense(a, c, penalties, 1e-12, 50000);

  const double support_cut = 1e-6 * sol.coeffs.cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> support;
  for (Eigen::Index j = 0; j < sol.coeffs.size(); ++j) {
    if (std::abs(sol.coeffs(j)) > support_cut) support.push_back(j);
  }
  if (support.empty()) return fallback;

  MatrixXd a_sub(a.rows(), static_cast<Eigen::Index>(support.size()));
  for (std::size_t k = 0; k < support.size(); ++k) {
    a_sub.col(static_cast<Eigen::Index>(k)) = a.col(support[k]);
  }
  const VectorXd sub = pinv(a_sub) * c;
  if ((a_sub * sub - c).norm() > 1e-10 * scale) return fallback;
  VectorXd xi = VectorXd::Zero(a.cols());
  for (std::size_t k = 0; k < support.size(); ++k) {
    xi(support[k]) = sub(static_cast<Eigen::Index>(k));
  }
  return xi;
}

double min_sv_ratio(const MatrixXd& a) {
  Eigen::BDCSVD<MatrixXd> svd(a);
  const VectorXd& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) <= 0.0) return 0.0;
  return sv(sv.size() - 1) / sv(0);
}

}  // namespace

PopulationMoments population_moments(const DgpParams& params) {
  const Eigen::Index dw = params.dw();
  const Eigen::Index dx = params.dx();
  const Eigen::Index dv = params.dv();
  const Eigen::Index dz = params.dz();
  const Eigen::Index ds = dw + dv + dx + dz + 1;

  // Latent source s = (w, upsilon, eps, eta, e) with block-diagonal
  // covariance; every observable is a linear map of s.
  MatrixXd sigma_s = MatrixXd::Zero(ds, ds);
  sigma_s.block(0, 0, dw, dw).setIdentity();
  sigma_s.block(dw, dw, dv, dv) = params.sigma_v;
  sigma_s.block(dw + dv, dw + dv, dx, dx) = params.sigma_x;
  sigma_s.block(dw + dv + dx, dw + dv + dx, dz, dz) = params.sigma_z;
  sigma_s(ds - 1, ds - 1) = params.sigma_y(0, 0);

  MatrixXd l_w = MatrixXd::Zero(dw, ds);
  l_w.block(0, 0, dw, dw).setIdentity();
  MatrixXd l_v = MatrixXd::Zero(dv, ds);
  l_v.block(0, 0, dv, dw) = params.b0;
  l_v.block(0, dw, dv, dv).setIdentity();
  MatrixXd l_x = MatrixXd::Zero(dx, ds);
  l_x.block(0, 0, dx, dw) = params.t0;
  l_x.block(0, dw + dv, dx, dx).setIdentity();
  MatrixXd l_z = MatrixXd::Zero(dz, ds);
  l_z.block(0, 0, dz, dw) = params.c0 + params.g0 * params.t0;
  l_z.block(0, dw + dv, dz, dx) = params.g0;
  l_z.block(0, dw + dv + dx, dz, dz).setIdentity();
  MatrixXd l_y = MatrixXd::Zero(1, ds);
  l_y.block(0, 0, 1, dw) =
      params.f0 + params.beta0.transpose() * params.t0 + params.chi0 * params.b0;
  l_y.block(0, dw, 1, dv) = params.chi0;
  l_y.block(0, dw + dv, 1, dx) = params.beta0.transpose();
  l_y(0, ds - 1) = 1.0;

  auto cross = [&sigma_s](const MatrixXd& la, const MatrixXd& lb) {
    return MatrixXd(la * sigma_s * lb.transpose());
  };

  PopulationMoments pm;
  pm.y_offset = 0;
  pm.x_offset = 1;
  pm.z_offset = 1 + dx;
  pm.v_offset = 1 + dx + dz;
  const Eigen::Index total = 1 + dx + dz + dv;
  MatrixXd stacked_l(total, ds);
  stacked_l << l_y, l_x, l_z, l_v;
  pm.joint_cov = stacked_l * sigma_s * stacked_l.transpose();
  pm.joint_cov = 0.5 * (pm.joint_cov + pm.joint_cov.transpose());

  const MatrixXd cov_xx = cross(l_x, l_x);
  const MatrixXd cov_xz = cross(l_x, l_z);
  const MatrixXd cov_xv = cross(l_x, l_v);
  const MatrixXd cov_xy = cross(l_x, l_y);
  const MatrixXd cov_zz = cross(l_z, l_z);
  const MatrixXd cov_zv = cross(l_z, l_v);
  const MatrixXd cov_zy = cross(l_z, l_y);
  const MatrixXd cov_vv = cross(l_v, l_v);
  const MatrixXd cov_wz = cross(l_w, l_z);
  const MatrixXd cov_wx = cross(l_w, l_x);

  pm.sigma_x_tilde = cov_xx;
  pm.exv_tilde = cov_xv;

  const MatrixXd xx_pinv = pinv(cov_xx);
  pm.ezz_bar = cov_zz - cov_xz.transpose() * xx_pinv * cov_xz;
  pm.ezz_bar = 0.5 * (pm.ezz_bar + pm.ezz_bar.transpose());
  pm.ezv_bar = cov_zv - cov_xz.transpose() * xx_pinv * cov_xv;
  pm.ezy_bar = cov_zy - cov_xz.transpose() * xx_pinv * cov_xy;

  // M0: population regression coefficient of V on the stacked (Z, X).
  MatrixXd szx(dz + dx, dz + dx);
  szx << cov_zz, cov_xz.transpose(), cov_xz, cov_xx;
  MatrixXd cvzx(dv, dz + dx);
  cvzx << cov_zv.transpose(), cov_xv.transpose();
  pm.m0 = cvzx * pinv(szx);

  const MatrixXd m0z = pm.m0.leftCols(dz);
  MatrixXd ex_zx(dx, dz + dx);
  ex_zx << cov_xz, cov_xx;
  const MatrixXd inner = m0z * pm.ezz_bar * m0z.transpose();
  pm.mu0 = ex_zx * pm.m0.transpose() * pinv(inner) * m0z;

  pm.xi0 = min_l1_candidate(pm.ezv_bar, pm.ezy_bar.col(0));

  pm.c_star = cov_wz * pinv(pm.ezz_bar) -
              cov_wx * xx_pinv * cov_xz * pinv(pm.ezz_bar);
  pm.g_star = cov_wx * xx_pinv;

  pm.omega_z0 = MatrixXd::Zero(dx + 1, dz);
  pm.omega_z0.topRows(dx) = xx_pinv * cov_xz;
  pm.omega_y0 = MatrixXd::Zero(dx + 1, 1);
  pm.omega_y0.topRows(dx) = xx_pinv * cov_xy;
  pm.omega_v0 = MatrixXd::Zero(dx + 1, dv);
  pm.omega_v0.topRows(dx) = xx_pinv * cov_xv;

  pm.degenerate = min_sv_ratio(szx) < 1e-12 || min_sv_ratio(cov_xx) < 1e-12 ||
                  min_sv_ratio(pm.ezz_bar) < 1e-12;
  (void)cov_vv;
  return pm;
}

DataMatrices population_exact_sample(const DgpParams& params) {
  const PopulationMoments pm = population_moments(params);
  const MatrixXd root = sqrt_psd(pm.joint_cov);
  const Eigen::Index total = root.rows();
  const Eigen::Index dx = params.dx();
  const Eigen::Index dz = params.dz();
  const Eigen::Index dv = params.dv();

  // Interleaved +/- rows: column sums vanish and every Gram equals twice the
  // population moment, which the scale-invariant estimators cannot tell
  // apart from the population itself.
  MatrixXd rows(2 * total, total);
  for (Eigen::Index k = 0; k < total; ++k) {
    rows.row(2 * k) = root.row(k);
    rows.row(2 * k + 1) = -root.row(k);
  }

  DataMatrices data;
  data.y = rows.middleCols(pm.y_offset, 1);
  data.x = rows.middleCols(pm.x_offset, dx);
  data.z = rows.middleCols(pm.z_offset, dz);
  data.v = rows.middleCols(pm.v_offset, dv);
  data.d = MatrixXd::Ones(2 * total, 1);
  return data;
}

}  // namespace proxyctl
