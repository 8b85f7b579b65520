#include "proxyctl/estimators.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "proxyctl/error.hpp"
#include "proxyctl/lasso.hpp"
#include "proxyctl/numerics.hpp"
#include "proxyctl/rng.hpp"

namespace proxyctl {

namespace {

double sv_ratio(const MatrixXd& a) {
  if (a.rows() == 0 || a.cols() == 0) return 0.0;
  Eigen::BDCSVD<MatrixXd> svd(a);
  const VectorXd& sv = svd.singularValues();
  const double hi = sv(0);
  if (hi <= 0.0) return 0.0;
  return sv(sv.size() - 1) / hi;
}

MatrixXd j_matrix_from_m(const MatrixXd& m_hat, Eigen::Index dz,
                         Eigen::Index dx) {
  const Eigen::Index dv = m_hat.rows();
  MatrixXd j = MatrixXd::Zero(dz + dx, dx + dv);
  j.block(dz, 0, dx, dx).setIdentity();
  j.rightCols(dv) = m_hat.transpose();
  return j;
}

FixedRankEstimate assemble_fixed_rank(const DataMatrices& data,
                                      const ResidualizedSample& resid,
                                      const RrrCore& core, Eigen::Index r,
                                      std::optional<double> lambda) {
  const Eigen::Index dx = data.dx();
  const Eigen::Index dz = data.dz();

  FixedRankEstimate est;
  est.rank_used = r;
  est.rrr.omega = core.omega;
  est.rrr.q_eigs = core.eig.values;
  est.rrr.e_vectors = core.eig.vectors;
  est.rrr.rank = r;
  est.rrr.m_hat = m_from_core(core, r);
  est.rrr.lambda = lambda;
  est.j_matrix = j_matrix_from_m(est.rrr.m_hat, dz, dx);

  const MatrixXd gram = est.j_matrix.transpose() * core.omega * est.j_matrix;
  const VectorXd rhs = est.j_matrix.transpose() *
                       (resid.zx_hat().transpose() * resid.y_hat.col(0));
  const VectorXd coef = pinv(gram) * rhs;
  est.beta = coef.head(dx);

  est.diagnostics.identification_sv_ratio = sv_ratio(gram);
  est.diagnostics.degenerate_gram =
      est.diagnostics.identification_sv_ratio < 1e-10;
  return est;
}

}  // namespace

FixedRankEstimate estimate_fixed_rank(const DataMatrices& data,
                                      Eigen::Index r) {
  data.validate();
  if (r < 0 || r > data.dv()) {
    throw InvalidInputError("estimate_fixed_rank: rank outside [0, d_V]");
  }
  if (data.n() <= data.dx() + data.dd()) {
    throw InvalidInputError("estimate_fixed_rank: n must exceed d_X + d_D");
  }
  const ResidualizedSample resid = residualize(data);
  const RrrCore core = rrr_core(resid.v_hat, resid.zx_hat());
  return assemble_fixed_rank(data, resid, core, r, std::nullopt);
}

FixedRankEstimate estimate_adaptive(const DataMatrices& data,
                                    const AdaptiveOptions& opts) {
  data.validate();
  if (data.n() <= data.dx() + data.dd()) {
    throw InvalidInputError("estimate_adaptive: n must exceed d_X + d_D");
  }
  double lambda = 0.0;
  std::optional<CvLambdaResult> cv;
  if (opts.lambda) {
    lambda = *opts.lambda;
  } else {
    cv = cv_lambda(data, opts.cv_folds, std::nullopt, opts.seed);
    lambda = cv->lambda;
  }
  const ResidualizedSample resid = residualize(data);
  const RrrCore core = rrr_core(resid.v_hat, resid.zx_hat());
  const Eigen::Index r = select_rank(core.eig.values, lambda);
  FixedRankEstimate est = assemble_fixed_rank(data, resid, core, r, lambda);
  est.cv = std::move(cv);
  return est;
}

XiEstimate estimate_xi(const ResidualizedSample& resid,
                       const MatrixXd& m_unrestricted, double delta) {
  if (delta < 0.0) throw InvalidInputError("estimate_xi: negative penalty");
  const Eigen::Index dz = resid.z_check.cols();
  const Eigen::Index dv = resid.v_hat.cols();
  if (m_unrestricted.rows() != dv || m_unrestricted.cols() < dz) {
    throw DimensionError("estimate_xi: m shape mismatch");
  }

  const MatrixXd design =
      resid.z_check * m_unrestricted.leftCols(dz).transpose();  // n x d_V
  const VectorXd target = resid.y_check.col(0);
  const Eigen::Index n = design.rows();

  XiEstimate est;
  est.penalty = delta;
  est.design_means = design.colwise().mean();
  est.design_scales = VectorXd::Ones(dv);
  MatrixXd std_design = design.rowwise() - est.design_means.transpose();
  for (Eigen::Index j = 0; j < dv; ++j) {
    const double sd = std::sqrt(std_design.col(j).squaredNorm() /
                                static_cast<double>(n));
    if (sd > 0.0) {
      est.design_scales(j) = sd;
      std_design.col(j) /= sd;
    }
  }
  est.target_mean = target.mean();
  VectorXd std_target = target.array() - est.target_mean;
  const double target_sd =
      std::sqrt(std_target.squaredNorm() / static_cast<double>(n));
  est.target_scale = target_sd > 0.0 ? target_sd : 1.0;
  std_target /= est.target_scale;

  const VectorXd penalties = VectorXd::Constant(dv, delta);
  const LassoSolution sol = lasso_dense(std_design, std_target, penalties);

  est.xi = sol.coeffs;
  for (Eigen::Index j = 0; j < dv; ++j) {
    est.xi(j) *= est.target_scale / est.design_scales(j);
  }
  return est;
}

MatrixXd estimate_mu(const ResidualizedSample& resid, const MatrixXd& m_hat,
                     double* sv_ratio_out) {
  const Eigen::Index dz = resid.z_check.cols();
  const Eigen::Index dx = resid.x_hat.cols();
  if (m_hat.rows() != resid.v_hat.cols() || m_hat.cols() != dz + dx) {
    throw DimensionError("estimate_mu: m shape mismatch");
  }
  const MatrixXd mz = m_hat.leftCols(dz);  // d_V x d_Z
  const MatrixXd cross =
      resid.x_hat.transpose() * resid.zx_hat() * m_hat.transpose();
  const MatrixXd zc_gram = resid.z_check.transpose() * resid.z_check;
  const MatrixXd inner = mz * zc_gram * mz.transpose();
  if (sv_ratio_out != nullptr) {
    // A rank-restricted m makes the inner Gram rank-deficient by design;
    // weakness means near-collapse within the fit's own rank.
    Eigen::BDCSVD<MatrixXd> m_svd(mz);
    Eigen::Index m_rank = 0;
    const auto& msv = m_svd.singularValues();
    for (Eigen::Index i = 0; i < msv.size(); ++i) {
      if (msv(i) > 1e-12 * msv(0)) ++m_rank;
    }
    Eigen::BDCSVD<MatrixXd> inner_svd(inner);
    const auto& isv = inner_svd.singularValues();
    if (m_rank == 0 || isv(0) <= 0.0) {
      *sv_ratio_out = 0.0;
    } else {
      *sv_ratio_out = isv(std::min(m_rank, isv.size()) - 1) / isv(0);
    }
  }
  return cross * pinv(inner) * mz;
}

namespace {

DrFoldInputs inputs_from_fits(const ResidualizerSet& fits,
                              const XiEstimate& xi, const MatrixXd& mu,
                              Eigen::Index rank) {
  DrFoldInputs in;
  in.gamma_y = fits.gamma_y.coeffs;
  in.gamma_x = fits.gamma_x.coeffs;
  in.gamma_v = fits.gamma_v.coeffs;
  in.omega_z = fits.omega_z.coeffs;
  in.omega_y = fits.omega_y.coeffs;
  in.omega_v = fits.omega_v.coeffs;
  in.xi = xi.xi;
  in.mu = mu;
  in.rank = rank;
  return in;
}

void check_plan(const DataMatrices& data, const FoldPlan& plan) {
  if (static_cast<Eigen::Index>(plan.assignments.size()) != data.n()) {
    throw DimensionError("fold plan length does not match the sample");
  }
  if (plan.folds < 2) throw InvalidInputError("need at least 2 folds");
  for (int j = 0; j < plan.folds; ++j) {
    const auto fold = plan.fold_rows(j);
    if (fold.empty()) throw InvalidInputError("empty fold");
    const Eigen::Index complement = data.n() - static_cast<Eigen::Index>(fold.size());
    if (complement <= data.dx() + data.dd()) {
      throw InvalidInputError("fold complement too small to fit nuisances");
    }
  }
}

}  // namespace

DrEstimate dr_assemble(const DataMatrices& data, const FoldPlan& plan,
                       const std::vector<DrFoldInputs>& inputs) {
  data.validate();
  check_plan(data, plan);
  if (static_cast<int>(inputs.size()) != plan.folds) {
    throw DimensionError("dr_assemble: one nuisance set per fold required");
  }
  const Eigen::Index n = data.n();
  const Eigen::Index dx = data.dx();

  MatrixXd xd(n, data.dx() + data.dd());
  xd << data.x, data.d;

  MatrixXd sigma_x = MatrixXd::Zero(dx, dx);
  VectorXd numerator = VectorXd::Zero(dx);
  for (int j = 0; j < plan.folds; ++j) {
    const DrFoldInputs& in = inputs[static_cast<std::size_t>(j)];
    const auto rows = plan.fold_rows(j);
    const DataMatrices sub = data.select_rows(rows);
    MatrixXd xd_sub(sub.n(), dx + data.dd());
    xd_sub << sub.x, sub.d;

    const MatrixXd x_hat = sub.x - sub.d * in.gamma_x;
    const VectorXd y_hat = sub.y.col(0) - sub.d * in.gamma_y;
    const MatrixXd v_hat = sub.v - sub.d * in.gamma_v;
    const MatrixXd z_check = sub.z - xd_sub * in.omega_z;
    const VectorXd y_check = sub.y.col(0) - xd_sub * in.omega_y;
    const MatrixXd v_check = sub.v - xd_sub * in.omega_v;

    const VectorXd first_resid = y_hat - v_hat * in.xi;
    const VectorXd second_resid = y_check - v_check * in.xi;
    numerator += x_hat.transpose() * first_resid -
                 in.mu * (z_check.transpose() * second_resid);
    sigma_x += x_hat.transpose() * x_hat;
  }
  sigma_x /= static_cast<double>(n);
  numerator /= static_cast<double>(n);

  DrEstimate est;
  est.folds = plan.folds;
  est.sigma_x = sigma_x;
  est.beta = pinv(sigma_x) * numerator;

  est.scores = MatrixXd::Zero(n, dx);
  for (int j = 0; j < plan.folds; ++j) {
    const DrFoldInputs& in = inputs[static_cast<std::size_t>(j)];
    ScoreNuisances nu;
    nu.xi = in.xi;
    nu.mu = in.mu;
    nu.gamma_y = in.gamma_y;
    nu.gamma_v = in.gamma_v;
    nu.gamma_x1 = in.gamma_x;
    nu.gamma_x2 = in.gamma_x;
    nu.omega_z = in.omega_z;
    nu.omega_y = in.omega_y;
    nu.omega_v = in.omega_v;
    for (const Eigen::Index i : plan.fold_rows(j)) {
      est.scores.row(i) = score(data.x.row(i).transpose(), data.y(i, 0),
                                data.z.row(i).transpose(),
                                data.v.row(i).transpose(),
                                data.d.row(i).transpose(), est.beta, nu)
                              .transpose();
    }
  }
  est.sigma2 = variance({est.scores, est.sigma_x});
  return est;
}

DrEstimate estimate_dr(const DataMatrices& data, const FoldPlan& plan,
                       const DrOptions& opts) {
  data.validate();
  check_plan(data, plan);
  const Eigen::Index dv = data.dv();
  // Default penalty d_V / n stated for the mean-squared objective; on the
  // raw sum-of-squares scale that is d_V.
  const double delta = opts.delta ? *opts.delta : static_cast<double>(dv);
  if (delta < 0.0) throw InvalidInputError("estimate_dr: negative delta");

  double shared_lambda = 0.0;
  if (opts.lambda) {
    shared_lambda = *opts.lambda;
  } else if (!opts.per_fold_cv) {
    shared_lambda = cv_lambda(data, opts.cv_folds, std::nullopt, opts.seed).lambda;
  }

  std::vector<DrFoldInputs> inputs;
  std::vector<FoldNuisances> records;
  inputs.reserve(static_cast<std::size_t>(plan.folds));
  for (int j = 0; j < plan.folds; ++j) {
    const auto train = plan.complement_rows(j);
    double lambda_j = shared_lambda;
    if (!opts.lambda && opts.per_fold_cv) {
      lambda_j = cv_lambda(data.select_rows(train), opts.cv_folds, std::nullopt,
                           derive_seed(opts.seed, static_cast<std::uint64_t>(j) + 1))
                     .lambda;
    }
    const ResidualizedSample resid =
        residualize(data, train, all_rows(data.n()));
    const ResidualizedSample resid_train = resid.select_rows(train);
    const RrrCore core = rrr_core(resid_train.v_hat, resid_train.zx_hat());
    const Eigen::Index rank_j = select_rank(core.eig.values, lambda_j);
    const MatrixXd m_j = m_from_core(core, rank_j);
    double mu_svr = 1.0;
    const MatrixXd mu_j = estimate_mu(resid_train, m_j, &mu_svr);
    const MatrixXd m_unrestricted = m_from_core(core, dv);
    const XiEstimate xi_j = estimate_xi(resid_train, m_unrestricted, delta);

    inputs.push_back(inputs_from_fits(resid.fits, xi_j, mu_j, rank_j));
    FoldNuisances rec;
    rec.inputs = inputs.back();
    rec.xi_detail = xi_j;
    rec.q_eigs = core.eig.values;
    rec.lambda_used = lambda_j;
    rec.mu_sv_ratio = mu_svr;
    records.push_back(std::move(rec));
  }

  DrEstimate est = dr_assemble(data, plan, inputs);
  est.delta = delta;
  est.per_fold = std::move(records);
  for (const auto& rec : est.per_fold) {
    est.diagnostics.identification_sv_ratio =
        std::min(est.diagnostics.identification_sv_ratio, rec.mu_sv_ratio);
  }
  est.diagnostics.weak_identification =
      est.diagnostics.identification_sv_ratio < 1e-10;
  return est;
}

VectorXd estimate_naive_ols(const DataMatrices& data) {
  data.validate();
  if (data.n() <= data.dx() + data.dv() + data.dd()) {
    throw InvalidInputError("estimate_naive_ols: n too small");
  }
  MatrixXd design(data.n(), data.dx() + data.dv() + data.dd());
  design << data.x, data.v, data.d;
  const VectorXd coef = pinv(design.transpose() * design) *
                        (design.transpose() * data.y.col(0));
  return coef.head(data.dx());
}

TslsEstimate estimate_2sls(const DataMatrices& data) {
  data.validate();
  if (data.dz() < data.dv()) {
    throw UnderIdentifiedError(
        "estimate_2sls: need at least as many instruments as endogenous "
        "regressors (d_Z >= d_V)");
  }
  MatrixXd instruments(data.n(), data.dx() + data.dz() + data.dd());
  instruments << data.x, data.z, data.d;
  MatrixXd regressors(data.n(), data.dx() + data.dv() + data.dd());
  regressors << data.x, data.v, data.d;

  const MatrixXd w_gram = instruments.transpose() * instruments;
  const MatrixXd fitted =
      instruments * (pinv(w_gram) * (instruments.transpose() * regressors));
  const MatrixXd fitted_gram = fitted.transpose() * fitted;

  TslsEstimate est;
  est.first_stage_sv_ratio = sv_ratio(fitted_gram);
  est.weak_instruments = est.first_stage_sv_ratio < 1e-10;
  const VectorXd coef =
      pinv(fitted_gram) * (fitted.transpose() * data.y.col(0));
  est.beta = coef.head(data.dx());
  return est;
}

}  // namespace proxyctl
