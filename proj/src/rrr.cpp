#include "proxyctl/rrr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "proxyctl/error.hpp"
#include "proxyctl/folds.hpp"

namespace proxyctl {

RrrCore rrr_core(const MatrixXd& v_hat, const MatrixXd& zx_hat) {
  if (v_hat.rows() != zx_hat.rows()) {
    throw DimensionError("rrr_core: row mismatch");
  }
  RrrCore core;
  core.omega = zx_hat.transpose() * zx_hat;
  core.omega_pinv = pinv(core.omega);
  const MatrixXd cross = zx_hat.transpose() * v_hat;  // (dz+dx) x d_V
  core.coef_unrestricted = core.omega_pinv * cross;
  core.q = cross.transpose() * core.coef_unrestricted;
  core.eig = eig_sym(core.q);
  return core;
}

MatrixXd m_from_core(const RrrCore& core, Eigen::Index r) {
  const Eigen::Index dv = core.q.rows();
  if (r < 0 || r > dv) {
    throw InvalidInputError("m_fixed_rank: rank outside [0, d_V]");
  }
  if (r == 0) {
    return MatrixXd::Zero(dv, core.omega.rows());
  }
  const MatrixXd er = core.eig.vectors.leftCols(r);
  // coef_unrestricted * Er Er' is the paper's closed form, oriented with V
  // coordinates along columns; transpose to put V along rows.
  return (core.coef_unrestricted * er * er.transpose()).transpose();
}

std::pair<MatrixXd, MatrixXd> compute_q(const MatrixXd& v_hat,
                                        const MatrixXd& zx_hat) {
  const RrrCore core = rrr_core(v_hat, zx_hat);
  return {core.omega, core.q};
}

MatrixXd m_fixed_rank(const MatrixXd& v_hat, const MatrixXd& zx_hat,
                      Eigen::Index r) {
  return m_from_core(rrr_core(v_hat, zx_hat), r);
}

double rrr_objective(const MatrixXd& m, const MatrixXd& v_hat,
                     const MatrixXd& zx_hat) {
  if (m.rows() != v_hat.cols() || m.cols() != zx_hat.cols() ||
      v_hat.rows() != zx_hat.rows()) {
    throw DimensionError("rrr_objective: shape mismatch");
  }
  return (v_hat - zx_hat * m.transpose()).squaredNorm();
}

Eigen::Index select_rank(const VectorXd& q_eigs_descending, double lambda) {
  if (q_eigs_descending.size() == 0) return 0;
  const double max_eig = q_eigs_descending(0);
  const double zero_cutoff = 1e-10 * std::max(max_eig, 0.0);
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < q_eigs_descending.size(); ++i) {
    if (q_eigs_descending(i) >= lambda && q_eigs_descending(i) > zero_cutoff) {
      ++count;
    }
  }
  return count;
}

std::vector<double> default_lambda_grid(const VectorXd& eigs,
                                        double noise_level) {
  std::set<double> grid;
  double min_positive = 0.0;
  double max_eig = 0.0;
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    if (eigs(i) > 0.0) {
      min_positive = eigs(i);  // descending order: last positive wins
      max_eig = std::max(max_eig, eigs(i));
    }
  }
  // Candidates below the noise level are excluded: null eigenvalues of Q
  // concentrate below sigma^2 (sqrt(d_ZX) + sqrt(d_V))^2, so thresholds
  // down there only chase sampling noise.
  const double floor = std::min(noise_level, max_eig);
  for (Eigen::Index i = 0; i + 1 < eigs.size(); ++i) {
    const double mid = 0.5 * (eigs(i) + eigs(i + 1));
    if (mid > floor) grid.insert(mid);
  }
  if (min_positive > 0.0 && 0.5 * min_positive > floor) {
    grid.insert(0.5 * min_positive);
  }
  if (max_eig > 0.0) {
    if (floor > 0.0) grid.insert(floor);
    grid.insert(2.0 * max_eig);
  }
  if (grid.empty()) grid.insert(0.0);
  return {grid.begin(), grid.end()};
}

double rrr_noise_level(const MatrixXd& v_hat, const MatrixXd& zx_hat,
                       const VectorXd& q_eigs) {
  // trace(Q) is the fitted sum of squares of the unrestricted regression, so
  // the residual variance needs no extra pass over the data.
  const double residual_ss =
      std::max(v_hat.squaredNorm() - q_eigs.sum(), 0.0);
  const double sigma2 =
      residual_ss / (static_cast<double>(v_hat.rows()) *
                     static_cast<double>(v_hat.cols()));
  const double root_sum = std::sqrt(static_cast<double>(zx_hat.cols())) +
                          std::sqrt(static_cast<double>(v_hat.cols()));
  return sigma2 * root_sum * root_sum;
}

CvLambdaResult cv_lambda(const DataMatrices& data, int folds,
                         std::optional<std::vector<double>> grid,
                         std::uint64_t seed) {
  data.validate();
  if (folds < 2) throw InvalidInputError("cv_lambda: need at least 2 folds");
  if (data.n() < 2 * folds) {
    throw InvalidInputError("cv_lambda: need n >= 2 * folds");
  }

  std::vector<double> lambdas;
  if (grid && !grid->empty()) {
    lambdas = *grid;
    std::sort(lambdas.begin(), lambdas.end());
  } else {
    const ResidualizedSample full = residualize(data);
    const RrrCore core = rrr_core(full.v_hat, full.zx_hat());
    lambdas = default_lambda_grid(
        core.eig.values,
        rrr_noise_level(full.v_hat, full.zx_hat(), core.eig.values));
  }

  const FoldPlan plan = make_fold_plan(data.n(), folds, seed);
  const Eigen::Index dv = data.dv();

  // score_by_rank[j][r]: held-out SSE of fold j's rank-r fit. Computing it in
  // the eigenbasis makes every rank an O(1) prefix-sum read.
  std::vector<std::vector<double>> score_by_rank(
      static_cast<std::size_t>(folds));
  std::vector<VectorXd> fold_eigs(static_cast<std::size_t>(folds));
  for (int j = 0; j < folds; ++j) {
    const auto train = plan.complement_rows(j);
    const auto test = plan.fold_rows(j);
    const ResidualizedSample resid =
        residualize(data, train, all_rows(data.n()));
    const ResidualizedSample resid_train = resid.select_rows(train);
    const ResidualizedSample resid_test = resid.select_rows(test);
    const RrrCore core = rrr_core(resid_train.v_hat, resid_train.zx_hat());
    fold_eigs[static_cast<std::size_t>(j)] = core.eig.values;

    const MatrixXd pred_full = resid_test.zx_hat() * core.coef_unrestricted;
    const MatrixXd a = resid_test.v_hat * core.eig.vectors;  // n_j x d_V
    const MatrixXd t = pred_full * core.eig.vectors;
    const VectorXd diff_sq = (a - t).colwise().squaredNorm();
    const VectorXd a_sq = a.colwise().squaredNorm();

    auto& scores = score_by_rank[static_cast<std::size_t>(j)];
    scores.assign(static_cast<std::size_t>(dv) + 1, 0.0);
    scores[0] = a_sq.sum();
    for (Eigen::Index r = 1; r <= dv; ++r) {
      scores[static_cast<std::size_t>(r)] =
          scores[static_cast<std::size_t>(r - 1)] + diff_sq(r - 1) -
          a_sq(r - 1);
    }
  }

  CvLambdaResult out;
  double best_score = std::numeric_limits<double>::infinity();
  for (const double lambda : lambdas) {
    double score = 0.0;
    for (int j = 0; j < folds; ++j) {
      const Eigen::Index r =
          select_rank(fold_eigs[static_cast<std::size_t>(j)], lambda);
      score += score_by_rank[static_cast<std::size_t>(j)]
                            [static_cast<std::size_t>(r)];
    }
    out.curve.push_back({lambda, score});
    if (score <= best_score) {  // ascending grid: ties go to larger lambda
      best_score = score;
      out.lambda = lambda;
    }
  }
  return out;
}

}  // namespace proxyctl
