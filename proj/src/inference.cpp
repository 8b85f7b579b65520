#include "proxyctl/inference.hpp"

#include <cmath>

#include "proxyctl/error.hpp"
#include "proxyctl/numerics.hpp"

namespace proxyctl {

VectorXd score(const VectorXd& x, double y, const VectorXd& z,
               const VectorXd& v, const VectorXd& d, const VectorXd& beta,
               const ScoreNuisances& nu) {
  const Eigen::Index dx = x.size();
  const Eigen::Index dd = d.size();
  if (nu.gamma_x1.rows() != dd || nu.gamma_x1.cols() != dx ||
      nu.gamma_x2.rows() != dd || nu.gamma_x2.cols() != dx ||
      nu.gamma_y.rows() != dd || nu.gamma_v.rows() != dd ||
      nu.gamma_v.cols() != v.size() || nu.omega_z.rows() != dx + dd ||
      nu.omega_z.cols() != z.size() || nu.omega_y.rows() != dx + dd ||
      nu.omega_v.rows() != dx + dd || nu.omega_v.cols() != v.size() ||
      nu.xi.size() != v.size() || nu.mu.rows() != dx ||
      nu.mu.cols() != z.size() || beta.size() != dx) {
    throw DimensionError("score: nuisance shapes do not conform");
  }

  VectorXd xd(dx + dd);
  xd << x, d;

  const VectorXd x_tilde_1 = x - nu.gamma_x1.transpose() * d;
  const VectorXd x_tilde_2 = x - nu.gamma_x2.transpose() * d;
  const double y_tilde = y - (nu.gamma_y.transpose() * d)(0);
  const VectorXd v_tilde = v - nu.gamma_v.transpose() * d;

  const VectorXd z_bar = z - nu.omega_z.transpose() * xd;
  const double y_bar = y - (nu.omega_y.transpose() * xd)(0);
  const VectorXd v_bar = v - nu.omega_v.transpose() * xd;

  const double first_resid =
      y_tilde - nu.xi.dot(v_tilde) - beta.dot(x_tilde_2);
  const double second_resid = y_bar - nu.xi.dot(v_bar);
  return x_tilde_1 * first_resid - nu.mu * z_bar * second_resid;
}

MatrixXd variance(const ScoreSet& set) {
  const Eigen::Index n = set.scores.rows();
  if (n < 2) throw InvalidInputError("variance: need at least 2 scores");
  if (set.sigma_x.rows() != set.scores.cols() ||
      set.sigma_x.cols() != set.scores.cols()) {
    throw DimensionError("variance: sigma_x shape mismatch");
  }
  const MatrixXd sx_pinv = pinv(set.sigma_x);
  const MatrixXd rotated = set.scores * sx_pinv;  // rows are Sx+ g_i
  MatrixXd out = rotated.transpose() * rotated / static_cast<double>(n);
  return 0.5 * (out + out.transpose());
}

ConfidenceInterval confidence_interval(const VectorXd& beta,
                                       const MatrixXd& sigma2,
                                       const VectorXd& contrast, double level,
                                       Eigen::Index n) {
  if (level <= 0.0 || level >= 1.0) {
    throw InvalidInputError("confidence_interval: level outside (0, 1)");
  }
  if (beta.size() != contrast.size() || sigma2.rows() != beta.size() ||
      sigma2.cols() != beta.size()) {
    throw DimensionError("confidence_interval: shape mismatch");
  }
  if (n < 1) throw InvalidInputError("confidence_interval: n must be >= 1");
  ConfidenceInterval ci;
  ci.contrast = contrast;
  ci.level = level;
  ci.center = contrast.dot(beta);
  const double alpha = 1.0 - level;
  const double quantile = norm_ppf(1.0 - alpha / 2.0);
  const double var = contrast.dot(sigma2 * contrast);
  const double half_width =
      quantile * std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  ci.lower = ci.center - half_width;
  ci.upper = ci.center + half_width;
  return ci;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

namespace {

// Acklam's rational approximation to the standard normal quantile.
double norm_ppf_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double norm_ppf(double p) {
  if (p <= 0.0 || p >= 1.0) {
    throw InvalidInputError("norm_ppf: p outside (0, 1)");
  }
  double x = norm_ppf_approx(p);
  // One Newton step against the exact erfc-based CDF.
  const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  if (density > 0.0) x -= (norm_cdf(x) - p) / density;
  return x;
}

}  // namespace proxyctl
