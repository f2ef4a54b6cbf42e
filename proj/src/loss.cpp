#include "vicreg/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace vicreg {

namespace {

void check_batch_pair(const Matrix& z, const Matrix& z_prime, const char* what) {
  require_same_shape(z, z_prime, what);
  require_min_rows(z, 2, what);
  require_finite(z, what);
  require_finite(z_prime, what);
}

// Statistic per column plus the derivative of the statistic with respect to
// the column's variance.
RowVector hinge_statistic(const RowVector& var, double epsilon, HingeStatistic stat) {
  if (stat == HingeStatistic::kVariance) return var;
  return (var.array() + epsilon).sqrt().matrix();
}

}  // namespace

void LossCoefficients::validate() const {
  const bool finite = std::isfinite(lambda) && std::isfinite(mu) && std::isfinite(nu) &&
                      std::isfinite(gamma) && std::isfinite(epsilon);
  if (!finite) throw std::invalid_argument("loss coefficients must be finite");
  if (lambda < 0.0 || mu < 0.0 || nu < 0.0) {
    throw std::invalid_argument("loss weights lambda, mu, nu must be non-negative");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
}

double variance_term(const Matrix& z, double gamma, double epsilon, HingeStatistic stat) {
  require_min_rows(z, 2, "variance_term");
  require_finite(z, "variance_term");
  const RowVector s = hinge_statistic(column_variances(z), epsilon, stat);
  return (gamma - s.array()).max(0.0).sum() / static_cast<double>(z.cols());
}

Matrix variance_term_backward(const Matrix& z, double gamma, double epsilon, HingeStatistic stat) {
  require_min_rows(z, 2, "variance_term_backward");
  const double n1 = static_cast<double>(z.rows() - 1);
  const double d = static_cast<double>(z.cols());
  const RowVector var = column_variances(z);
  const RowVector s = hinge_statistic(var, epsilon, stat);

  // dVar/dz_ij = 2 (z_ij - mean_j) / (n-1); dS/dVar = 1/(2S) for the std.
  RowVector coef(z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (!(s(j) < gamma)) {
      coef(j) = 0.0;
    } else if (stat == HingeStatistic::kStd) {
      coef(j) = -1.0 / (d * n1 * s(j));
    } else {
      coef(j) = -2.0 / (d * n1);
    }
  }
  Matrix grad = center_columns(z);
  grad.array().rowwise() *= coef.array();
  return grad;
}

double covariance_term(const Matrix& z) {
  require_min_rows(z, 2, "covariance_term");
  require_finite(z, "covariance_term");
  const Matrix c = covariance_matrix(z);
  const double off = c.squaredNorm() - c.diagonal().squaredNorm();
  return off / static_cast<double>(z.cols());
}

Matrix covariance_term_backward(const Matrix& z) {
  require_min_rows(z, 2, "covariance_term_backward");
  const double n1 = static_cast<double>(z.rows() - 1);
  const double d = static_cast<double>(z.cols());
  Matrix off = covariance_matrix(z);
  off.diagonal().setZero();
  // Centered columns sum to zero, so the centering step adds no extra term.
  return (4.0 / (d * n1)) * (center_columns(z) * off);
}

double invariance_term(const Matrix& z, const Matrix& z_prime) {
  require_same_shape(z, z_prime, "invariance_term");
  require_nonempty(z, "invariance_term");
  require_finite(z, "invariance_term");
  require_finite(z_prime, "invariance_term");
  return (z - z_prime).squaredNorm() / static_cast<double>(z.rows());
}

LossBreakdown vicreg_loss(const Matrix& z, const Matrix& z_prime, const LossCoefficients& coeffs) {
  coeffs.validate();
  check_batch_pair(z, z_prime, "vicreg_loss");
  LossBreakdown out;
  out.inv = invariance_term(z, z_prime);
  out.var_a = variance_term(z, coeffs.gamma, coeffs.epsilon);
  out.var_b = variance_term(z_prime, coeffs.gamma, coeffs.epsilon);
  out.cov_a = covariance_term(z);
  out.cov_b = covariance_term(z_prime);
  out.total = coeffs.lambda * out.inv + coeffs.mu * (out.var_a + out.var_b) +
              coeffs.nu * (out.cov_a + out.cov_b);
  return out;
}

LossGradients vicreg_loss_backward(const Matrix& z, const Matrix& z_prime,
                                   const LossCoefficients& coeffs) {
  coeffs.validate();
  check_batch_pair(z, z_prime, "vicreg_loss_backward");
  const double n = static_cast<double>(z.rows());
  const Matrix diff = (2.0 * coeffs.lambda / n) * (z - z_prime);
  LossGradients g;
  g.grad_z = diff;
  g.grad_z_prime = -diff;
  if (coeffs.mu != 0.0) {
    g.grad_z += coeffs.mu * variance_term_backward(z, coeffs.gamma, coeffs.epsilon);
    g.grad_z_prime += coeffs.mu * variance_term_backward(z_prime, coeffs.gamma, coeffs.epsilon);
  }
  if (coeffs.nu != 0.0) {
    g.grad_z += coeffs.nu * covariance_term_backward(z);
    g.grad_z_prime += coeffs.nu * covariance_term_backward(z_prime);
  }
  return g;
}

double algorithm1_loss(const Matrix& z, const Matrix& z_prime, const LossCoefficients& coeffs) {
  coeffs.validate();
  check_batch_pair(z, z_prime, "algorithm1_loss");
  const double n = static_cast<double>(z.rows());
  const double d = static_cast<double>(z.cols());

  // Written after the pseudocode, step for step.
  const double sim_loss = (z - z_prime).array().square().sum() / (n * d);

  const RowVector std_a = (column_variances(z).array() + coeffs.epsilon).sqrt().matrix();
  const RowVector std_b = (column_variances(z_prime).array() + coeffs.epsilon).sqrt().matrix();
  const double std_loss = (coeffs.gamma - std_a.array()).max(0.0).mean() +
                          (coeffs.gamma - std_b.array()).max(0.0).mean();

  const Matrix za = center_columns(z);
  const Matrix zb = center_columns(z_prime);
  Matrix cov_a = (za.transpose() * za) / (n - 1.0);
  Matrix cov_b = (zb.transpose() * zb) / (n - 1.0);
  cov_a.diagonal().setZero();
  cov_b.diagonal().setZero();
  const double cov_loss = cov_a.squaredNorm() / d + cov_b.squaredNorm() / d;

  return coeffs.lambda * sim_loss + coeffs.mu * std_loss + coeffs.nu * cov_loss;
}

double avg_correlation_coefficient(const Matrix& y, const Matrix& y_prime, double epsilon) {
  check_batch_pair(y, y_prime, "avg_correlation_coefficient");
  if (y.cols() < 2) {
    throw std::invalid_argument("avg_correlation_coefficient: needs at least 2 columns");
  }
  const double d = static_cast<double>(y.cols());
  auto off_sq = [&](const Matrix& m) {
    const Matrix c = covariance_matrix(standardize_columns(m, epsilon));
    return c.squaredNorm() - c.diagonal().squaredNorm();
  };
  return (off_sq(y) + off_sq(y_prime)) / (2.0 * d * (d - 1.0));
}

}  // namespace vicreg
