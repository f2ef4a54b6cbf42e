#pragma once

// Variance-invariance-covariance objective on two batches of embeddings,
// its closed-form gradients, and the correlation diagnostic.

#include "vicreg/linalg.hpp"

namespace vicreg {

struct LossCoefficients {
  double lambda = 25.0;   // invariance weight
  double mu = 25.0;       // variance weight
  double nu = 1.0;        // covariance weight
  double gamma = 1.0;     // target standard deviation
  double epsilon = 1e-4;  // variance regularizer inside the square root

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;

  friend bool operator==(const LossCoefficients&, const LossCoefficients&) = default;
};

struct LossBreakdown {
  double inv = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double cov_a = 0.0;
  double cov_b = 0.0;
  double total = 0.0;
};

struct LossGradients {
  Matrix grad_z;
  Matrix grad_z_prime;
};

/// Which statistic the variance hinge acts on. The library objective uses the
/// regularized standard deviation; kVariance exists to compare gradient scaling.
enum class HingeStatistic { kStd, kVariance };

/// (1/d) * sum_j max(0, gamma - S(z^j, epsilon)).
double variance_term(const Matrix& z, double gamma, double epsilon,
                     HingeStatistic stat = HingeStatistic::kStd);

/// Gradient of variance_term. Columns sitting exactly on the kink get 0.
Matrix variance_term_backward(const Matrix& z, double gamma, double epsilon,
                              HingeStatistic stat = HingeStatistic::kStd);

/// (1/d) * sum of squared off-diagonal entries of covariance_matrix(z).
double covariance_term(const Matrix& z);
Matrix covariance_term_backward(const Matrix& z);

/// (1/n) * sum_i ||z_i - z'_i||^2.
double invariance_term(const Matrix& z, const Matrix& z_prime);

/// Total: lambda*inv + mu*(v(Z)+v(Z')) + nu*(c(Z)+c(Z')).
LossBreakdown vicreg_loss(const Matrix& z, const Matrix& z_prime, const LossCoefficients& coeffs);

LossGradients vicreg_loss_backward(const Matrix& z, const Matrix& z_prime,
                                   const LossCoefficients& coeffs);

/// The loss exactly as the reference PyTorch pseudocode computes it: the
/// invariance term is an elementwise mean squared error, which is
/// invariance_term divided by d. Kept only as a conformance check.
double algorithm1_loss(const Matrix& z, const Matrix& z_prime, const LossCoefficients& coeffs);

/// Mean squared off-diagonal correlation of the two batches,
/// 1/(2d(d-1)) * sum_{i!=j} [C(Yhat)_ij^2 + C(Yhat')_ij^2], where Yhat is the
/// epsilon-regularized column standardization. Requires d >= 2.
double avg_correlation_coefficient(const Matrix& y, const Matrix& y_prime, double epsilon);

}  // namespace vicreg
