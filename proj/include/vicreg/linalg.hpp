#pragma once

// Dense batch statistics shared by every other part of the library.
//
// A batch is an n x d matrix: one row per sample, one column per feature.
// All statistics use the unbiased 1/(n-1) estimator and accumulate in double.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace vicreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Raised when a batch has fewer than two rows and an n-1 denominator is needed.
class DegenerateBatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ZeroNormError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Argument checks used at public entry points.
void require_nonempty(const Matrix& m, const char* what);
void require_min_rows(const Matrix& m, Eigen::Index min_rows, const char* what);
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);
void require_finite(const Matrix& m, const char* what);

std::string shape_string(const Matrix& m);

/// Per-column mean as a row vector of length d.
RowVector column_means(const Matrix& z);

/// Per-column unbiased variance. Requires n >= 2.
RowVector column_variances(const Matrix& z);

/// Per-column unbiased standard deviation without regularization.
RowVector column_stds(const Matrix& z);

/// Subtracts the column means from every row.
Matrix center_columns(const Matrix& z);

/// C(Z) = 1/(n-1) * sum_i (z_i - mean)(z_i - mean)^T. The result is exactly
/// symmetric: only the upper triangle is accumulated and then mirrored.
Matrix covariance_matrix(const Matrix& z);

/// sqrt(Var(column) + epsilon) with the unbiased variance.
double regularized_std(const Vector& column, double epsilon);

/// Per-column sqrt(Var + epsilon).
RowVector regularized_column_stds(const Matrix& z, double epsilon);

/// Centers each column and divides by its regularized standard deviation.
Matrix standardize_columns(const Matrix& z, double epsilon);

/// Backward pass of standardize_columns: maps dL/d(output) to dL/dZ,
/// including the coupling through the batch mean and variance.
Matrix standardize_columns_backward(const Matrix& z, double epsilon,
                                    const Matrix& grad_out);

/// Scales every row to unit Euclidean norm. Throws ZeroNormError on a zero row.
Matrix l2_normalize_rows(const Matrix& z);

/// Backward pass of l2_normalize_rows.
Matrix l2_normalize_rows_backward(const Matrix& z, const Matrix& grad_out);

}  // namespace vicreg
