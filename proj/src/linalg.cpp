#include "vicreg/linalg.hpp"

#include <cmath>
#include <sstream>

namespace vicreg {

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_nonempty(const Matrix& m, const char* what) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw ShapeMismatchError(std::string(what) + ": empty matrix (" + shape_string(m) + ")");
  }
}

void require_min_rows(const Matrix& m, Eigen::Index min_rows, const char* what) {
  require_nonempty(m, what);
  if (m.rows() < min_rows) {
    throw DegenerateBatchError(std::string(what) + ": batch of " + std::to_string(m.rows()) +
                               " rows, need at least " + std::to_string(min_rows));
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatchError(std::string(what) + ": shape " + shape_string(a) + " vs " +
                             shape_string(b));
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw NonFiniteError(std::string(what) + ": non-finite entry");
  }
}

RowVector column_means(const Matrix& z) {
  require_nonempty(z, "column_means");
  return z.colwise().mean();
}

RowVector column_variances(const Matrix& z) {
  require_min_rows(z, 2, "column_variances");
  const Matrix centered = z.rowwise() - z.colwise().mean();
  return centered.colwise().squaredNorm() / static_cast<double>(z.rows() - 1);
}

RowVector column_stds(const Matrix& z) {
  return column_variances(z).array().sqrt().matrix();
}

Matrix center_columns(const Matrix& z) {
  require_nonempty(z, "center_columns");
  return z.rowwise() - z.colwise().mean();
}

Matrix covariance_matrix(const Matrix& z) {
  require_min_rows(z, 2, "covariance_matrix");
  require_finite(z, "covariance_matrix");
  const Matrix centered = z.rowwise() - z.colwise().mean();
  Matrix cov(z.cols(), z.cols());
  cov.triangularView<Eigen::Upper>() = centered.transpose() * centered;
  cov /= static_cast<double>(z.rows() - 1);
  cov.triangularView<Eigen::StrictlyLower>() = cov.transpose();
  return cov;
}

double regularized_std(const Vector& column, double epsilon) {
  if (column.size() < 2) {
    throw DegenerateBatchError("regularized_std: need at least 2 samples");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("regularized_std: epsilon must be positive");
  }
  const double mean = column.mean();
  const double var = (column.array() - mean).square().sum() / static_cast<double>(column.size() - 1);
  return std::sqrt(var + epsilon);
}

RowVector regularized_column_stds(const Matrix& z, double epsilon) {
  return (column_variances(z).array() + epsilon).sqrt().matrix();
}

Matrix standardize_columns(const Matrix& z, double epsilon) {
  require_min_rows(z, 2, "standardize_columns");
  require_finite(z, "standardize_columns");
  const RowVector std = regularized_column_stds(z, epsilon);
  Matrix out = z.rowwise() - z.colwise().mean();
  out.array().rowwise() /= std.array();
  return out;
}

Matrix standardize_columns_backward(const Matrix& z, double epsilon, const Matrix& grad_out) {
  require_same_shape(z, grad_out, "standardize_columns_backward");
  const Matrix y = standardize_columns(z, epsilon);
  const RowVector std = regularized_column_stds(z, epsilon);
  const double denom = static_cast<double>(z.rows() - 1);
  const RowVector mean_grad = grad_out.colwise().mean();
  const RowVector proj = grad_out.cwiseProduct(y).colwise().sum() / denom;
  Matrix grad = grad_out.rowwise() - mean_grad;
  grad.array() -= y.array().rowwise() * proj.array();
  grad.array().rowwise() /= std.array();
  return grad;
}

Matrix l2_normalize_rows(const Matrix& z) {
  require_nonempty(z, "l2_normalize_rows");
  require_finite(z, "l2_normalize_rows");
  Matrix out = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (!(norm > 0.0)) {
      throw ZeroNormError("l2_normalize_rows: row " + std::to_string(i) + " has zero norm");
    }
    out.row(i) /= norm;
  }
  return out;
}

Matrix l2_normalize_rows_backward(const Matrix& z, const Matrix& grad_out) {
  require_same_shape(z, grad_out, "l2_normalize_rows_backward");
  Matrix grad(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double norm = z.row(i).norm();
    if (!(norm > 0.0)) {
      throw ZeroNormError("l2_normalize_rows_backward: row " + std::to_string(i) + " has zero norm");
    }
    const RowVector u = z.row(i) / norm;
    grad.row(i) = (grad_out.row(i) - u * u.dot(grad_out.row(i))) / norm;
  }
  return grad;
}

}  // namespace vicreg
