#pragma once

// Shared fixtures and brute-force oracles. The oracles are written as plain
// loops over the defining sums and never call the library code they check.

#include "vicreg/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <random>
#include <utility>
#include <vector>

namespace testing_util {

using vicreg::Matrix;

inline Matrix gaussian(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = g(rng);
  return m;
}

inline Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  const auto n = static_cast<Eigen::Index>(r.size());
  const auto d = static_cast<Eigen::Index>(r.begin()->size());
  Matrix m(n, d);
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Matrix oracle_covariance(const Matrix& z) {
  const auto n = z.rows();
  const auto d = z.cols();
  std::vector<double> mean(d, 0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) mean[j] += z(i, j);
    mean[j] /= static_cast<double>(n);
  }
  Matrix c(d, d);
  for (Eigen::Index a = 0; a < d; ++a)
    for (Eigen::Index b = 0; b < d; ++b) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += (z(i, a) - mean[a]) * (z(i, b) - mean[b]);
      c(a, b) = s / static_cast<double>(n - 1);
    }
  return c;
}

inline double oracle_variance_term(const Matrix& z, double gamma, double eps) {
  const Matrix c = oracle_covariance(z);
  double s = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) s += std::max(0.0, gamma - std::sqrt(c(j, j) + eps));
  return s / static_cast<double>(z.cols());
}

inline double oracle_covariance_term(const Matrix& z) {
  const Matrix c = oracle_covariance(z);
  double s = 0.0;
  for (Eigen::Index a = 0; a < z.cols(); ++a)
    for (Eigen::Index b = 0; b < z.cols(); ++b)
      if (a != b) s += c(a, b) * c(a, b);
  return s / static_cast<double>(z.cols());
}

inline double oracle_invariance(const Matrix& z, const Matrix& zp) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) s += (z(i, j) - zp(i, j)) * (z(i, j) - zp(i, j));
  return s / static_cast<double>(z.rows());
}

// Rows drawn uniformly from the unit sphere.
inline Matrix unit_sphere_rows(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Matrix m = gaussian(n, d, seed);
  for (Eigen::Index i = 0; i < n; ++i) m.row(i) /= m.row(i).norm();
  return m;
}

// Exhaustive cosine kNN: every similarity from explicit sums, a full stable
// sort, then a majority vote with ties to the lowest class.
inline std::vector<int> oracle_knn(const Matrix& train, const std::vector<int>& train_labels,
                                   const Matrix& eval, int k, int n_classes) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < eval.rows(); ++i) {
    std::vector<std::pair<double, Eigen::Index>> sims;
    double ne = 0;
    for (Eigen::Index c = 0; c < eval.cols(); ++c) ne += eval(i, c) * eval(i, c);
    for (Eigen::Index t = 0; t < train.rows(); ++t) {
      double dot = 0, nt = 0;
      for (Eigen::Index c = 0; c < eval.cols(); ++c) {
        dot += eval(i, c) * train(t, c);
        nt += train(t, c) * train(t, c);
      }
      const double denom = std::sqrt(ne) * std::sqrt(nt);
      sims.emplace_back(denom > 0 ? dot / denom : 0.0, t);
    }
    std::stable_sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
      return a.first > b.first;
    });
    std::vector<int> votes(static_cast<std::size_t>(n_classes), 0);
    for (int j = 0; j < k; ++j) ++votes[static_cast<std::size_t>(train_labels[static_cast<std::size_t>(sims[static_cast<std::size_t>(j)].second)])];
    int best = 0;
    for (int c = 1; c < n_classes; ++c)
      if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
    out.push_back(best);
  }
  return out;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({1e-300, std::abs(a), std::abs(b)});
}

}  // namespace testing_util
