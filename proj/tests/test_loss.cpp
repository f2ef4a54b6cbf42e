#include "helpers.hpp"
#include "vicreg/gradcheck.hpp"
#include "vicreg/loss.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace vicreg;
using testing_util::gaussian;
using testing_util::rows;

TEST_CASE("variance_term hand examples") {
  CHECK(std::abs(variance_term(rows({{2, 2}, {2, 2}, {2, 2}}), 1.0, 1e-4) - 0.99) < 1e-12);
  CHECK(variance_term(rows({{0, 0}, {4, 4}}), 1.0, 1e-4) == 0.0);
  // Column one has S = sqrt(2.0001) > 1, column two S = 0.01.
  CHECK(std::abs(variance_term(rows({{0, 0}, {2, 0}}), 1.0, 1e-4) - 0.495) < 1e-9);
}

TEST_CASE("covariance_term hand examples") {
  CHECK(covariance_term(rows({{1}, {5}, {-2}})) == 0.0);
  CHECK(std::abs(covariance_term(rows({{1, 1}, {-1, -1}})) - 4.0) < 1e-9);
  CHECK(covariance_term(rows({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}})) == 0.0);
}

TEST_CASE("invariance_term hand examples") {
  const Matrix z = gaussian(5, 3, 1);
  CHECK(invariance_term(z, z) == 0.0);
  CHECK(std::abs(invariance_term(rows({{1, 0}}), rows({{0, 0}})) - 1.0) < 1e-9);
  CHECK(std::abs(invariance_term(rows({{1, 2}, {3, 4}}), rows({{1, 0}, {0, 4}})) - 6.5) < 1e-9);
  CHECK_THROWS_AS(invariance_term(rows({{1, 2}}), rows({{1, 2, 3}})), ShapeMismatchError);
}

TEST_CASE("loss terms agree with loop oracles") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 7);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(seed % 5);
    const double scale = 0.2 + 0.1 * static_cast<double>(seed % 12);
    const Matrix z = gaussian(n, d, seed, scale);
    const Matrix zp = gaussian(n, d, seed + 1000, scale);
    CHECK(std::abs(variance_term(z, 1.0, 1e-4) - testing_util::oracle_variance_term(z, 1.0, 1e-4)) < 1e-12);
    CHECK(std::abs(covariance_term(z) - testing_util::oracle_covariance_term(z)) < 1e-12);
    CHECK(std::abs(invariance_term(z, zp) - testing_util::oracle_invariance(z, zp)) < 1e-12);
  }
}

TEST_CASE("vicreg_loss combines the terms with the coefficients") {
  // With s = 0.1, v = v' = 0.2, c = c' = 0.05 the default weights give 12.6.
  const LossCoefficients c;
  CHECK(std::abs(c.lambda * 0.1 + c.mu * (0.2 + 0.2) + c.nu * (0.05 + 0.05) - 12.6) < 1e-12);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix z = gaussian(8, 4, seed, 0.5);
    const Matrix zp = gaussian(8, 4, seed + 50, 0.5);
    LossCoefficients k;
    k.lambda = 0.5 + static_cast<double>(seed);
    k.mu = 3.0 * static_cast<double>(seed % 4);
    k.nu = 0.25 * static_cast<double>(seed % 3);
    const LossBreakdown b = vicreg_loss(z, zp, k);
    CHECK(b.inv >= 0);
    CHECK(b.var_a >= 0);
    CHECK(b.var_b >= 0);
    CHECK(b.cov_a >= 0);
    CHECK(b.cov_b >= 0);
    const double expected = k.lambda * b.inv + k.mu * (b.var_a + b.var_b) + k.nu * (b.cov_a + b.cov_b);
    CHECK(testing_util::rel_diff(b.total, expected) < 1e-12);
    CHECK(b.inv == invariance_term(z, zp));
    CHECK(b.var_b == variance_term(zp, k.gamma, k.epsilon));
    CHECK(b.cov_a == covariance_term(z));
  }
}

TEST_CASE("vicreg_loss vanishes on identical decorrelated wide batches") {
  const Matrix z = 2.0 * rows({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}});
  const LossBreakdown b = vicreg_loss(z, z, LossCoefficients{});
  CHECK(b.total == 0.0);
}

TEST_CASE("coefficient validation") {
  LossCoefficients c;
  c.gamma = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.epsilon = -1e-4;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.lambda = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.nu = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  const Matrix z = gaussian(4, 2, 9);
  CHECK_THROWS_AS(vicreg_loss(z, z, c), std::invalid_argument);
}

TEST_CASE("vicreg_loss_backward special cases") {
  const Matrix z = gaussian(8, 4, 3, 0.3);
  const LossCoefficients c;

  SUBCASE("identical batches: no invariance contribution") {
    const LossGradients g = vicreg_loss_backward(z, z, c);
    LossCoefficients no_inv = c;
    no_inv.lambda = 0.0;
    const LossGradients g0 = vicreg_loss_backward(z, z, no_inv);
    CHECK(g.grad_z == g0.grad_z);
    CHECK(g.grad_z_prime == g0.grad_z_prime);
  }

  SUBCASE("invariance only has the closed form 2*lambda/n*(Z - Z')") {
    const Matrix zp = gaussian(8, 4, 4, 0.3);
    LossCoefficients k;
    k.lambda = 3.0;
    k.mu = 0.0;
    k.nu = 0.0;
    const LossGradients g = vicreg_loss_backward(z, zp, k);
    const Matrix expected = (2.0 * 3.0 / 8.0) * (z - zp);
    CHECK((g.grad_z - expected).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((g.grad_z_prime + expected).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("seeded n=8, d=4 batch against central differences") {
    const Matrix zp = gaussian(8, 4, 5, 0.3);
    const LossGradients g = vicreg_loss_backward(z, zp, c);
    auto fz = [&](const Matrix& m) { return vicreg_loss(m, zp, c).total; };
    auto fzp = [&](const Matrix& m) { return vicreg_loss(z, m, c).total; };
    CHECK(max_gradient_error(g.grad_z, numerical_gradient(fz, z, 1e-5)) < 1e-6);
    CHECK(max_gradient_error(g.grad_z_prime, numerical_gradient(fzp, zp, 1e-5)) < 1e-6);
  }
}

TEST_CASE("hinge inactivity above gamma") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Matrix z = gaussian(16, 5, seed);
    // Rescale every column to std 1.5 so S >= gamma + 1e-3 with room to spare.
    z = standardize_columns(z, 0.0) * 1.5;
    CHECK(variance_term(z, 1.0, 1e-4) == 0.0);
    CHECK(variance_term_backward(z, 1.0, 1e-4).isZero(0.0));
  }
}

TEST_CASE("permutation equivariance") {
  const Matrix z = gaussian(9, 4, 31, 0.4);
  const Matrix zp = gaussian(9, 4, 32, 0.4);
  std::vector<int> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[2], perm[6]);
  Matrix pz(9, 4), pzp(9, 4);
  for (int i = 0; i < 9; ++i) {
    pz.row(i) = z.row(perm[i]);
    pzp.row(i) = zp.row(perm[i]);
  }
  const LossCoefficients c;
  const LossBreakdown a = vicreg_loss(z, zp, c);
  const LossBreakdown b = vicreg_loss(pz, pzp, c);
  // The sums run in a different order, so compare to rounding.
  CHECK(testing_util::rel_diff(a.inv, b.inv) < 1e-14);
  CHECK(testing_util::rel_diff(a.var_a, b.var_a) < 1e-14);
  CHECK(testing_util::rel_diff(a.cov_b, b.cov_b) < 1e-12);
  CHECK(testing_util::rel_diff(a.total, b.total) < 1e-13);
  const LossGradients ga = vicreg_loss_backward(z, zp, c);
  const LossGradients gb = vicreg_loss_backward(pz, pzp, c);
  for (int i = 0; i < 9; ++i) {
    CHECK((gb.grad_z.row(i) - ga.grad_z.row(perm[i])).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((gb.grad_z_prime.row(i) - ga.grad_z_prime.row(perm[i])).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("covariance_term is zero exactly on orthogonal centered designs") {
  // Hadamard columns: centered and mutually orthogonal.
  const Matrix h = rows({{1, 1, 1, 1}, {1, -1, 1, -1}, {1, 1, -1, -1}, {1, -1, -1, 1},
                         {-1, -1, -1, -1}, {-1, 1, -1, 1}, {-1, -1, 1, 1}, {-1, 1, 1, -1}});
  CHECK(covariance_term(h.rightCols(3)) == 0.0);
  CHECK(covariance_term(h) == 0.0);
  Matrix g = h;
  g(0, 1) = 0.5;
  CHECK(covariance_term(g) > 0.0);
}

TEST_CASE("algorithm1_loss equals vicreg_loss with lambda/d") {
  const LossCoefficients inv_only{1.0, 0.0, 0.0, 1.0, 1e-4};
  CHECK(std::abs(algorithm1_loss(rows({{1, 2}, {3, 4}}), rows({{1, 0}, {0, 4}}), inv_only) - 3.25) < 1e-12);

  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(seed % 13);
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(seed % 9);
    const Matrix z = gaussian(n, d, seed, 0.7);
    const Matrix zp = gaussian(n, d, seed + 77, 0.7);
    LossCoefficients c;
    c.lambda = 1.0 + static_cast<double>(seed);
    LossCoefficients scaled = c;
    scaled.lambda = c.lambda / static_cast<double>(d);
    CHECK(testing_util::rel_diff(algorithm1_loss(z, zp, c), vicreg_loss(z, zp, scaled).total) < 1e-12);

    const LossCoefficients mu_only{0.0, 2.0, 0.0, 1.0, 1e-4};
    const LossCoefficients nu_only{0.0, 0.0, 3.0, 1.0, 1e-4};
    CHECK(testing_util::rel_diff(algorithm1_loss(z, zp, mu_only), vicreg_loss(z, zp, mu_only).total) <
          1e-12);
    CHECK(testing_util::rel_diff(algorithm1_loss(z, zp, nu_only), vicreg_loss(z, zp, nu_only).total) <
          1e-12);
  }
}

namespace {

// Brute-force Pearson correlation of two columns, then the squared average.
double oracle_avg_corr(const Matrix& y, const Matrix& yp) {
  auto sum_sq = [](const Matrix& m) {
    const Eigen::Index n = m.rows();
    const Eigen::Index d = m.cols();
    double s = 0.0;
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) {
        if (a == b) continue;
        double ma = 0, mb = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
          ma += m(i, a);
          mb += m(i, b);
        }
        ma /= n;
        mb /= n;
        double sab = 0, saa = 0, sbb = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
          sab += (m(i, a) - ma) * (m(i, b) - mb);
          saa += (m(i, a) - ma) * (m(i, a) - ma);
          sbb += (m(i, b) - mb) * (m(i, b) - mb);
        }
        const double r = sab / std::sqrt(saa * sbb);
        s += r * r;
      }
    return s;
  };
  const double d = static_cast<double>(y.cols());
  return (sum_sq(y) + sum_sq(yp)) / (2.0 * d * (d - 1.0));
}

}  // namespace

TEST_CASE("avg_correlation_coefficient") {
  const Matrix corr = rows({{1, 2}, {2, 4}, {3, 6}, {5, 10}});
  CHECK(std::abs(avg_correlation_coefficient(corr, corr, 1e-12) - 1.0) < 1e-9);
  CHECK(std::abs(oracle_avg_corr(corr, corr) - 1.0) < 1e-12);

  const Matrix dec = rows({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}});
  CHECK(avg_correlation_coefficient(dec, dec, 1e-4) == 0.0);

  const Matrix big = gaussian(4096, 8, 2024);
  const Matrix big2 = gaussian(4096, 8, 2025);
  const double r = avg_correlation_coefficient(big, big2, 1e-4);
  CHECK(r < 0.05);
  CHECK(std::abs(r - oracle_avg_corr(big, big2)) < 1e-6);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix y = gaussian(20, 5, seed, 2.0);
    const Matrix yp = gaussian(20, 5, seed + 9, 2.0);
    // epsilon shrinks every correlation slightly; with variances near 4 the
    // relative effect is about eps / var.
    CHECK(std::abs(avg_correlation_coefficient(y, yp, 1e-10) - oracle_avg_corr(y, yp)) < 1e-8);
  }
  CHECK_THROWS_AS(avg_correlation_coefficient(rows({{1}, {2}}), rows({{1}, {2}}), 1e-4),
                  std::invalid_argument);
}

TEST_CASE("std hinge gradient is scale-free while the variance hinge is not") {
  const Matrix base = standardize_columns(gaussian(64, 8, 77), 0.0);
  const std::vector<double> sigmas = {0.4, 0.2, 0.1, 0.05};
  std::vector<double> std_norms, var_norms;
  for (double s : sigmas) {
    const Matrix z = base * s;
    std_norms.push_back(variance_term_backward(z, 1.0, 1e-4, HingeStatistic::kStd).norm());
    var_norms.push_back(variance_term_backward(z, 1.0, 1e-4, HingeStatistic::kVariance).norm());
  }
  const auto [lo, hi] = std::minmax_element(std_norms.begin(), std_norms.end());
  CHECK(*hi / *lo < 1.5);
  for (std::size_t i = 1; i < sigmas.size(); ++i) {
    const double ratio = var_norms[i] / var_norms[0];
    const double expected = sigmas[i] / sigmas[0];
    CHECK(std::abs(ratio / expected - 1.0) < 0.2);
  }
}

TEST_CASE("degenerate batches are rejected") {
  CHECK_THROWS_AS(variance_term(rows({{1, 2}}), 1.0, 1e-4), DegenerateBatchError);
  CHECK_THROWS_AS(covariance_term(rows({{1, 2}})), DegenerateBatchError);
  CHECK_THROWS_AS(vicreg_loss(rows({{1, 2}}), rows({{1, 2}}), LossCoefficients{}), DegenerateBatchError);
}
