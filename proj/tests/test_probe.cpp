#include "helpers.hpp"
#include "vicreg/probe.hpp"

#include <doctest.h>

#include <random>

using namespace vicreg;
using testing_util::gaussian;

namespace {

std::vector<int> balanced_labels(int n, int classes) {
  std::vector<int> l(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) l[static_cast<std::size_t>(i)] = i % classes;
  return l;
}

// Gaussian clusters around well-separated means.
Matrix clusters(const std::vector<int>& labels, int d, double spread, std::uint64_t seed) {
  const Matrix means = gaussian(8, d, 999, spread);
  Matrix x = gaussian(static_cast<Eigen::Index>(labels.size()), d, seed);
  for (std::size_t i = 0; i < labels.size(); ++i) x.row(static_cast<Eigen::Index>(i)) += means.row(labels[i]);
  return x;
}

}  // namespace

TEST_CASE("linear probe separates a linearly separable toy set") {
  // Two classes on either side of the hyperplane w.x = 0 with a margin.
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  const Vector w = (Vector(3) << 1.0, -2.0, 0.5).finished().normalized();
  auto make = [&](int n, Matrix& x, std::vector<int>& y) {
    x.resize(n, 3);
    y.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      Vector v(3);
      do {
        for (int c = 0; c < 3; ++c) v(c) = g(rng);
      } while (std::abs(w.dot(v)) < 0.3);
      x.row(i) = v.transpose();
      y[static_cast<std::size_t>(i)] = w.dot(v) > 0 ? 1 : 0;
    }
  };
  Matrix xtr, xev;
  std::vector<int> ytr, yev;
  make(400, xtr, ytr);
  make(400, xev, yev);
  // The exact hyperplane classifies every point: the fixture is separable.
  for (Eigen::Index i = 0; i < xev.rows(); ++i) REQUIRE((xev.row(i).dot(w) > 0) == (yev[static_cast<std::size_t>(i)] == 1));

  const Matrix before = xtr;
  const ProbeResult r = linear_probe(xtr, ytr, xev, yev);
  CHECK(r.accuracy >= 0.99);
  CHECK(r.protocol == ProbeProtocol::kLinear);
  CHECK(r.accuracy == static_cast<double>(r.n_correct) / static_cast<double>(r.n_eval));
  CHECK(xtr == before);
}

TEST_CASE("linear probe on shuffled labels stays at chance") {
  const int n = 2000;
  std::vector<int> ytr = balanced_labels(n, 8);
  std::vector<int> yev = balanced_labels(n, 8);
  std::mt19937_64 rng(11);
  std::shuffle(ytr.begin(), ytr.end(), rng);
  std::shuffle(yev.begin(), yev.end(), rng);
  const Matrix xtr = gaussian(n, 16, 1);
  const Matrix xev = gaussian(n, 16, 2);
  const ProbeResult r = linear_probe(xtr, ytr, xev, yev, 200, 0.5, 3);
  const double sigma = std::sqrt(0.125 * 0.875 / n);
  CHECK(std::abs(r.accuracy - 0.125) < 3 * sigma);
}

TEST_CASE("zero-epoch probe from zero weights predicts class 0") {
  const std::vector<int> y = balanced_labels(80, 8);
  const Matrix x = gaussian(80, 5, 3);
  const ProbeResult r = linear_probe(x, y, x, y, 0, 0.5, 0);
  CHECK(r.accuracy == 1.0 / 8.0);
  for (int p : r.predictions) CHECK(p == 0);
}

TEST_CASE("linear probe is deterministic and rejects bad input") {
  const std::vector<int> y = balanced_labels(60, 3);
  const Matrix x = clusters(y, 4, 3.0, 5);
  LinearProbeOptions o;
  o.init_scale = 0.1;
  o.seed = 9;
  const ProbeResult a = linear_probe(x, y, x, y, o);
  const ProbeResult b = linear_probe(x, y, x, y, o);
  CHECK(a.predictions == b.predictions);
  CHECK_THROWS_AS(linear_probe(x, std::vector<int>(59, 0), x, y), ShapeMismatchError);
  CHECK_THROWS_AS(linear_probe(x, y, gaussian(60, 5, 1), y), ShapeMismatchError);
}

TEST_CASE("knn: coincident point, global tie and errors") {
  const std::vector<int> y = {2, 0, 1, 1};
  const Matrix x = gaussian(4, 3, 8);
  const ProbeResult one = knn_classify(x, y, x.row(2), {1}, 1);
  CHECK(one.predictions[0] == 1);
  CHECK(one.k == 1);
  CHECK(one.protocol == ProbeProtocol::kKnn);

  const std::vector<int> bal = balanced_labels(12, 4);
  const Matrix t = gaussian(12, 3, 9);
  const ProbeResult all = knn_classify(t, bal, gaussian(7, 3, 10), std::vector<int>(7, 3), 12);
  for (int p : all.predictions) CHECK(p == 0);
  CHECK(all.accuracy == 0.0);

  CHECK_THROWS(knn_classify(t, bal, t, bal, 0));
  CHECK_THROWS(knn_classify(t, bal, t, bal, 13));
}

TEST_CASE("knn matches the exhaustive oracle on seeded clusters") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::vector<int> ytr = balanced_labels(400, 8);
    const std::vector<int> yev = balanced_labels(160, 8);
    const Matrix xtr = clusters(ytr, 6, 1.5, seed * 2 + 1);
    const Matrix xev = clusters(yev, 6, 1.5, seed * 2 + 2);
    const ProbeResult r = knn_classify(xtr, ytr, xev, yev, 20);
    CHECK(r.predictions == testing_util::oracle_knn(xtr, ytr, xev, 20, 8));
    CHECK(r.accuracy == static_cast<double>(r.n_correct) / static_cast<double>(r.n_eval));
  }
}

TEST_CASE("knn is invariant to positive global scaling") {
  const std::vector<int> ytr = balanced_labels(200, 5);
  const std::vector<int> yev = balanced_labels(100, 5);
  const Matrix xtr = clusters(ytr, 4, 1.0, 21);
  const Matrix xev = clusters(yev, 4, 1.0, 22);
  const ProbeResult base = knn_classify(xtr, ytr, xev, yev, 7);
  for (double s : {0.5, 3.7, 1024.0, 1e-3}) {
    CHECK(knn_classify(xtr * s, ytr, xev * s, yev, 7).predictions == base.predictions);
  }
}
