#include "vicreg/data.hpp"

#include "vicreg/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace vicreg {

namespace {

// The generator keeps its basis and means so class_centroids can rebuild them.
struct GeneratorState {
  Matrix basis;  // d_latent x d_in with orthonormal rows
  Matrix means;  // (n_classes * modes_per_class) x d_latent, class-major
};

GeneratorState make_generator(const DatasetConfig& c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(c.d_in, c.d_latent);
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = normal(rng);
  }
  const Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ() * Matrix::Identity(c.d_in, c.d_latent);

  GeneratorState s;
  s.basis = q.transpose();
  const int n_means = c.n_classes * c.modes_per_class;
  s.means.resize(n_means, c.d_latent);
  const double min_dist = c.min_separation * c.within_std;
  for (int k = 0; k < n_means; ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) {
        throw std::invalid_argument("generate_dataset: cannot place separated cluster means");
      }
      RowVector m(c.d_latent);
      for (int j = 0; j < c.d_latent; ++j) m(j) = c.mean_spread * normal(rng);
      bool ok = true;
      for (int prev = 0; prev < k && ok; ++prev) ok = (s.means.row(prev) - m).norm() >= min_dist;
      if (ok) {
        s.means.row(k) = m;
        break;
      }
    }
  }
  return s;
}

void validate(const DatasetConfig& c) {
  if (c.n_classes < 1 || c.per_class < 1 || c.d_latent < 1 || c.d_in < 1 || c.modes_per_class < 1) {
    throw std::invalid_argument("generate_dataset: counts and dimensions must be >= 1");
  }
  if (c.d_latent > c.d_in) throw std::invalid_argument("generate_dataset: d_latent > d_in");
  if (!(c.within_std > 0.0) || !(c.mean_spread > 0.0) || !(c.min_separation >= 0.0)) {
    throw std::invalid_argument("generate_dataset: spreads must be positive");
  }
}

}  // namespace

void ViewTransformConfig::validate() const {
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw std::invalid_argument("views: noise_std must be finite and >= 0");
  }
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) {
    throw std::invalid_argument("views: mask_prob must lie in [0, 1]");
  }
  if (!(scale_low > 0.0 && scale_low <= scale_high) || !std::isfinite(scale_high)) {
    throw std::invalid_argument("views: need 0 < scale_low <= scale_high");
  }
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t view_draw_seed(std::uint64_t base_seed, std::uint64_t epoch,
                             std::uint64_t sample_index) {
  return mix_seed(mix_seed(mix_seed(base_seed) ^ epoch) ^ sample_index);
}

SyntheticDataset generate_dataset(const DatasetConfig& c) {
  validate(c);
  std::mt19937_64 rng(mix_seed(c.seed));
  const GeneratorState s = make_generator(c, rng);
  std::normal_distribution<double> normal(0.0, c.within_std);
  std::uniform_int_distribution<int> pick_mode(0, c.modes_per_class - 1);

  SyntheticDataset data;
  data.n_classes = c.n_classes;
  data.generator_seed = c.seed;
  data.x.resize(static_cast<Eigen::Index>(c.n_classes) * c.per_class, c.d_in);
  data.labels.reserve(static_cast<std::size_t>(data.x.rows()));
  Eigen::Index row = 0;
  for (int k = 0; k < c.n_classes; ++k) {
    for (int i = 0; i < c.per_class; ++i, ++row) {
      const int mode = c.modes_per_class > 1 ? pick_mode(rng) : 0;
      RowVector latent = s.means.row(k * c.modes_per_class + mode);
      for (int j = 0; j < c.d_latent; ++j) latent(j) += normal(rng);
      data.x.row(row) = latent * s.basis;
      data.labels.push_back(k);
    }
  }
  return data;
}

SyntheticDataset generate_dataset(int n_classes, int per_class, int d_latent, int d_in,
                                  std::uint64_t seed) {
  DatasetConfig c;
  c.n_classes = n_classes;
  c.per_class = per_class;
  c.d_latent = d_latent;
  c.d_in = d_in;
  c.seed = seed;
  return generate_dataset(c);
}

Matrix class_centroids(const SyntheticDataset& data) {
  Matrix sums = Matrix::Zero(data.n_classes, data.x.cols());
  Vector counts = Vector::Zero(data.n_classes);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    const int k = data.labels[static_cast<std::size_t>(i)];
    sums.row(k) += data.x.row(i);
    counts(k) += 1.0;
  }
  for (int k = 0; k < data.n_classes; ++k) {
    if (counts(k) > 0) sums.row(k) /= counts(k);
  }
  return sums;
}

namespace {

Vector one_view(const Vector& x, const ViewTransformConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale(c.scale_low, c.scale_high);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Draw order is fixed so views are reproducible from the seed alone.
  const double s = c.scale_low == c.scale_high ? c.scale_low : scale(rng);
  Vector v = s * x;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double eps = noise(rng);
    const double u = unit(rng);
    v(i) += c.noise_std * eps;
    if (u < c.mask_prob) v(i) = 0.0;
  }
  return v;
}

}  // namespace

std::pair<Vector, Vector> sample_views(const Vector& x, const ViewTransformConfig& config,
                                       std::uint64_t draw_seed) {
  config.validate();
  std::mt19937_64 rng_a(mix_seed(draw_seed ^ 0xa5a5a5a5ULL));
  std::mt19937_64 rng_b(mix_seed(draw_seed ^ 0x5a5a5a5a00000000ULL));
  return {one_view(x, config, rng_a), one_view(x, config, rng_b)};
}

ViewBatch sample_view_batch(const Matrix& x, const std::vector<Eigen::Index>& rows,
                            const ViewTransformConfig& config, std::uint64_t epoch) {
  ViewBatch batch;
  const auto n = static_cast<Eigen::Index>(rows.size());
  batch.a.resize(n, x.cols());
  batch.b.resize(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = rows[static_cast<std::size_t>(i)];
    auto [va, vb] = sample_views(x.row(r).transpose(), config,
                                 view_draw_seed(config.seed, epoch, static_cast<std::uint64_t>(r)));
    batch.a.row(i) = va.transpose();
    batch.b.row(i) = vb.transpose();
  }
  return batch;
}

void write_dataset(std::ostream& os, const SyntheticDataset& data) {
  os << data.x.rows() << ' ' << data.x.cols() << ' ' << data.n_classes << '\n';
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    os << data.labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) os << ' ' << format_hex(data.x(i, j));
    os << '\n';
  }
}

SyntheticDataset read_dataset(std::istream& is) {
  long n = 0;
  long d = 0;
  int k = 0;
  if (!(is >> n >> d >> k) || n < 1 || d < 1 || k < 1) {
    throw std::runtime_error("dataset: malformed header");
  }
  SyntheticDataset data;
  data.n_classes = k;
  data.x.resize(n, d);
  data.labels.resize(static_cast<std::size_t>(n));
  std::string token;
  for (long i = 0; i < n; ++i) {
    int label = -1;
    if (!(is >> label) || label < 0 || label >= k) {
      throw std::runtime_error("dataset: bad label on row " + std::to_string(i));
    }
    data.labels[static_cast<std::size_t>(i)] = label;
    for (long j = 0; j < d; ++j) {
      if (!(is >> token)) throw std::runtime_error("dataset: truncated row " + std::to_string(i));
      data.x(i, j) = parse_real(token);
    }
  }
  return data;
}

void save_dataset(const std::string& path, const SyntheticDataset& data) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset(os, data);
}

SyntheticDataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("dataset not found: '" + path + "'");
  return read_dataset(is);
}

}  // namespace vicreg
