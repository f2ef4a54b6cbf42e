#pragma once

// Synthetic clustered data and the two-view transformation pipeline.
//
// Vector analogs stand in for image augmentations: coordinate masking plays
// the role of cropping, additive noise the role of color jitter, and a global
// scale factor the role of brightness changes.

#include "vicreg/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace vicreg {

struct SyntheticDataset {
  Matrix x;                 // N x d_in samples
  std::vector<int> labels;  // class per sample; only probes read these
  int n_classes = 0;
  std::uint64_t generator_seed = 0;

  Eigen::Index size() const { return x.rows(); }
  int input_dim() const { return static_cast<int>(x.cols()); }
};

struct DatasetConfig {
  int n_classes = 8;
  int per_class = 512;
  int d_latent = 8;
  int d_in = 32;
  std::uint64_t seed = 0;
  // Cluster means are drawn with this std per latent axis; samples add unit
  // noise around them.
  double mean_spread = 3.0;
  double within_std = 1.0;
  double min_separation = 4.0;  // in units of within_std
  // Each class is a union of this many clusters; with more than one the
  // classes stop being linearly separable in input space.
  int modes_per_class = 1;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct ViewTransformConfig {
  double noise_std = 0.2;
  double mask_prob = 0.25;
  double scale_low = 0.8;
  double scale_high = 1.2;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const ViewTransformConfig&, const ViewTransformConfig&) = default;
};

/// Gaussian clusters on a random d_latent-dimensional subspace of R^d_in.
/// Deterministic in config.seed. Samples are grouped by class.
SyntheticDataset generate_dataset(const DatasetConfig& config);

SyntheticDataset generate_dataset(int n_classes, int per_class, int d_latent, int d_in,
                                  std::uint64_t seed);

/// Exact class means of the generator, in input space (for tests/probes).
Matrix class_centroids(const SyntheticDataset& data);

/// Two independently transformed copies of x. Each view is scaled by a factor
/// drawn from [scale_low, scale_high], perturbed with Gaussian noise, then has
/// each coordinate zeroed with probability mask_prob.
std::pair<Vector, Vector> sample_views(const Vector& x, const ViewTransformConfig& config,
                                       std::uint64_t draw_seed);

/// Seed for the views of one sample in one epoch.
std::uint64_t view_draw_seed(std::uint64_t base_seed, std::uint64_t epoch,
                             std::uint64_t sample_index);

/// splitmix64 finalizer; used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t x);

struct ViewBatch {
  Matrix a;
  Matrix b;
};

/// Views for the given rows of x, sample i using view_draw_seed(seed, epoch, rows[i]).
ViewBatch sample_view_batch(const Matrix& x, const std::vector<Eigen::Index>& rows,
                            const ViewTransformConfig& config, std::uint64_t epoch);

/// Text export: a header line "n d_in n_classes", then one line per sample with
/// the label followed by d_in hex-float values.
void write_dataset(std::ostream& os, const SyntheticDataset& data);
SyntheticDataset read_dataset(std::istream& is);
void save_dataset(const std::string& path, const SyntheticDataset& data);
SyntheticDataset load_dataset(const std::string& path);

}  // namespace vicreg
