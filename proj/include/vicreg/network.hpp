#pragma once

// Multilayer perceptron with explicit forward caches and a hand-written
// backward pass. Used for the encoder, the expander and the predictor.
//
// Layer k maps [n, w_k] -> [n, w_{k+1}] as  a = x W + b,  optionally followed
// (hidden layers only) by batch standardization with learnable scale/shift and
// by a rectifier. The final layer is always a plain affine map.

#include "vicreg/linalg.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vicreg {

struct MlpSpec {
  std::vector<int> layer_widths;
  std::vector<bool> hidden_activation;         // one per hidden layer
  std::vector<bool> batch_standardize_hidden;  // one per hidden layer
  bool learnable_affine = true;
  double standardize_epsilon = 1e-5;
  double running_momentum = 0.9;  // running <- m * running + (1 - m) * batch

  /// Uniform spec: every hidden layer gets the same activation/standardization.
  static MlpSpec uniform(std::vector<int> widths, bool rectify, bool standardize);

  void validate() const;

  int num_layers() const { return static_cast<int>(layer_widths.size()) - 1; }
  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
  bool standardized(int layer) const;
  bool rectified(int layer) const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct LayerParams {
  Matrix weight;  // fan_in x fan_out
  RowVector bias;
  RowVector scale;  // empty unless standardized with learnable affine
  RowVector shift;
  RowVector running_mean;  // buffers, empty unless standardized
  RowVector running_var;
};

struct MlpParams {
  std::vector<LayerParams> layers;
};

/// Trainable entry count (weights, biases, scales, shifts); buffers excluded.
std::size_t parameter_count(const MlpParams& params);

/// Same trainable shapes filled with zeros; buffers left empty.
MlpParams zeros_like(const MlpParams& params);

/// Throws ShapeMismatchError if params do not match spec.
void check_params(const MlpParams& params, const MlpSpec& spec);

bool all_finite(const MlpParams& params);

/// Calls fn(param_block, other_block) for every trainable block pair.
template <typename P, typename Q, typename F>
void for_each_block(P& a, Q& b, F&& fn) {
  if (a.layers.size() != b.layers.size()) {
    throw ShapeMismatchError("parameter sets have different layer counts");
  }
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    auto& la = a.layers[l];
    auto& lb = b.layers[l];
    fn(la.weight, lb.weight);
    fn(la.bias, lb.bias);
    fn(la.scale, lb.scale);
    fn(la.shift, lb.shift);
  }
}

/// He initialization: W ~ N(0, 2 / fan_in), zero biases, unit scale, zero
/// shift, running mean 0 and running variance 1.
MlpParams init_params(const MlpSpec& spec, std::uint64_t seed);

class StaleCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct LayerCache {
  Matrix input;
  Matrix normalized;  // standardized pre-activation, standardized layers only
  RowVector std;      // divisor used for the normalization
  RowVector batch_mean;
  RowVector batch_var;
  Matrix activation_input;  // value fed to the rectifier
};

struct ForwardCache {
  bool training = false;
  Eigen::Index batch_rows = 0;
  std::vector<LayerCache> layers;
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

/// Training mode standardizes with batch statistics; evaluation mode uses the
/// running averages stored in params.
ForwardResult forward(const MlpParams& params, const MlpSpec& spec, const Matrix& x,
                      bool training);

struct BackwardResult {
  MlpParams param_grads;
  Matrix grad_in;
};

BackwardResult backward(const MlpParams& params, const MlpSpec& spec, const ForwardCache& cache,
                        const Matrix& grad_out);

/// Folds the batch statistics of a training-mode forward into the running
/// averages.
void update_running_stats(MlpParams& params, const MlpSpec& spec, const ForwardCache& cache);

}  // namespace vicreg
