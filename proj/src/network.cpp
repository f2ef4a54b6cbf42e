#include "vicreg/network.hpp"

#include <cmath>
#include <random>
#include <string>

namespace vicreg {

MlpSpec MlpSpec::uniform(std::vector<int> widths, bool rectify, bool standardize) {
  MlpSpec spec;
  const std::size_t hidden = widths.size() >= 2 ? widths.size() - 2 : 0;
  spec.layer_widths = std::move(widths);
  spec.hidden_activation.assign(hidden, rectify);
  spec.batch_standardize_hidden.assign(hidden, standardize);
  return spec;
}

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) {
    throw std::invalid_argument("MlpSpec: need at least two layer widths");
  }
  for (int w : layer_widths) {
    if (w < 1) throw std::invalid_argument("MlpSpec: layer widths must be positive");
  }
  const std::size_t hidden = layer_widths.size() - 2;
  if (hidden_activation.size() != hidden || batch_standardize_hidden.size() != hidden) {
    throw std::invalid_argument("MlpSpec: per-hidden-layer flags must have " +
                                std::to_string(hidden) + " entries");
  }
  if (!(standardize_epsilon >= 0.0) || !std::isfinite(standardize_epsilon)) {
    throw std::invalid_argument("MlpSpec: standardize_epsilon must be finite and >= 0");
  }
  if (!(running_momentum >= 0.0 && running_momentum <= 1.0)) {
    throw std::invalid_argument("MlpSpec: running_momentum must lie in [0, 1]");
  }
}

bool MlpSpec::standardized(int layer) const {
  return layer < num_layers() - 1 && batch_standardize_hidden[static_cast<std::size_t>(layer)];
}

bool MlpSpec::rectified(int layer) const {
  return layer < num_layers() - 1 && hidden_activation[static_cast<std::size_t>(layer)];
}

std::size_t parameter_count(const MlpParams& params) {
  std::size_t count = 0;
  for (const auto& l : params.layers) {
    count += static_cast<std::size_t>(l.weight.size() + l.bias.size() + l.scale.size() +
                                      l.shift.size());
  }
  return count;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams out;
  out.layers.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    LayerParams z;
    z.weight = Matrix::Zero(l.weight.rows(), l.weight.cols());
    z.bias = RowVector::Zero(l.bias.size());
    z.scale = RowVector::Zero(l.scale.size());
    z.shift = RowVector::Zero(l.shift.size());
    out.layers.push_back(std::move(z));
  }
  return out;
}

void check_params(const MlpParams& params, const MlpSpec& spec) {
  spec.validate();
  if (static_cast<int>(params.layers.size()) != spec.num_layers()) {
    throw ShapeMismatchError("MlpParams: layer count does not match spec");
  }
  for (int k = 0; k < spec.num_layers(); ++k) {
    const auto& l = params.layers[static_cast<std::size_t>(k)];
    const int in = spec.layer_widths[static_cast<std::size_t>(k)];
    const int out = spec.layer_widths[static_cast<std::size_t>(k) + 1];
    const bool std_layer = spec.standardized(k);
    const Eigen::Index affine = (std_layer && spec.learnable_affine) ? out : 0;
    const Eigen::Index buffers = std_layer ? out : 0;
    if (l.weight.rows() != in || l.weight.cols() != out || l.bias.size() != out ||
        l.scale.size() != affine || l.shift.size() != affine ||
        l.running_mean.size() != buffers || l.running_var.size() != buffers) {
      throw ShapeMismatchError("MlpParams: layer " + std::to_string(k) +
                               " shapes do not match spec");
    }
  }
}

bool all_finite(const MlpParams& params) {
  for (const auto& l : params.layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite() || !l.scale.allFinite() ||
        !l.shift.allFinite() || !l.running_mean.allFinite() || !l.running_var.allFinite()) {
      return false;
    }
  }
  return true;
}

MlpParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  MlpParams params;
  for (int k = 0; k < spec.num_layers(); ++k) {
    const int in = spec.layer_widths[static_cast<std::size_t>(k)];
    const int out = spec.layer_widths[static_cast<std::size_t>(k) + 1];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / in));
    LayerParams l;
    l.weight.resize(in, out);
    for (Eigen::Index i = 0; i < in; ++i) {
      for (Eigen::Index j = 0; j < out; ++j) l.weight(i, j) = normal(rng);
    }
    l.bias = RowVector::Zero(out);
    if (spec.standardized(k)) {
      if (spec.learnable_affine) {
        l.scale = RowVector::Ones(out);
        l.shift = RowVector::Zero(out);
      }
      l.running_mean = RowVector::Zero(out);
      l.running_var = RowVector::Ones(out);
    }
    params.layers.push_back(std::move(l));
  }
  return params;
}

ForwardResult forward(const MlpParams& params, const MlpSpec& spec, const Matrix& x,
                      bool training) {
  check_params(params, spec);
  require_nonempty(x, "mlp forward");
  require_finite(x, "mlp forward");
  if (x.cols() != spec.input_width()) {
    throw ShapeMismatchError("mlp forward: input has " + std::to_string(x.cols()) +
                             " columns, spec expects " + std::to_string(spec.input_width()));
  }

  ForwardResult result;
  result.cache.training = training;
  result.cache.batch_rows = x.rows();
  result.cache.layers.resize(params.layers.size());

  Matrix h = x;
  for (int k = 0; k < spec.num_layers(); ++k) {
    const auto& l = params.layers[static_cast<std::size_t>(k)];
    auto& c = result.cache.layers[static_cast<std::size_t>(k)];
    c.input = h;
    Matrix a = (h * l.weight).rowwise() + l.bias;

    if (spec.standardized(k)) {
      if (training) {
        require_min_rows(a, 2, "batch standardization");
        c.batch_mean = a.colwise().mean();
        c.batch_var = column_variances(a);
      } else {
        c.batch_mean = l.running_mean;
        c.batch_var = l.running_var;
      }
      c.std = (c.batch_var.array() + spec.standardize_epsilon).sqrt().matrix();
      require_finite(c.std, "batch standardization");
      if (!(c.std.minCoeff() > 0.0)) {
        throw DegenerateBatchError("batch standardization: zero variance with epsilon 0");
      }
      c.normalized = a.rowwise() - c.batch_mean;
      c.normalized.array().rowwise() /= c.std.array();
      a = c.normalized;
      if (spec.learnable_affine) {
        a.array().rowwise() *= l.scale.array();
        a.rowwise() += l.shift;
      }
    }
    if (spec.rectified(k)) {
      c.activation_input = a;
      a = a.cwiseMax(0.0);
    }
    h = std::move(a);
  }
  result.output = std::move(h);
  return result;
}

BackwardResult backward(const MlpParams& params, const MlpSpec& spec, const ForwardCache& cache,
                        const Matrix& grad_out) {
  check_params(params, spec);
  if (cache.layers.size() != params.layers.size()) {
    throw StaleCacheError("mlp backward: cache was produced by a different network");
  }
  if (grad_out.rows() != cache.batch_rows || grad_out.cols() != spec.output_width()) {
    throw StaleCacheError("mlp backward: grad_out " + shape_string(grad_out) +
                          " does not match the cached batch");
  }
  for (int k = 0; k < spec.num_layers(); ++k) {
    const auto& c = cache.layers[static_cast<std::size_t>(k)];
    const bool std_ok = !spec.standardized(k) || c.normalized.rows() == cache.batch_rows;
    const bool act_ok = !spec.rectified(k) || c.activation_input.rows() == cache.batch_rows;
    if (c.input.rows() != cache.batch_rows ||
        c.input.cols() != params.layers[static_cast<std::size_t>(k)].weight.rows() || !std_ok ||
        !act_ok) {
      throw StaleCacheError("mlp backward: cache layer " + std::to_string(k) + " is inconsistent");
    }
  }

  BackwardResult result;
  result.param_grads = zeros_like(params);
  const double n1 = static_cast<double>(cache.batch_rows - 1);

  Matrix g = grad_out;
  for (int k = spec.num_layers() - 1; k >= 0; --k) {
    const auto& l = params.layers[static_cast<std::size_t>(k)];
    const auto& c = cache.layers[static_cast<std::size_t>(k)];
    auto& lg = result.param_grads.layers[static_cast<std::size_t>(k)];

    if (spec.rectified(k)) {
      g = (c.activation_input.array() > 0.0).select(g, 0.0);
    }
    if (spec.standardized(k)) {
      if (spec.learnable_affine) {
        lg.scale = g.cwiseProduct(c.normalized).colwise().sum();
        lg.shift = g.colwise().sum();
        g.array().rowwise() *= l.scale.array();
      }
      if (cache.training) {
        const RowVector mean_g = g.colwise().mean();
        const RowVector proj = g.cwiseProduct(c.normalized).colwise().sum() / n1;
        g.rowwise() -= mean_g;
        g.array() -= c.normalized.array().rowwise() * proj.array();
      }
      g.array().rowwise() /= c.std.array();
    }
    lg.weight = c.input.transpose() * g;
    lg.bias = g.colwise().sum();
    g = g * l.weight.transpose();
  }
  result.grad_in = std::move(g);
  return result;
}

void update_running_stats(MlpParams& params, const MlpSpec& spec, const ForwardCache& cache) {
  if (!cache.training) return;
  if (cache.layers.size() != params.layers.size()) {
    throw StaleCacheError("update_running_stats: cache was produced by a different network");
  }
  const double m = spec.running_momentum;
  for (int k = 0; k < spec.num_layers(); ++k) {
    if (!spec.standardized(k)) continue;
    auto& l = params.layers[static_cast<std::size_t>(k)];
    const auto& c = cache.layers[static_cast<std::size_t>(k)];
    l.running_mean = m * l.running_mean + (1.0 - m) * c.batch_mean;
    l.running_var = m * l.running_var + (1.0 - m) * c.batch_var;
  }
}

}  // namespace vicreg
