#include "vicreg/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace vicreg {

namespace {

std::vector<int> concat(int first, const std::vector<int>& middle, int last) {
  std::vector<int> out;
  out.push_back(first);
  out.insert(out.end(), middle.begin(), middle.end());
  out.push_back(last);
  return out;
}

MlpSpec make_spec(std::vector<int> widths, bool standardize, const ArchitectureConfig& a) {
  MlpSpec s = MlpSpec::uniform(std::move(widths), true, standardize);
  s.learnable_affine = a.learnable_affine;
  s.standardize_epsilon = a.standardize_epsilon;
  return s;
}

// Indices of the parameter sets a cache belongs to.
enum CacheOwner : int {
  kOnlineEncoder = 0,
  kOnlineExpander = 1,
  kBranchBEncoder = 2,
  kBranchBExpander = 3,
  kPredictor = 4,
};

void accumulate(MlpParams& into, const MlpParams& g) {
  for_each_block(into, g, [](auto& a, const auto& b) { a += b; });
}

// Full forward pass of one branch, keeping everything backward needs.
struct BranchPass {
  ForwardResult encoder;
  Matrix repr_input_to_expander;  // representation after optional standardization
  ForwardResult expander;
  NormalizedEmbedding embedding;  // after the normalization mode
};

BranchPass run_branch(const Branch& b, const Matrix& x, const TrainConfig& config) {
  BranchPass p;
  p.encoder = forward(b.encoder, b.encoder_spec, x, true);
  p.repr_input_to_expander = config.mechanism.standardize_representation
                                 ? standardize_columns(p.encoder.output, config.coeffs.epsilon)
                                 : p.encoder.output;
  p.expander = forward(b.expander, b.expander_spec, p.repr_input_to_expander, true);
  p.embedding =
      apply_normalization_mode(p.expander.output, config.mechanism.normalization_mode, config.coeffs);
  return p;
}

struct BranchGrads {
  MlpParams encoder;
  MlpParams expander;
};

BranchGrads backprop_branch(const Branch& b, const BranchPass& p, const Matrix& grad_embedding,
                            const TrainConfig& config) {
  const Matrix g_exp_out = normalization_mode_backward(
      p.expander.output, config.mechanism.normalization_mode, config.coeffs, grad_embedding);
  BackwardResult ex = backward(b.expander, b.expander_spec, p.expander.cache, g_exp_out);
  Matrix g_repr = std::move(ex.grad_in);
  if (config.mechanism.standardize_representation) {
    g_repr = standardize_columns_backward(p.encoder.output, config.coeffs.epsilon, g_repr);
  }
  BackwardResult en = backward(b.encoder, b.encoder_spec, p.encoder.cache, g_repr);
  return {std::move(en.param_grads), std::move(ex.param_grads)};
}

LossCoefficients effective_coeffs(const TrainConfig& config, const LossCoefficients& normalized) {
  LossCoefficients c = normalized;
  if (!config.mechanism.use_variance_reg) c.mu = 0.0;
  if (!config.mechanism.use_covariance_reg) c.nu = 0.0;
  return c;
}

// Loss value and gradients with respect to the two embeddings (and the
// predictions, when a predictor is used).
struct ObjectiveResult {
  LossBreakdown loss;
  Matrix grad_z;
  Matrix grad_z_prime;
  Matrix grad_p;
  Matrix grad_p_prime;
};

ObjectiveResult evaluate_objective(const Matrix& z, const Matrix& z_prime, const Matrix* p,
                                   const Matrix* p_prime, const LossCoefficients& c,
                                   const MechanismConfig& m, bool need_grads) {
  ObjectiveResult r;
  if (m.objective == Objective::kBarlowTwins) {
    r.loss.total = barlow_twins_loss(z, z_prime, m.barlow_offdiag_weight, c.epsilon);
    r.loss.inv = r.loss.total;
    if (need_grads) {
      LossGradients g = barlow_twins_loss_backward(z, z_prime, m.barlow_offdiag_weight, c.epsilon);
      r.grad_z = std::move(g.grad_z);
      r.grad_z_prime = std::move(g.grad_z_prime);
    }
    return r;
  }
  if (p == nullptr) {
    r.loss = vicreg_loss(z, z_prime, c);
    if (need_grads) {
      LossGradients g = vicreg_loss_backward(z, z_prime, c);
      r.grad_z = std::move(g.grad_z);
      r.grad_z_prime = std::move(g.grad_z_prime);
    }
    return r;
  }
  // Predictor: symmetrized invariance; variance/covariance stay on Z, Z'.
  LossCoefficients no_inv = c;
  no_inv.lambda = 0.0;
  r.loss = vicreg_loss(z, z_prime, no_inv);
  r.loss.inv = symmetrized_invariance(z, z_prime, *p, *p_prime, m.distance_mode);
  r.loss.total += c.lambda * r.loss.inv;
  if (need_grads) {
    LossGradients g = vicreg_loss_backward(z, z_prime, no_inv);
    SymmetrizedGradients s = symmetrized_invariance_backward(z, z_prime, *p, *p_prime, m.distance_mode);
    r.grad_z = g.grad_z + c.lambda * s.grad_z;
    r.grad_z_prime = g.grad_z_prime + c.lambda * s.grad_z_prime;
    r.grad_p = c.lambda * s.grad_p;
    r.grad_p_prime = c.lambda * s.grad_p_prime;
  }
  return r;
}

const Branch& branch_b_of(const TrainState& s) { return s.branch_b ? *s.branch_b : s.online; }

// Branch B receives gradients unless it is marked stop-gradient or is an EMA target.
bool branch_b_trainable(const TrainConfig& config) {
  return !config.mechanism.use_stop_gradient && !config.mechanism.use_ema;
}

double mean_of(const RowVector& v) { return v.size() ? v.mean() : 0.0; }

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MlpSpec ArchitectureConfig::encoder_spec(int d_in) const {
  return make_spec(concat(d_in, encoder_hidden, representation_dim), encoder_standardize, *this);
}

MlpSpec ArchitectureConfig::branch_b_encoder_spec(int d_in) const {
  return make_spec(concat(d_in, branch_b_encoder_hidden, representation_dim), encoder_standardize,
                   *this);
}

MlpSpec ArchitectureConfig::expander_spec() const {
  if (expander.empty()) throw std::invalid_argument("architecture: expander needs widths");
  std::vector<int> widths{representation_dim};
  widths.insert(widths.end(), expander.begin(), expander.end());
  return make_spec(std::move(widths), expander_standardize, *this);
}

MlpSpec ArchitectureConfig::predictor_spec() const {
  const int d = expander.empty() ? representation_dim : expander.back();
  return make_spec({d, predictor_hidden, d}, predictor_standardize, *this);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("train: batch_size must be >= 2");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    throw std::invalid_argument("train: need 0 <= warmup_epochs < epochs");
  }
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) throw std::invalid_argument("train: bad base_lr");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train: momentum in [0,1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("train: max_grad_norm must be >= 0");
  if (!(lr_floor_ratio >= 0.0 && lr_floor_ratio <= 1.0)) {
    throw std::invalid_argument("train: lr_floor_ratio must lie in [0, 1]");
  }
  if (diagnostic_size < 2) throw std::invalid_argument("train: diagnostic_size must be >= 2");
  if (arch.representation_dim < 1 || arch.predictor_hidden < 1) {
    throw std::invalid_argument("train: architecture widths must be positive");
  }
  coeffs.validate();
  mechanism.validate();
  views.validate();
  if (mechanism.use_predictor && mechanism.objective == Objective::kBarlowTwins) {
    throw std::invalid_argument("train: the cross-correlation objective does not use a predictor");
  }
}

double effective_lr(long step, long total_steps, const TrainConfig& config) {
  const double peak = static_cast<double>(config.batch_size) / 256.0 * config.base_lr;
  if (total_steps <= 0) return peak;
  step = std::clamp(step, 0L, total_steps);
  const long warmup = static_cast<long>(std::llround(static_cast<double>(config.warmup_epochs) *
                                                     static_cast<double>(total_steps) /
                                                     static_cast<double>(config.epochs)));
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  const double floor = peak * config.lr_floor_ratio;
  const long span = total_steps - warmup;
  if (span <= 0) return floor;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(span);
  return floor + (peak - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double gradient_norm(const StepGradients& g) {
  double sq = 0.0;
  auto add = [&](const MlpParams& p) { for_each_block(p, p, [&](const auto& x, const auto&) { sq += x.squaredNorm(); }); };
  add(g.online_encoder);
  add(g.online_expander);
  if (g.branch_b_encoder) add(*g.branch_b_encoder);
  if (g.branch_b_expander) add(*g.branch_b_expander);
  if (g.predictor) add(*g.predictor);
  return std::sqrt(sq);
}

double clip_gradients(StepGradients& g, double max_norm) {
  const double norm = gradient_norm(g);
  if (!(norm > max_norm)) return norm;
  const double scale = max_norm / norm;
  auto shrink = [&](MlpParams& p) { for_each_block(p, p, [&](auto& x, const auto&) { x *= scale; }); };
  shrink(g.online_encoder);
  shrink(g.online_expander);
  if (g.branch_b_encoder) shrink(*g.branch_b_encoder);
  if (g.branch_b_expander) shrink(*g.branch_b_expander);
  if (g.predictor) shrink(*g.predictor);
  return norm;
}

void sgd_step(MlpParams& params, const MlpParams& grads, MlpParams& velocity, double lr,
              double momentum, double weight_decay) {
  for_each_block(velocity, grads, [&](auto& v, const auto& g) {
    if (v.rows() != g.rows() || v.cols() != g.cols()) {
      throw ShapeMismatchError("sgd_step: gradient and velocity shapes differ");
    }
  });
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    auto& v = velocity.layers[l];
    const auto& g = grads.layers[l];
    auto update = [&](auto& param, auto& vel, const auto& grad) {
      if (param.size() != grad.size()) throw ShapeMismatchError("sgd_step: parameter shapes differ");
      vel = momentum * vel + grad + weight_decay * param;
      if (lr != 0.0) param -= lr * vel;
    };
    update(p.weight, v.weight, g.weight);
    update(p.bias, v.bias, g.bias);
    update(p.scale, v.scale, g.scale);
    update(p.shift, v.shift, g.shift);
  }
}

TrainState init_train_state(int d_in, const TrainConfig& config) {
  config.validate();
  const auto& a = config.arch;
  const std::uint64_t seed = mix_seed(config.seed ^ 0x1234567ULL);
  TrainState s;
  s.online.encoder_spec = a.encoder_spec(d_in);
  s.online.expander_spec = a.expander_spec();
  s.online.encoder = init_params(s.online.encoder_spec, mix_seed(seed + 1));
  s.online.expander = init_params(s.online.expander_spec, mix_seed(seed + 2));
  s.online_encoder_velocity = zeros_like(s.online.encoder);
  s.online_expander_velocity = zeros_like(s.online.expander);

  const auto& m = config.mechanism;
  if (m.use_ema) {
    s.branch_b = s.online;  // target starts as a copy of the online branch
  } else if (m.branch_mode != BranchMode::kSharedWeights) {
    Branch b;
    b.encoder_spec = m.branch_mode == BranchMode::kDistinctArch ? a.branch_b_encoder_spec(d_in)
                                                                : a.encoder_spec(d_in);
    b.expander_spec = a.expander_spec();
    b.encoder = init_params(b.encoder_spec, mix_seed(seed + 3));
    b.expander = init_params(b.expander_spec, mix_seed(seed + 4));
    s.branch_b = std::move(b);
    s.branch_b_encoder_velocity = zeros_like(s.branch_b->encoder);
    s.branch_b_expander_velocity = zeros_like(s.branch_b->expander);
  }
  if (m.use_predictor) {
    s.predictor_spec = a.predictor_spec();
    s.predictor = init_params(*s.predictor_spec, mix_seed(seed + 5));
    s.predictor_velocity = zeros_like(*s.predictor);
  }
  return s;
}

StepGradients step_gradients(const TrainState& state, const Matrix& view_a, const Matrix& view_b,
                             const TrainConfig& config) {
  const auto& m = config.mechanism;
  const Branch& b = branch_b_of(state);
  const bool b_trainable = branch_b_trainable(config);
  const bool b_shared = !state.branch_b.has_value();

  const BranchPass pa = run_branch(state.online, view_a, config);
  const BranchPass pb = run_branch(b, view_b, config);
  // Under stop-gradient the second branch only contributes values.
  const DetachedMatrix detached_b = stop_gradient_mark(pb.embedding.z);
  const Matrix& z_b = b_trainable ? pb.embedding.z : detached_b.value();

  std::optional<ForwardResult> pred_a;
  std::optional<ForwardResult> pred_b;
  if (m.use_predictor) {
    pred_a = forward(*state.predictor, *state.predictor_spec, pa.embedding.z, true);
    pred_b = forward(*state.predictor, *state.predictor_spec, z_b, true);
  }

  const LossCoefficients c = effective_coeffs(config, pa.embedding.coeffs);
  ObjectiveResult obj = evaluate_objective(pa.embedding.z, z_b, pred_a ? &pred_a->output : nullptr,
                                           pred_b ? &pred_b->output : nullptr, c, m, true);
  if (!std::isfinite(obj.loss.total)) throw std::runtime_error("training diverged: non-finite loss");

  StepGradients out;
  out.loss = obj.loss;
  Matrix g_za = std::move(obj.grad_z);
  if (m.use_predictor) {
    BackwardResult pa_back = backward(*state.predictor, *state.predictor_spec, pred_a->cache, obj.grad_p);
    g_za += pa_back.grad_in;
    out.predictor = std::move(pa_back.param_grads);
    if (b_trainable) {
      BackwardResult pb_back =
          backward(*state.predictor, *state.predictor_spec, pred_b->cache, obj.grad_p_prime);
      obj.grad_z_prime += pb_back.grad_in;
      accumulate(*out.predictor, pb_back.param_grads);
    }
  }

  BranchGrads ga = backprop_branch(state.online, pa, g_za, config);
  out.online_encoder = std::move(ga.encoder);
  out.online_expander = std::move(ga.expander);
  if (b_trainable) {
    BranchGrads gb = backprop_branch(b, pb, obj.grad_z_prime, config);
    if (b_shared) {
      accumulate(out.online_encoder, gb.encoder);
      accumulate(out.online_expander, gb.expander);
    } else {
      out.branch_b_encoder = std::move(gb.encoder);
      out.branch_b_expander = std::move(gb.expander);
    }
  }

  out.caches.emplace_back(kOnlineEncoder, pa.encoder.cache);
  out.caches.emplace_back(kOnlineExpander, pa.expander.cache);
  out.caches.emplace_back(b_shared ? kOnlineEncoder : kBranchBEncoder, pb.encoder.cache);
  out.caches.emplace_back(b_shared ? kOnlineExpander : kBranchBExpander, pb.expander.cache);
  if (pred_a) {
    out.caches.emplace_back(kPredictor, pred_a->cache);
    out.caches.emplace_back(kPredictor, pred_b->cache);
  }
  return out;
}

MetricsRow evaluate_diagnostics(const TrainState& state, const Matrix& view_a,
                                const Matrix& view_b, const TrainConfig& config) {
  const auto& m = config.mechanism;
  const BranchPass pa = run_branch(state.online, view_a, config);
  const BranchPass pb = run_branch(branch_b_of(state), view_b, config);
  std::optional<Matrix> p_a;
  std::optional<Matrix> p_b;
  if (m.use_predictor) {
    p_a = forward(*state.predictor, *state.predictor_spec, pa.embedding.z, true).output;
    p_b = forward(*state.predictor, *state.predictor_spec, pb.embedding.z, true).output;
  }
  const LossCoefficients c = effective_coeffs(config, pa.embedding.coeffs);
  const ObjectiveResult obj = evaluate_objective(pa.embedding.z, pb.embedding.z,
                                                 p_a ? &*p_a : nullptr, p_b ? &*p_b : nullptr, c, m,
                                                 false);
  MetricsRow row;
  row.loss = obj.loss;
  row.mean_repr_std = mean_of(column_stds(pa.encoder.output));
  row.mean_embed_std = mean_of(column_stds(pa.embedding.z));
  row.avg_corr_repr = pa.encoder.output.cols() >= 2
                          ? avg_correlation_coefficient(pa.encoder.output, pb.encoder.output,
                                                        config.coeffs.epsilon)
                          : 0.0;
  return row;
}

std::vector<Eigen::Index> diagnostic_rows(Eigen::Index n_samples, int count, std::uint64_t seed) {
  if (count >= n_samples) {
    throw std::invalid_argument("diagnostic batch would consume the whole dataset");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n_samples));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(mix_seed(seed ^ 0xd1a6ULL));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

TrainResult train(const SyntheticDataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.size() < 1) throw std::invalid_argument("train: empty dataset");
  const auto& m = config.mechanism;

  TrainResult result;
  result.diagnostic_rows = diagnostic_rows(dataset.size(), config.diagnostic_size, config.seed);
  std::vector<Eigen::Index> train_rows;
  {
    std::vector<bool> held(static_cast<std::size_t>(dataset.size()), false);
    for (auto r : result.diagnostic_rows) held[static_cast<std::size_t>(r)] = true;
    for (Eigen::Index i = 0; i < dataset.size(); ++i) {
      if (!held[static_cast<std::size_t>(i)]) train_rows.push_back(i);
    }
  }
  const long steps_per_epoch = static_cast<long>(train_rows.size()) / config.batch_size;
  if (steps_per_epoch < 1) throw std::invalid_argument("train: batch_size exceeds training set");
  const long total_steps = steps_per_epoch * config.epochs;

  TrainState s = init_train_state(dataset.input_dim(), config);
  ViewTransformConfig diag_views = config.views;
  diag_views.seed = mix_seed(config.views.seed ^ 0xd1a9ULL);
  const ViewBatch diag = sample_view_batch(dataset.x, result.diagnostic_rows, diag_views, 0);

  std::mt19937_64 shuffle_rng(mix_seed(config.seed ^ 0x5fULL));
  const auto clock_start = std::chrono::steady_clock::now();
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train_rows.begin(), train_rows.end(), shuffle_rng);
    double lr = 0.0;
    for (long b = 0; b < steps_per_epoch; ++b, ++step) {
      const auto first = train_rows.begin() + b * config.batch_size;
      const std::vector<Eigen::Index> rows(first, first + config.batch_size);
      const ViewBatch views = sample_view_batch(dataset.x, rows, config.views,
                                                static_cast<std::uint64_t>(epoch));
      StepGradients g = step_gradients(s, views.a, views.b, config);
      if (config.max_grad_norm > 0.0) clip_gradients(g, config.max_grad_norm);

      lr = effective_lr(step, total_steps, config);
      sgd_step(s.online.encoder, g.online_encoder, s.online_encoder_velocity, lr, config.momentum,
               config.weight_decay);
      sgd_step(s.online.expander, g.online_expander, s.online_expander_velocity, lr,
               config.momentum, config.weight_decay);
      ++result.online_updates;
      if (g.branch_b_encoder) {
        sgd_step(s.branch_b->encoder, *g.branch_b_encoder, *s.branch_b_encoder_velocity, lr,
                 config.momentum, config.weight_decay);
        sgd_step(s.branch_b->expander, *g.branch_b_expander, *s.branch_b_expander_velocity, lr,
                 config.momentum, config.weight_decay);
        ++result.branch_b_updates;
      }
      if (g.predictor) {
        sgd_step(*s.predictor, *g.predictor, *s.predictor_velocity, lr, config.momentum,
                 config.weight_decay);
      }
      for (const auto& [owner, cache] : g.caches) {
        switch (owner) {
          case kOnlineEncoder: update_running_stats(s.online.encoder, s.online.encoder_spec, cache); break;
          case kOnlineExpander: update_running_stats(s.online.expander, s.online.expander_spec, cache); break;
          case kBranchBEncoder: update_running_stats(s.branch_b->encoder, s.branch_b->encoder_spec, cache); break;
          case kBranchBExpander: update_running_stats(s.branch_b->expander, s.branch_b->expander_spec, cache); break;
          case kPredictor: update_running_stats(*s.predictor, *s.predictor_spec, cache); break;
          default: break;
        }
      }
      if (m.use_ema) {
        const double tau = ema_tau(step + 1, total_steps, m.ema_tau_initial);
        s.branch_b->encoder = ema_update(s.branch_b->encoder, s.online.encoder, tau);
        s.branch_b->expander = ema_update(s.branch_b->expander, s.online.expander, tau);
      }
    }

    MetricsRow row = evaluate_diagnostics(s, diag.a, diag.b, config);
    row.epoch = epoch;
    row.lr = lr;
    if (config.record_wall_time) {
      row.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - clock_start)
                        .count();
    }
    result.metrics.push_back(row);
  }

  result.online = std::move(s.online);
  result.branch_b = std::move(s.branch_b);
  result.predictor_spec = std::move(s.predictor_spec);
  result.predictor = std::move(s.predictor);
  return result;
}

CollapseVerdict detect_collapse(const std::vector<MetricsRow>& rows, double gamma) {
  constexpr std::size_t kRun = 5;
  if (rows.size() < kRun) {
    throw std::invalid_argument("detect_collapse: need at least 5 metrics rows");
  }
  std::size_t run = 0;
  for (const auto& r : rows) {
    run = r.mean_embed_std < 0.01 * gamma ? run + 1 : 0;
    if (run >= kRun) return CollapseVerdict::kCollapsed;
  }
  return CollapseVerdict::kStable;
}

std::string to_string(CollapseVerdict v) {
  return v == CollapseVerdict::kCollapsed ? "collapsed" : "stable";
}

Matrix encode(const Branch& branch, const Matrix& x) {
  return forward(branch.encoder, branch.encoder_spec, x, false).output;
}

std::vector<NamedModule> checkpoint_modules(const TrainResult& result) {
  std::vector<NamedModule> out;
  out.push_back({"encoder", result.online.encoder_spec, result.online.encoder});
  out.push_back({"expander", result.online.expander_spec, result.online.expander});
  if (result.branch_b) {
    out.push_back({"branch_b_encoder", result.branch_b->encoder_spec, result.branch_b->encoder});
    out.push_back({"branch_b_expander", result.branch_b->expander_spec, result.branch_b->expander});
  }
  if (result.predictor) out.push_back({"predictor", *result.predictor_spec, *result.predictor});
  return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    os << r.epoch << ',' << fmt(r.loss.inv) << ',' << fmt(r.loss.var_a) << ','
       << fmt(r.loss.var_b) << ',' << fmt(r.loss.cov_a) << ',' << fmt(r.loss.cov_b) << ','
       << fmt(r.loss.total) << ',' << fmt(r.mean_repr_std) << ',' << fmt(r.mean_embed_std) << ','
       << fmt(r.avg_corr_repr) << ',' << fmt(r.lr) << ',' << r.wall_ms << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) {
    throw std::runtime_error("metrics csv: unexpected header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 12) throw std::runtime_error("metrics csv: expected 12 fields: " + line);
    MetricsRow r;
    try {
      r.epoch = std::stoi(f[0]);
      r.loss.inv = std::stod(f[1]);
      r.loss.var_a = std::stod(f[2]);
      r.loss.var_b = std::stod(f[3]);
      r.loss.cov_a = std::stod(f[4]);
      r.loss.cov_b = std::stod(f[5]);
      r.loss.total = std::stod(f[6]);
      r.mean_repr_std = std::stod(f[7]);
      r.mean_embed_std = std::stod(f[8]);
      r.avg_corr_repr = std::stod(f[9]);
      r.lr = std::stod(f[10]);
      r.wall_ms = std::stoll(f[11]);
    } catch (const std::logic_error&) {
      throw std::runtime_error("metrics csv: malformed row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

void write_metrics_jsonl(std::ostream& os, const std::vector<MetricsRow>& rows) {
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["inv"] = r.loss.inv;
    j["var_a"] = r.loss.var_a;
    j["var_b"] = r.loss.var_b;
    j["cov_a"] = r.loss.cov_a;
    j["cov_b"] = r.loss.cov_b;
    j["total"] = r.loss.total;
    j["mean_repr_std"] = r.mean_repr_std;
    j["mean_embed_std"] = r.mean_embed_std;
    j["avg_corr_repr"] = r.avg_corr_repr;
    j["lr"] = r.lr;
    j["wall_ms"] = r.wall_ms;
    os << j.dump() << '\n';
  }
}

}  // namespace vicreg
