#pragma once

// Deterministic single-threaded pretraining loop with per-epoch diagnostics.

#include "vicreg/checkpoint.hpp"
#include "vicreg/data.hpp"
#include "vicreg/loss.hpp"
#include "vicreg/network.hpp"
#include "vicreg/variants.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vicreg {

struct ArchitectureConfig {
  std::vector<int> encoder_hidden = {64};
  int representation_dim = 32;
  std::vector<int> expander = {128, 128, 128};
  // Encoder hidden widths of the second branch under BranchMode::kDistinctArch.
  std::vector<int> branch_b_encoder_hidden = {48};
  int predictor_hidden = 128;
  bool encoder_standardize = true;
  bool expander_standardize = true;
  bool predictor_standardize = true;
  bool learnable_affine = true;
  double standardize_epsilon = 1e-5;

  MlpSpec encoder_spec(int d_in) const;
  MlpSpec branch_b_encoder_spec(int d_in) const;
  MlpSpec expander_spec() const;
  MlpSpec predictor_spec() const;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 256;
  double base_lr = 0.04;
  int warmup_epochs = 10;
  // Plain SGD needs both of these to be tuned together for the collapse
  // pattern: momentum 0.9 at this rate lets the full objective diverge, and
  // without real weight decay the pure-invariance run stalls at a small but
  // nonzero spread instead of collapsing.
  double momentum = 0.5;
  double weight_decay = 1e-2;
  // Global gradient-norm clip; 0 disables it. Branches with separate random
  // weights start far apart and blow up plain SGD without it.
  double max_grad_norm = 20.0;
  // Final learning rate as a fraction of the peak; 0.00125 maps a 1.6 peak to 0.002.
  double lr_floor_ratio = 0.00125;
  LossCoefficients coeffs;
  MechanismConfig mechanism;
  ArchitectureConfig arch;
  ViewTransformConfig views;
  int diagnostic_size = 256;
  std::uint64_t seed = 0;
  bool record_wall_time = false;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct MetricsRow {
  int epoch = 0;
  LossBreakdown loss;
  double mean_repr_std = 0.0;
  double mean_embed_std = 0.0;
  double avg_corr_repr = 0.0;
  double lr = 0.0;
  long long wall_ms = 0;
};

/// Peak (batch_size/256)*base_lr, linear warmup from 0 over the warmup
/// epochs' share of total_steps, then cosine decay to peak*lr_floor_ratio.
double effective_lr(long step, long total_steps, const TrainConfig& config);

/// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v.
void sgd_step(MlpParams& params, const MlpParams& grads, MlpParams& velocity, double lr,
              double momentum, double weight_decay);

/// One branch of the joint-embedding architecture.
struct Branch {
  MlpSpec encoder_spec;
  MlpSpec expander_spec;
  MlpParams encoder;
  MlpParams expander;
};

struct TrainResult {
  Branch online;
  // Second branch when it holds its own parameters (distinct weights/arch or
  // the EMA target).
  std::optional<Branch> branch_b;
  std::optional<MlpSpec> predictor_spec;
  std::optional<MlpParams> predictor;
  std::vector<MetricsRow> metrics;
  std::vector<Eigen::Index> diagnostic_rows;
  // Gradient-write counts per parameter set, for contract checks.
  long online_updates = 0;
  long branch_b_updates = 0;
};

/// Parameters and optimizer state of a run in progress.
struct TrainState {
  Branch online;
  std::optional<Branch> branch_b;
  std::optional<MlpSpec> predictor_spec;
  std::optional<MlpParams> predictor;
  MlpParams online_encoder_velocity;
  MlpParams online_expander_velocity;
  std::optional<MlpParams> branch_b_encoder_velocity;
  std::optional<MlpParams> branch_b_expander_velocity;
  std::optional<MlpParams> predictor_velocity;
};

TrainState init_train_state(int d_in, const TrainConfig& config);

/// Gradients of one step. Absent optionals mean no gradient reaches that
/// parameter set (stop-gradient, EMA target, or no such module).
struct StepGradients {
  LossBreakdown loss;
  MlpParams online_encoder;
  MlpParams online_expander;
  std::optional<MlpParams> branch_b_encoder;
  std::optional<MlpParams> branch_b_expander;
  std::optional<MlpParams> predictor;
  // Batch-statistics caches, kept so running averages can be updated.
  std::vector<std::pair<int, ForwardCache>> caches;
};

/// Global L2 norm over every gradient block in g.
double gradient_norm(const StepGradients& g);

/// Rescales all of g so its global norm is at most max_norm; returns the norm
/// before clipping.
double clip_gradients(StepGradients& g, double max_norm);

/// Forward both views through the configured branches, evaluate the
/// objective, and backpropagate. Parameters are not modified.
StepGradients step_gradients(const TrainState& state, const Matrix& view_a, const Matrix& view_b,
                             const TrainConfig& config);

/// Loss breakdown and diagnostics on a fixed batch of view pairs, using batch
/// statistics without touching running averages.
MetricsRow evaluate_diagnostics(const TrainState& state, const Matrix& view_a,
                                const Matrix& view_b, const TrainConfig& config);

TrainResult train(const SyntheticDataset& dataset, const TrainConfig& config);

/// Seeded choice of the held-out diagnostic rows.
std::vector<Eigen::Index> diagnostic_rows(Eigen::Index n_samples, int count, std::uint64_t seed);

enum class CollapseVerdict { kStable, kCollapsed };

/// kCollapsed iff mean_embed_std < 0.01*gamma for 5 consecutive rows.
CollapseVerdict detect_collapse(const std::vector<MetricsRow>& rows, double gamma);

std::string to_string(CollapseVerdict v);

/// Encoder representations of the whole dataset in evaluation mode.
Matrix encode(const Branch& branch, const Matrix& x);

std::vector<NamedModule> checkpoint_modules(const TrainResult& result);

inline constexpr const char* kMetricsHeader =
    "epoch,inv,var_a,var_b,cov_a,cov_b,total,mean_repr_std,mean_embed_std,avg_corr_repr,lr,wall_ms";

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& is);
void write_metrics_jsonl(std::ostream& os, const std::vector<MetricsRow>& rows);

}  // namespace vicreg
