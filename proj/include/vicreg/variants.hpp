#pragma once

// Collapse-prevention mechanisms that wrap the core objective: predictor with
// symmetrized invariance, stop-gradient, momentum (EMA) target, branch weight
// sharing, embedding normalization, and a cross-correlation baseline loss.

#include "vicreg/loss.hpp"
#include "vicreg/network.hpp"

#include <string>

namespace vicreg {

enum class NormalizationMode { kNone, kStandardize, kL2 };
enum class BranchMode { kSharedWeights, kDistinctWeights, kDistinctArch };

/// Distance D used by the symmetrized invariance term.
enum class DistanceMode {
  kSquaredError,            // ||a - b||^2
  kNormalizedSquaredError,  // ||a/|a| - b/|b|||^2
  kNegativeCosine,          // -cos(a, b)
};

enum class Objective { kVicreg, kBarlowTwins };

struct MechanismConfig {
  bool use_variance_reg = true;
  bool use_covariance_reg = true;
  bool use_predictor = false;
  bool use_stop_gradient = false;
  bool use_ema = false;
  double ema_tau_initial = 0.99;
  NormalizationMode normalization_mode = NormalizationMode::kNone;
  BranchMode branch_mode = BranchMode::kSharedWeights;
  DistanceMode distance_mode = DistanceMode::kSquaredError;
  // Standardize the representation before it enters the expander.
  bool standardize_representation = false;
  Objective objective = Objective::kVicreg;
  double barlow_offdiag_weight = 5e-3;

  /// Rejects stop-gradient together with EMA, EMA with distinct
  /// architectures, and out-of-range numeric fields.
  void validate() const;

  friend bool operator==(const MechanismConfig&, const MechanismConfig&) = default;
};

std::string to_string(NormalizationMode mode);
std::string to_string(BranchMode mode);
std::string to_string(DistanceMode mode);
std::string to_string(Objective objective);
NormalizationMode parse_normalization_mode(const std::string& s);
BranchMode parse_branch_mode(const std::string& s);
DistanceMode parse_distance_mode(const std::string& s);
Objective parse_objective(const std::string& s);

/// (1/2n) sum_i D(z_i, p'_i) + (1/2n) sum_i D(z'_i, p_i).
double symmetrized_invariance(const Matrix& z, const Matrix& z_prime, const Matrix& p,
                              const Matrix& p_prime, DistanceMode mode);

struct SymmetrizedGradients {
  Matrix grad_z;
  Matrix grad_z_prime;
  Matrix grad_p;
  Matrix grad_p_prime;
};

SymmetrizedGradients symmetrized_invariance_backward(const Matrix& z, const Matrix& z_prime,
                                                     const Matrix& p, const Matrix& p_prime,
                                                     DistanceMode mode);

/// target <- tau * target + (1 - tau) * online, for every trainable block.
/// Running-statistic buffers are left to the target's own forward passes.
MlpParams ema_update(const MlpParams& target, const MlpParams& online, double tau);

/// Cosine schedule from tau_initial at step 0 to 1 at total_steps.
double ema_tau(long step, long total_steps, double tau_initial);

/// A batch whose gradient must not be propagated. Holding the value behind
/// this type keeps it out of any backward call by construction.
class DetachedMatrix {
 public:
  explicit DetachedMatrix(Matrix value) : value_(std::move(value)) {}
  const Matrix& value() const { return value_; }

 private:
  Matrix value_;
};

DetachedMatrix stop_gradient_mark(const Matrix& z);

struct NormalizedEmbedding {
  Matrix z;
  LossCoefficients coeffs;
};

/// kNone is the identity; kStandardize standardizes columns with
/// coeffs.epsilon; kL2 normalizes rows and sets gamma to 1/sqrt(d).
NormalizedEmbedding apply_normalization_mode(const Matrix& z, NormalizationMode mode,
                                             const LossCoefficients& coeffs);

Matrix normalization_mode_backward(const Matrix& z, NormalizationMode mode,
                                   const LossCoefficients& coeffs, const Matrix& grad_out);

/// Cross-correlation baseline: M = Zhat^T Zhat' / (n-1) of the standardized
/// batches; returns sum_i (1 - M_ii)^2 + offdiag_weight * sum_{i!=j} M_ij^2.
double barlow_twins_loss(const Matrix& z, const Matrix& z_prime, double offdiag_weight,
                         double epsilon = 1e-4);

LossGradients barlow_twins_loss_backward(const Matrix& z, const Matrix& z_prime,
                                         double offdiag_weight, double epsilon = 1e-4);

}  // namespace vicreg
