#include "vicreg/variants.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vicreg {

void MechanismConfig::validate() const {
  if (use_stop_gradient && use_ema) {
    throw std::invalid_argument("mechanism: stop-gradient and EMA target are mutually exclusive");
  }
  if (use_ema && branch_mode == BranchMode::kDistinctArch) {
    throw std::invalid_argument("mechanism: EMA target requires identical branch architectures");
  }
  if (!(ema_tau_initial >= 0.0 && ema_tau_initial < 1.0)) {
    throw std::invalid_argument("mechanism: ema_tau_initial must lie in [0, 1)");
  }
  if (!(barlow_offdiag_weight >= 0.0) || !std::isfinite(barlow_offdiag_weight)) {
    throw std::invalid_argument("mechanism: barlow_offdiag_weight must be finite and >= 0");
  }
}

std::string to_string(NormalizationMode mode) {
  switch (mode) {
    case NormalizationMode::kNone: return "none";
    case NormalizationMode::kStandardize: return "standardize_embeddings";
    case NormalizationMode::kL2: return "l2_normalize_embeddings";
  }
  return "none";
}

std::string to_string(BranchMode mode) {
  switch (mode) {
    case BranchMode::kSharedWeights: return "shared_weights";
    case BranchMode::kDistinctWeights: return "distinct_weights";
    case BranchMode::kDistinctArch: return "distinct_arch";
  }
  return "shared_weights";
}

std::string to_string(DistanceMode mode) {
  switch (mode) {
    case DistanceMode::kSquaredError: return "squared_error";
    case DistanceMode::kNormalizedSquaredError: return "normalized_squared_error";
    case DistanceMode::kNegativeCosine: return "negative_cosine";
  }
  return "squared_error";
}

std::string to_string(Objective objective) {
  return objective == Objective::kVicreg ? "vicreg" : "barlow_twins";
}

NormalizationMode parse_normalization_mode(const std::string& s) {
  if (s == "none") return NormalizationMode::kNone;
  if (s == "standardize_embeddings" || s == "standardize") return NormalizationMode::kStandardize;
  if (s == "l2_normalize_embeddings" || s == "l2") return NormalizationMode::kL2;
  throw std::invalid_argument("unknown normalization mode '" + s + "'");
}

BranchMode parse_branch_mode(const std::string& s) {
  if (s == "shared_weights" || s == "SW") return BranchMode::kSharedWeights;
  if (s == "distinct_weights" || s == "DW") return BranchMode::kDistinctWeights;
  if (s == "distinct_arch" || s == "DA") return BranchMode::kDistinctArch;
  throw std::invalid_argument("unknown branch mode '" + s + "'");
}

DistanceMode parse_distance_mode(const std::string& s) {
  if (s == "squared_error") return DistanceMode::kSquaredError;
  if (s == "normalized_squared_error") return DistanceMode::kNormalizedSquaredError;
  if (s == "negative_cosine") return DistanceMode::kNegativeCosine;
  throw std::invalid_argument("unknown distance mode '" + s + "'");
}

Objective parse_objective(const std::string& s) {
  if (s == "vicreg") return Objective::kVicreg;
  if (s == "barlow_twins") return Objective::kBarlowTwins;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

namespace {

double row_norm_checked(const Matrix& m, Eigen::Index i, const char* what) {
  const double norm = m.row(i).norm();
  if (!(norm > 0.0)) {
    throw ZeroNormError(std::string(what) + ": row " + std::to_string(i) + " has zero norm");
  }
  return norm;
}

// D(a_i, b_i) summed over rows, plus optional per-row gradients.
double distance_sum(const Matrix& a, const Matrix& b, DistanceMode mode, Matrix* grad_a,
                    Matrix* grad_b) {
  double total = 0.0;
  if (grad_a) grad_a->resize(a.rows(), a.cols());
  if (grad_b) grad_b->resize(b.rows(), b.cols());
  if (mode == DistanceMode::kSquaredError) {
    // Same reduction as invariance_term, so the degenerate case matches bitwise.
    const Matrix diff = a - b;
    if (grad_a) *grad_a = 2.0 * diff;
    if (grad_b) *grad_b = -2.0 * diff;
    return diff.squaredNorm();
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double na = row_norm_checked(a, i, "symmetrized_invariance");
    const double nb = row_norm_checked(b, i, "symmetrized_invariance");
    const RowVector u = a.row(i) / na;
    const RowVector v = b.row(i) / nb;
    RowVector du;
    RowVector dv;
    if (mode == DistanceMode::kNormalizedSquaredError) {
      total += (u - v).squaredNorm();
      du = 2.0 * (u - v);
      dv = -du;
    } else {
      total += -u.dot(v);
      du = -v;
      dv = -u;
    }
    // Chain through x -> x/|x|: (g - u (u.g)) / |x|.
    if (grad_a) grad_a->row(i) = (du - u * u.dot(du)) / na;
    if (grad_b) grad_b->row(i) = (dv - v * v.dot(dv)) / nb;
  }
  return total;
}

void check_four(const Matrix& z, const Matrix& z_prime, const Matrix& p, const Matrix& p_prime) {
  require_nonempty(z, "symmetrized_invariance");
  require_same_shape(z, z_prime, "symmetrized_invariance");
  require_same_shape(z, p, "symmetrized_invariance");
  require_same_shape(z, p_prime, "symmetrized_invariance");
}

}  // namespace

double symmetrized_invariance(const Matrix& z, const Matrix& z_prime, const Matrix& p,
                              const Matrix& p_prime, DistanceMode mode) {
  check_four(z, z_prime, p, p_prime);
  const double two_n = 2.0 * static_cast<double>(z.rows());
  return (distance_sum(z, p_prime, mode, nullptr, nullptr) + distance_sum(z_prime, p, mode, nullptr, nullptr)) /
         two_n;
}

SymmetrizedGradients symmetrized_invariance_backward(const Matrix& z, const Matrix& z_prime,
                                                     const Matrix& p, const Matrix& p_prime,
                                                     DistanceMode mode) {
  check_four(z, z_prime, p, p_prime);
  const double two_n = 2.0 * static_cast<double>(z.rows());
  SymmetrizedGradients g;
  distance_sum(z, p_prime, mode, &g.grad_z, &g.grad_p_prime);
  distance_sum(z_prime, p, mode, &g.grad_z_prime, &g.grad_p);
  g.grad_z /= two_n;
  g.grad_z_prime /= two_n;
  g.grad_p /= two_n;
  g.grad_p_prime /= two_n;
  return g;
}

MlpParams ema_update(const MlpParams& target, const MlpParams& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("ema_update: tau must lie in [0, 1]");
  MlpParams out = target;
  for_each_block(out, online, [&](auto& t, const auto& o) {
    if (t.rows() != o.rows() || t.cols() != o.cols()) {
      throw ShapeMismatchError("ema_update: parameter shapes differ");
    }
    // tau == 1 must leave the target bitwise unchanged.
    if (tau != 1.0) t = tau * t + (1.0 - tau) * o;
  });
  return out;
}

double ema_tau(long step, long total_steps, double tau_initial) {
  if (total_steps <= 0) return 1.0;
  const double progress = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
  return 1.0 - (1.0 - tau_initial) * 0.5 * (std::cos(std::numbers::pi * progress) + 1.0);
}

DetachedMatrix stop_gradient_mark(const Matrix& z) { return DetachedMatrix(z); }

NormalizedEmbedding apply_normalization_mode(const Matrix& z, NormalizationMode mode,
                                             const LossCoefficients& coeffs) {
  switch (mode) {
    case NormalizationMode::kNone:
      return {z, coeffs};
    case NormalizationMode::kStandardize:
      return {standardize_columns(z, coeffs.epsilon), coeffs};
    case NormalizationMode::kL2: {
      LossCoefficients c = coeffs;
      c.gamma = 1.0 / std::sqrt(static_cast<double>(z.cols()));
      return {l2_normalize_rows(z), c};
    }
  }
  return {z, coeffs};
}

Matrix normalization_mode_backward(const Matrix& z, NormalizationMode mode,
                                   const LossCoefficients& coeffs, const Matrix& grad_out) {
  switch (mode) {
    case NormalizationMode::kNone: return grad_out;
    case NormalizationMode::kStandardize:
      return standardize_columns_backward(z, coeffs.epsilon, grad_out);
    case NormalizationMode::kL2: return l2_normalize_rows_backward(z, grad_out);
  }
  return grad_out;
}

namespace {

Matrix cross_correlation(const Matrix& a_hat, const Matrix& b_hat) {
  return (a_hat.transpose() * b_hat) / static_cast<double>(a_hat.rows() - 1);
}

}  // namespace

double barlow_twins_loss(const Matrix& z, const Matrix& z_prime, double offdiag_weight,
                         double epsilon) {
  require_same_shape(z, z_prime, "barlow_twins_loss");
  require_min_rows(z, 2, "barlow_twins_loss");
  const Matrix m = cross_correlation(standardize_columns(z, epsilon),
                                     standardize_columns(z_prime, epsilon));
  const double on = (1.0 - m.diagonal().array()).square().sum();
  const double off = m.squaredNorm() - m.diagonal().squaredNorm();
  return on + offdiag_weight * off;
}

LossGradients barlow_twins_loss_backward(const Matrix& z, const Matrix& z_prime,
                                         double offdiag_weight, double epsilon) {
  require_same_shape(z, z_prime, "barlow_twins_loss_backward");
  require_min_rows(z, 2, "barlow_twins_loss_backward");
  const Matrix a = standardize_columns(z, epsilon);
  const Matrix b = standardize_columns(z_prime, epsilon);
  const Matrix m = cross_correlation(a, b);
  Matrix g = 2.0 * offdiag_weight * m;
  g.diagonal() = -2.0 * (1.0 - m.diagonal().array()).matrix();
  const double n1 = static_cast<double>(z.rows() - 1);
  LossGradients out;
  out.grad_z = standardize_columns_backward(z, epsilon, b * g.transpose() / n1);
  out.grad_z_prime = standardize_columns_backward(z_prime, epsilon, a * g / n1);
  return out;
}

}  // namespace vicreg
