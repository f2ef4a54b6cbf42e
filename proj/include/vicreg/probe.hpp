#pragma once

// Frozen-representation evaluation: softmax linear probe and cosine kNN.
// Both take representation matrices only, so they cannot touch encoder weights.

#include "vicreg/linalg.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vicreg {

enum class ProbeProtocol { kLinear, kKnn };

struct ProbeResult {
  double accuracy = 0.0;
  long n_correct = 0;
  long n_eval = 0;
  ProbeProtocol protocol = ProbeProtocol::kLinear;
  std::optional<int> k;
  std::vector<int> predictions;
};

struct LinearProbeOptions {
  int epochs = 500;
  double lr = 0.5;
  std::uint64_t seed = 0;
  // Std of the seeded Gaussian initial weights; 0 starts from all zeros.
  double init_scale = 0.0;
  // Standardize features with training-set statistics before fitting.
  bool standardize = true;

  friend bool operator==(const LinearProbeOptions&, const LinearProbeOptions&) = default;
};

/// Multinomial logistic regression trained by full-batch gradient descent on
/// the mean cross-entropy. Argmax ties go to the lowest class index.
ProbeResult linear_probe(const Matrix& train_reps, const std::vector<int>& train_labels,
                         const Matrix& eval_reps, const std::vector<int>& eval_labels,
                         const LinearProbeOptions& options = {});

ProbeResult linear_probe(const Matrix& train_reps, const std::vector<int>& train_labels,
                         const Matrix& eval_reps, const std::vector<int>& eval_labels, int epochs,
                         double lr, std::uint64_t seed);

/// Cosine-similarity kNN with majority vote. Similarity ties prefer the lower
/// training index; vote ties go to the lowest class index. Zero rows have
/// similarity 0 to everything.
ProbeResult knn_classify(const Matrix& train_reps, const std::vector<int>& train_labels,
                         const Matrix& eval_reps, const std::vector<int>& eval_labels, int k);

std::string to_string(ProbeProtocol p);

}  // namespace vicreg
