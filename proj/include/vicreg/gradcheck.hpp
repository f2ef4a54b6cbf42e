#pragma once

// Central finite-difference gradient checks for the loss and for the full
// encoder -> expander -> loss pipeline. The numerical side only ever calls
// forward evaluations, so it is independent of the analytical backward code.

#include "vicreg/loss.hpp"
#include "vicreg/network.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vicreg {

/// |analytic - numeric| / max(1, |analytic|, |numeric|): relative for
/// entries of magnitude above one, absolute below.
double gradient_error(double analytic, double numeric);

double max_gradient_error(const Matrix& analytic, const Matrix& numeric);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry.
Matrix numerical_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                          double h = 1e-5);

struct GradcheckCase {
  std::string kind;  // "loss" or "pipeline"
  int n = 0;
  int d = 0;
  std::uint64_t seed = 0;
  bool skipped = false;
  double max_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double max_error = 0.0;
  int checked = 0;
  int skipped = 0;
};

struct GradcheckOptions {
  std::vector<int> batch_sizes = {4, 8, 16};
  std::vector<int> dims = {2, 5, 8};
  int seeds_per_shape = 12;  // 3 x 3 x 12 = 108 configurations per suite
  std::uint64_t seed = 2021;
  double step = 1e-5;
  // Batch standardization over as few as 4 rows has large third derivatives;
  // the smaller step keeps the truncation error of the pipeline check low.
  double pipeline_step = 1e-6;
  // Cases whose hinge statistic or rectifier input lies this close to a kink
  // are skipped; a finite-difference step could straddle it.
  double kink_margin = 1e-4;
  LossCoefficients coeffs{};
};

/// Random embedding pairs, some columns above and some below the std target.
GradcheckReport check_loss_gradients(const GradcheckOptions& options = {});

/// Small encoder [3,5,4] and expander [4,6,d] with batch standardization and
/// rectifiers; checks every parameter of both networks.
GradcheckReport check_pipeline_gradients(const GradcheckOptions& options = {});

}  // namespace vicreg
