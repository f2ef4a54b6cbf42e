#pragma once

// Named experiment presets (ablation families and sweeps) and the glue that
// runs one configuration end to end: dataset, pretraining, collapse verdict
// and frozen-representation probes.

#include "vicreg/config.hpp"
#include "vicreg/probe.hpp"
#include "vicreg/trainer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vicreg {

enum class Expectation { kNone, kCollapse, kStable };

std::string to_string(Expectation e);

struct ExperimentPreset {
  std::string name;
  RunConfig config;
  Expectation expectation = Expectation::kNone;
};

/// "table7", "table6", "table8", "table4".
const std::vector<std::string>& preset_families();

/// Presets of one family derived from base. Throws std::invalid_argument for
/// an unknown family.
std::vector<ExperimentPreset> make_presets(const std::string& family, const RunConfig& base = {});

/// A run counts as stable when it is not collapsed and mean_embed_std stays
/// above stable_fraction * gamma over the last tail_epochs rows.
struct StabilityRule {
  int tail_epochs = 50;
  double stable_fraction = 0.5;
};

bool tail_above(const std::vector<MetricsRow>& rows, double threshold, int tail_epochs);

bool expectation_met(Expectation e, const std::vector<MetricsRow>& rows, double gamma,
                     const StabilityRule& rule = {});

struct ProbeSplit {
  Matrix train_x;
  std::vector<int> train_labels;
  Matrix eval_x;
  std::vector<int> eval_labels;
};

/// Every stride-th sample (starting at 0) goes to the evaluation side.
ProbeSplit split_for_probe(const SyntheticDataset& data, int stride);

struct ProbeReport {
  ProbeResult linear;
  ProbeResult knn;
};

/// Encodes both splits with the frozen encoder and runs both probes.
ProbeReport evaluate_probes(const Branch& encoder, const ProbeSplit& split, const ProbeConfig& config);

struct RunOutcome {
  TrainResult result;
  CollapseVerdict verdict = CollapseVerdict::kStable;
  std::optional<ProbeReport> probes;
};

RunOutcome run_experiment(const SyntheticDataset& data, const RunConfig& config, bool with_probes);

/// Sweep axes: "expander_width" (all expander layers set to the value) and
/// "batch_size".
const std::vector<std::string>& sweep_axes();
std::vector<int> default_sweep_values(const std::string& axis);
RunConfig apply_sweep_value(const RunConfig& base, const std::string& axis, int value);

}  // namespace vicreg
