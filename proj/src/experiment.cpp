#include "vicreg/experiment.hpp"

#include <algorithm>
#include <stdexcept>

namespace vicreg {

namespace {

ExperimentPreset preset(std::string name, RunConfig c, Expectation e = Expectation::kNone) {
  return {std::move(name), std::move(c), e};
}

RunConfig with_coeffs(RunConfig c, double lambda, double mu, double nu) {
  c.train.coeffs.lambda = lambda;
  c.train.coeffs.mu = mu;
  c.train.coeffs.nu = nu;
  return c;
}

std::vector<ExperimentPreset> table7(const RunConfig& base) {
  return {
      preset("inv", with_coeffs(base, 1, 0, 0), Expectation::kCollapse),
      preset("inv_cov", with_coeffs(base, 25, 0, 1), Expectation::kCollapse),
      preset("inv_var", with_coeffs(base, 1, 1, 0), Expectation::kStable),
      preset("inv_var_cov", with_coeffs(base, 25, 25, 1), Expectation::kStable),
  };
}

// Rows of the mechanism matrix crossed with the three regularization levels.
// Asymmetric rows use the lighter coefficients recommended for them
// (mu=1, nu=0.01) and their own distance function.
std::vector<ExperimentPreset> table6(const RunConfig& base) {
  struct Row {
    const char* name;
    bool ema, sg, predictor, bn;
    bool asymmetric;
    DistanceMode distance;
  };
  const Row rows[] = {
      {"byol", true, false, true, true, true, DistanceMode::kNormalizedSquaredError},
      {"simsiam", false, true, true, true, true, DistanceMode::kNegativeCosine},
      {"simsiam_no_bn", false, true, true, false, true, DistanceMode::kNegativeCosine},
      {"simsiam_no_pred", false, true, false, false, true, DistanceMode::kNegativeCosine},
      {"vicreg_pred", false, false, true, false, false, DistanceMode::kSquaredError},
      {"vicreg_pred_bn", false, false, true, true, false, DistanceMode::kSquaredError},
      {"vicreg_bn", false, false, false, true, false, DistanceMode::kSquaredError},
      {"vicreg", false, false, false, false, false, DistanceMode::kSquaredError},
  };
  struct Reg {
    const char* suffix;
    bool var, cov;
  };
  const Reg regs[] = {{"no_reg", false, false}, {"var_reg", true, false}, {"var_cov_reg", true, true}};

  std::vector<ExperimentPreset> out;
  for (const auto& r : rows) {
    for (const auto& g : regs) {
      RunConfig c = r.asymmetric ? with_coeffs(base, 1, 1, 0.01) : with_coeffs(base, 25, 25, 1);
      auto& m = c.train.mechanism;
      m.use_ema = r.ema;
      m.use_stop_gradient = r.sg;
      m.use_predictor = r.predictor;
      m.distance_mode = r.distance;
      m.use_variance_reg = g.var;
      m.use_covariance_reg = g.cov;
      c.train.arch.expander_standardize = r.bn;
      c.train.arch.predictor_standardize = r.bn;
      out.push_back(preset(std::string(r.name) + "_" + g.suffix, c));
    }
  }
  return out;
}

std::vector<ExperimentPreset> table8(const RunConfig& base) {
  std::vector<ExperimentPreset> out;
  auto make = [&](const char* name, bool std_repr, NormalizationMode emb, bool hidden_std) {
    RunConfig c = base;
    c.train.mechanism.standardize_representation = std_repr;
    c.train.mechanism.normalization_mode = emb;
    c.train.arch.expander_standardize = hidden_std;
    out.push_back(preset(name, c));
  };
  make("std_repr_none_emb", true, NormalizationMode::kNone, true);
  make("std_repr_std_emb", true, NormalizationMode::kStandardize, true);
  make("none_repr_std_emb", false, NormalizationMode::kStandardize, true);
  make("std_repr_none_emb_no_hidden_std", true, NormalizationMode::kNone, false);
  make("none_repr_l2_emb", false, NormalizationMode::kL2, true);
  return out;
}

std::vector<ExperimentPreset> table4(const RunConfig& base) {
  std::vector<ExperimentPreset> out;
  for (BranchMode mode : {BranchMode::kSharedWeights, BranchMode::kDistinctWeights,
                          BranchMode::kDistinctArch}) {
    RunConfig c = base;
    c.train.mechanism.branch_mode = mode;
    out.push_back(preset(to_string(mode), c));
  }
  return out;
}

}  // namespace

std::string to_string(Expectation e) {
  switch (e) {
    case Expectation::kNone: return "none";
    case Expectation::kCollapse: return "collapse";
    case Expectation::kStable: return "stable";
  }
  return "none";
}

const std::vector<std::string>& preset_families() {
  static const std::vector<std::string> f{"table7", "table6", "table8", "table4"};
  return f;
}

std::vector<ExperimentPreset> make_presets(const std::string& family, const RunConfig& base) {
  if (family == "table7") return table7(base);
  if (family == "table6") return table6(base);
  if (family == "table8") return table8(base);
  if (family == "table4") return table4(base);
  throw std::invalid_argument("unknown preset family '" + family + "'");
}

bool tail_above(const std::vector<MetricsRow>& rows, double threshold, int tail_epochs) {
  if (rows.empty() || tail_epochs < 1) return false;
  const std::size_t n = std::min(rows.size(), static_cast<std::size_t>(tail_epochs));
  for (std::size_t i = rows.size() - n; i < rows.size(); ++i) {
    if (!(rows[i].mean_embed_std > threshold)) return false;
  }
  return true;
}

bool expectation_met(Expectation e, const std::vector<MetricsRow>& rows, double gamma,
                     const StabilityRule& rule) {
  switch (e) {
    case Expectation::kNone: return true;
    case Expectation::kCollapse: return detect_collapse(rows, gamma) == CollapseVerdict::kCollapsed;
    case Expectation::kStable:
      return detect_collapse(rows, gamma) == CollapseVerdict::kStable &&
             tail_above(rows, rule.stable_fraction * gamma, rule.tail_epochs);
  }
  return false;
}

ProbeSplit split_for_probe(const SyntheticDataset& data, int stride) {
  if (stride < 2) throw std::invalid_argument("split_for_probe: stride must be >= 2");
  std::vector<Eigen::Index> tr;
  std::vector<Eigen::Index> ev;
  for (Eigen::Index i = 0; i < data.size(); ++i) (i % stride == 0 ? ev : tr).push_back(i);
  ProbeSplit s;
  s.train_x.resize(static_cast<Eigen::Index>(tr.size()), data.x.cols());
  s.eval_x.resize(static_cast<Eigen::Index>(ev.size()), data.x.cols());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    s.train_x.row(static_cast<Eigen::Index>(i)) = data.x.row(tr[i]);
    s.train_labels.push_back(data.labels[static_cast<std::size_t>(tr[i])]);
  }
  for (std::size_t i = 0; i < ev.size(); ++i) {
    s.eval_x.row(static_cast<Eigen::Index>(i)) = data.x.row(ev[i]);
    s.eval_labels.push_back(data.labels[static_cast<std::size_t>(ev[i])]);
  }
  return s;
}

ProbeReport evaluate_probes(const Branch& encoder, const ProbeSplit& split, const ProbeConfig& config) {
  const Matrix train = encode(encoder, split.train_x);
  const Matrix eval = encode(encoder, split.eval_x);
  ProbeReport r;
  r.linear = linear_probe(train, split.train_labels, eval, split.eval_labels, config.linear);
  r.knn = knn_classify(train, split.train_labels, eval, split.eval_labels, config.knn_k);
  return r;
}

RunOutcome run_experiment(const SyntheticDataset& data, const RunConfig& config, bool with_probes) {
  config.validate();
  RunOutcome out;
  out.result = train(data, config.train);
  out.verdict = detect_collapse(out.result.metrics, config.train.coeffs.gamma);
  if (with_probes) {
    out.probes = evaluate_probes(out.result.online, split_for_probe(data, config.probe.eval_stride),
                                 config.probe);
  }
  return out;
}

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> a{"expander_width", "batch_size"};
  return a;
}

std::vector<int> default_sweep_values(const std::string& axis) {
  if (axis == "expander_width") return {32, 64, 128, 256};
  if (axis == "batch_size") return {64, 128, 256, 512};
  throw std::invalid_argument("unknown sweep axis '" + axis + "'");
}

RunConfig apply_sweep_value(const RunConfig& base, const std::string& axis, int value) {
  if (value < 1) throw std::invalid_argument("sweep values must be positive");
  RunConfig c = base;
  if (axis == "expander_width") {
    for (int& w : c.train.arch.expander) w = value;
  } else if (axis == "batch_size") {
    c.train.batch_size = value;
  } else {
    throw std::invalid_argument("unknown sweep axis '" + axis + "'");
  }
  return c;
}

}  // namespace vicreg
