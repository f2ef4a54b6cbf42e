#pragma once

// Flat key=value run configuration with dotted section keys, e.g.
//
//   loss.lambda=25
//   arch.expander=128,128,128
//   mechanism.branch_mode=shared_weights
//
// Blank lines and lines starting with '#' are ignored. Unknown keys, repeated
// keys and unparsable values are errors. Reals are written with 17
// significant digits, so serialize -> parse reproduces every bit.
//
// Any key can be overridden from the environment: VICREG_ followed by the key
// upper-cased with dots replaced by underscores (VICREG_LOSS_LAMBDA=1).

#include "vicreg/data.hpp"
#include "vicreg/probe.hpp"
#include "vicreg/trainer.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vicreg {

struct ProbeConfig {
  LinearProbeOptions linear;
  int knn_k = 20;
  // Every eval_stride-th sample goes to the probe's evaluation split.
  int eval_stride = 4;

  friend bool operator==(const ProbeConfig&, const ProbeConfig&) = default;
};

struct RunConfig {
  DatasetConfig data;
  TrainConfig train;
  ProbeConfig probe;

  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigNotFoundError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// All recognised keys in serialization order.
const std::vector<std::string>& config_keys();

std::string get_config_value(const RunConfig& config, const std::string& key);
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);

std::string serialize_config(const RunConfig& config);

/// Keys absent from the text keep their defaults.
RunConfig parse_config(const std::string& text, const RunConfig& defaults = {});

RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& config);

/// "loss.lambda" -> "VICREG_LOSS_LAMBDA".
std::string env_var_name(const std::string& key);

using EnvLookup = std::function<const char*(const char*)>;

/// Applies every VICREG_* override found through lookup (getenv by default).
/// Returns the keys that were overridden.
std::vector<std::string> apply_env_overrides(RunConfig& config, const EnvLookup& lookup = {});

}  // namespace vicreg
