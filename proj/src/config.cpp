#include "vicreg/config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vicreg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config: " + key + "=" + value + " is not " + want);
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_real(const std::string& key, const std::string& v) {
  if (v.empty()) bad_value(key, v, "a real number");
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(d)) {
    bad_value(key, v, "a finite real number");
  }
  return d;
}

long long to_integer(const std::string& key, const std::string& v) {
  if (v.empty()) bad_value(key, v, "an integer");
  char* end = nullptr;
  errno = 0;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || errno == ERANGE) bad_value(key, v, "an integer");
  return i;
}

int to_int(const std::string& key, const std::string& v) {
  const long long i = to_integer(key, v);
  if (i < -2147483647LL || i > 2147483647LL) bad_value(key, v, "a 32-bit integer");
  return static_cast<int>(i);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v[0] == '-' || v[0] == '+') bad_value(key, v, "an unsigned integer");
  char* end = nullptr;
  errno = 0;
  const unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || errno == ERANGE) bad_value(key, v, "an unsigned integer");
  return u;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true/false");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(key, trim(item)));
  if (v.back() == ',') bad_value(key, v, "a comma-separated integer list");
  return out;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

template <typename Parse>
auto parse_enum(const std::string& key, const std::string& v, Parse parse) {
  try {
    return parse(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: " + key + ": " + e.what());
  }
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// Table of every key. Accessors return references into RunConfig so the same
// lambda serves reads and writes.
const std::vector<std::pair<std::string, Field>>& field_table() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto real = [&t](const char* key, double& (*a)(RunConfig&)) {
      t.emplace_back(key, Field{[a](const RunConfig& c) { return fmt_real(a(const_cast<RunConfig&>(c))); },
                                [a, key](RunConfig& c, const std::string& v) { a(c) = to_real(key, v); }});
    };
    auto integer = [&t](const char* key, int& (*a)(RunConfig&)) {
      t.emplace_back(key, Field{[a](const RunConfig& c) { return std::to_string(a(const_cast<RunConfig&>(c))); },
                                [a, key](RunConfig& c, const std::string& v) { a(c) = to_int(key, v); }});
    };
    auto u64 = [&t](const char* key, std::uint64_t& (*a)(RunConfig&)) {
      t.emplace_back(key, Field{[a](const RunConfig& c) { return std::to_string(a(const_cast<RunConfig&>(c))); },
                                [a, key](RunConfig& c, const std::string& v) { a(c) = to_u64(key, v); }});
    };
    auto flag = [&t](const char* key, bool& (*a)(RunConfig&)) {
      t.emplace_back(key, Field{[a](const RunConfig& c) { return std::string(a(const_cast<RunConfig&>(c)) ? "true" : "false"); },
                                [a, key](RunConfig& c, const std::string& v) { a(c) = to_bool(key, v); }});
    };
    auto list = [&t](const char* key, std::vector<int>& (*a)(RunConfig&)) {
      t.emplace_back(key, Field{[a](const RunConfig& c) { return fmt_int_list(a(const_cast<RunConfig&>(c))); },
                                [a, key](RunConfig& c, const std::string& v) { a(c) = to_int_list(key, v); }});
    };

    integer("data.n_classes", [](RunConfig& c) -> int& { return c.data.n_classes; });
    integer("data.per_class", [](RunConfig& c) -> int& { return c.data.per_class; });
    integer("data.d_latent", [](RunConfig& c) -> int& { return c.data.d_latent; });
    integer("data.d_in", [](RunConfig& c) -> int& { return c.data.d_in; });
    u64("data.seed", [](RunConfig& c) -> std::uint64_t& { return c.data.seed; });
    real("data.mean_spread", [](RunConfig& c) -> double& { return c.data.mean_spread; });
    real("data.within_std", [](RunConfig& c) -> double& { return c.data.within_std; });
    real("data.min_separation", [](RunConfig& c) -> double& { return c.data.min_separation; });
    integer("data.modes_per_class", [](RunConfig& c) -> int& { return c.data.modes_per_class; });

    real("views.noise_std", [](RunConfig& c) -> double& { return c.train.views.noise_std; });
    real("views.mask_prob", [](RunConfig& c) -> double& { return c.train.views.mask_prob; });
    real("views.scale_low", [](RunConfig& c) -> double& { return c.train.views.scale_low; });
    real("views.scale_high", [](RunConfig& c) -> double& { return c.train.views.scale_high; });
    u64("views.seed", [](RunConfig& c) -> std::uint64_t& { return c.train.views.seed; });

    integer("train.epochs", [](RunConfig& c) -> int& { return c.train.epochs; });
    integer("train.batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; });
    real("train.base_lr", [](RunConfig& c) -> double& { return c.train.base_lr; });
    integer("train.warmup_epochs", [](RunConfig& c) -> int& { return c.train.warmup_epochs; });
    real("train.momentum", [](RunConfig& c) -> double& { return c.train.momentum; });
    real("train.weight_decay", [](RunConfig& c) -> double& { return c.train.weight_decay; });
    real("train.max_grad_norm", [](RunConfig& c) -> double& { return c.train.max_grad_norm; });
    real("train.lr_floor_ratio", [](RunConfig& c) -> double& { return c.train.lr_floor_ratio; });
    integer("train.diagnostic_size", [](RunConfig& c) -> int& { return c.train.diagnostic_size; });
    u64("train.seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; });
    flag("train.record_wall_time", [](RunConfig& c) -> bool& { return c.train.record_wall_time; });

    real("loss.lambda", [](RunConfig& c) -> double& { return c.train.coeffs.lambda; });
    real("loss.mu", [](RunConfig& c) -> double& { return c.train.coeffs.mu; });
    real("loss.nu", [](RunConfig& c) -> double& { return c.train.coeffs.nu; });
    real("loss.gamma", [](RunConfig& c) -> double& { return c.train.coeffs.gamma; });
    real("loss.epsilon", [](RunConfig& c) -> double& { return c.train.coeffs.epsilon; });

    flag("mechanism.use_variance_reg", [](RunConfig& c) -> bool& { return c.train.mechanism.use_variance_reg; });
    flag("mechanism.use_covariance_reg", [](RunConfig& c) -> bool& { return c.train.mechanism.use_covariance_reg; });
    flag("mechanism.use_predictor", [](RunConfig& c) -> bool& { return c.train.mechanism.use_predictor; });
    flag("mechanism.use_stop_gradient", [](RunConfig& c) -> bool& { return c.train.mechanism.use_stop_gradient; });
    flag("mechanism.use_ema", [](RunConfig& c) -> bool& { return c.train.mechanism.use_ema; });
    real("mechanism.ema_tau_initial", [](RunConfig& c) -> double& { return c.train.mechanism.ema_tau_initial; });
    t.emplace_back("mechanism.normalization_mode",
                   Field{[](const RunConfig& c) { return to_string(c.train.mechanism.normalization_mode); },
                         [](RunConfig& c, const std::string& v) {
                           c.train.mechanism.normalization_mode =
                               parse_enum("mechanism.normalization_mode", v, parse_normalization_mode);
                         }});
    t.emplace_back("mechanism.branch_mode",
                   Field{[](const RunConfig& c) { return to_string(c.train.mechanism.branch_mode); },
                         [](RunConfig& c, const std::string& v) {
                           c.train.mechanism.branch_mode =
                               parse_enum("mechanism.branch_mode", v, parse_branch_mode);
                         }});
    t.emplace_back("mechanism.distance_mode",
                   Field{[](const RunConfig& c) { return to_string(c.train.mechanism.distance_mode); },
                         [](RunConfig& c, const std::string& v) {
                           c.train.mechanism.distance_mode =
                               parse_enum("mechanism.distance_mode", v, parse_distance_mode);
                         }});
    flag("mechanism.standardize_representation",
         [](RunConfig& c) -> bool& { return c.train.mechanism.standardize_representation; });
    t.emplace_back("mechanism.objective",
                   Field{[](const RunConfig& c) { return to_string(c.train.mechanism.objective); },
                         [](RunConfig& c, const std::string& v) {
                           c.train.mechanism.objective = parse_enum("mechanism.objective", v, parse_objective);
                         }});
    real("mechanism.barlow_offdiag_weight",
         [](RunConfig& c) -> double& { return c.train.mechanism.barlow_offdiag_weight; });

    list("arch.encoder_hidden", [](RunConfig& c) -> std::vector<int>& { return c.train.arch.encoder_hidden; });
    integer("arch.representation_dim", [](RunConfig& c) -> int& { return c.train.arch.representation_dim; });
    list("arch.expander", [](RunConfig& c) -> std::vector<int>& { return c.train.arch.expander; });
    list("arch.branch_b_encoder_hidden",
         [](RunConfig& c) -> std::vector<int>& { return c.train.arch.branch_b_encoder_hidden; });
    integer("arch.predictor_hidden", [](RunConfig& c) -> int& { return c.train.arch.predictor_hidden; });
    flag("arch.encoder_standardize", [](RunConfig& c) -> bool& { return c.train.arch.encoder_standardize; });
    flag("arch.expander_standardize", [](RunConfig& c) -> bool& { return c.train.arch.expander_standardize; });
    flag("arch.predictor_standardize", [](RunConfig& c) -> bool& { return c.train.arch.predictor_standardize; });
    flag("arch.learnable_affine", [](RunConfig& c) -> bool& { return c.train.arch.learnable_affine; });
    real("arch.standardize_epsilon", [](RunConfig& c) -> double& { return c.train.arch.standardize_epsilon; });

    integer("probe.epochs", [](RunConfig& c) -> int& { return c.probe.linear.epochs; });
    real("probe.lr", [](RunConfig& c) -> double& { return c.probe.linear.lr; });
    u64("probe.seed", [](RunConfig& c) -> std::uint64_t& { return c.probe.linear.seed; });
    real("probe.init_scale", [](RunConfig& c) -> double& { return c.probe.linear.init_scale; });
    flag("probe.standardize", [](RunConfig& c) -> bool& { return c.probe.linear.standardize; });
    integer("probe.knn_k", [](RunConfig& c) -> int& { return c.probe.knn_k; });
    integer("probe.eval_stride", [](RunConfig& c) -> int& { return c.probe.eval_stride; });
    return t;
  }();
  return table;
}

const Field& field(const std::string& key) {
  static const std::map<std::string, const Field*> index = [] {
    std::map<std::string, const Field*> m;
    for (const auto& [k, f] : field_table()) m.emplace(k, &f);
    return m;
  }();
  const auto it = index.find(key);
  if (it == index.end()) throw ConfigError("config: unknown key '" + key + "'");
  return *it->second;
}

}  // namespace

void RunConfig::validate() const {
  if (data.n_classes < 1 || data.per_class < 1 || data.d_latent < 1 || data.d_in < data.d_latent) {
    throw ConfigError("config: data needs positive counts and d_latent <= d_in");
  }
  if (probe.knn_k < 1) throw ConfigError("config: probe.knn_k must be >= 1");
  if (probe.eval_stride < 2) throw ConfigError("config: probe.eval_stride must be >= 2");
  if (probe.linear.epochs < 0 || !(probe.linear.lr >= 0.0)) {
    throw ConfigError("config: probe epochs and lr must be non-negative");
  }
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, f] : field_table()) k.push_back(key);
    return k;
  }();
  return keys;
}

std::string get_config_value(const RunConfig& config, const std::string& key) {
  return field(key).get(config);
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, trim(value));
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& [key, f] : field_table()) {
    const std::string s = key.substr(0, key.find('.'));
    if (s != section) {
      if (!section.empty()) out += '\n';
      section = s;
    }
    out += key + "=" + f.get(config) + "\n";
  }
  return out;
}

RunConfig parse_config(const std::string& text, const RunConfig& defaults) {
  RunConfig config = defaults;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    }
    set_config_value(config, key, t.substr(eq + 1));
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigNotFoundError("config not found: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const std::string& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config: " + path);
  out << serialize_config(config);
}

std::string env_var_name(const std::string& key) {
  std::string name = "VICREG_";
  for (char ch : key) {
    name += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  return name;
}

std::vector<std::string> apply_env_overrides(RunConfig& config, const EnvLookup& lookup) {
  const EnvLookup get = lookup ? lookup : EnvLookup([](const char* n) { return std::getenv(n); });
  std::vector<std::string> applied;
  for (const auto& key : config_keys()) {
    if (const char* v = get(env_var_name(key).c_str())) {
      set_config_value(config, key, v);
      applied.push_back(key);
    }
  }
  return applied;
}

}  // namespace vicreg
