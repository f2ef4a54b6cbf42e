#include "vicreg/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vicreg {

namespace {

constexpr const char* kMagic = "vicreg-checkpoint";
constexpr int kVersion = 1;

void write_row(std::ostream& os, const char* tag, const RowVector& v) {
  os << tag << ' ' << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << format_hex(v(i));
  os << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw CheckpointFormatError("checkpoint: unexpected end of file");
    return w;
  }

  void expect(const std::string& tag) {
    const std::string w = word();
    if (w != tag) throw CheckpointFormatError("checkpoint: expected '" + tag + "', got '" + w + "'");
  }

  long integer() {
    const std::string w = word();
    char* end = nullptr;
    const long v = std::strtol(w.c_str(), &end, 10);
    if (end == w.c_str() || *end != '\0') {
      throw CheckpointFormatError("checkpoint: bad integer '" + w + "'");
    }
    return v;
  }

  double real() { return parse_real(word()); }

  RowVector row(const std::string& tag) {
    expect(tag);
    const long len = integer();
    if (len < 0) throw CheckpointFormatError("checkpoint: negative length for " + tag);
    RowVector v(len);
    for (long i = 0; i < len; ++i) v(i) = real();
    return v;
  }

  std::vector<bool> flags(std::size_t count) {
    std::vector<bool> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = integer() != 0;
    return out;
  }

 private:
  std::istream& is_;
};

}  // namespace

std::string format_hex(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", value);
  return buf;
}

double parse_real(const std::string& token) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE) {
    throw CheckpointFormatError("bad real number '" + token + "'");
  }
  return v;
}

void write_checkpoint(std::ostream& os, const std::vector<NamedModule>& modules) {
  os << kMagic << ' ' << kVersion << '\n';
  for (const auto& m : modules) {
    check_params(m.params, m.spec);
    const auto& s = m.spec;
    os << "module " << m.name << '\n';
    os << "widths";
    for (int w : s.layer_widths) os << ' ' << w;
    os << "\nactivation";
    for (bool b : s.hidden_activation) os << ' ' << (b ? 1 : 0);
    os << "\nstandardize";
    for (bool b : s.batch_standardize_hidden) os << ' ' << (b ? 1 : 0);
    os << "\naffine " << (s.learnable_affine ? 1 : 0) << '\n';
    os << "epsilon " << format_hex(s.standardize_epsilon) << '\n';
    os << "momentum " << format_hex(s.running_momentum) << '\n';
    for (const auto& l : m.params.layers) {
      os << "weight " << l.weight.rows() << ' ' << l.weight.cols() << '\n';
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < l.weight.cols(); ++j) {
          if (j) os << ' ';
          os << format_hex(l.weight(i, j));
        }
        os << '\n';
      }
      write_row(os, "bias", l.bias);
      write_row(os, "scale", l.scale);
      write_row(os, "shift", l.shift);
      write_row(os, "running_mean", l.running_mean);
      write_row(os, "running_var", l.running_var);
    }
    os << "end-module\n";
  }
}

std::vector<NamedModule> read_checkpoint(std::istream& is) {
  Reader r(is);
  r.expect(kMagic);
  const long version = r.integer();
  if (version != kVersion) {
    throw CheckpointFormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::vector<NamedModule> modules;
  std::string tag;
  while (is >> tag) {
    if (tag != "module") throw CheckpointFormatError("checkpoint: expected 'module', got '" + tag + "'");
    NamedModule m;
    m.name = r.word();

    // Widths run until the "activation" keyword.
    r.expect("widths");
    std::string w;
    while ((w = r.word()) != "activation") {
      char* end = nullptr;
      const long v = std::strtol(w.c_str(), &end, 10);
      if (end == w.c_str() || *end != '\0' || v < 1) {
        throw CheckpointFormatError("checkpoint: bad width '" + w + "'");
      }
      m.spec.layer_widths.push_back(static_cast<int>(v));
    }
    if (m.spec.layer_widths.size() < 2) throw CheckpointFormatError("checkpoint: too few widths");
    const std::size_t hidden = m.spec.layer_widths.size() - 2;
    m.spec.hidden_activation = r.flags(hidden);
    r.expect("standardize");
    m.spec.batch_standardize_hidden = r.flags(hidden);
    r.expect("affine");
    m.spec.learnable_affine = r.integer() != 0;
    r.expect("epsilon");
    m.spec.standardize_epsilon = r.real();
    r.expect("momentum");
    m.spec.running_momentum = r.real();

    for (int k = 0; k < m.spec.num_layers(); ++k) {
      LayerParams l;
      r.expect("weight");
      const long rows = r.integer();
      const long cols = r.integer();
      if (rows < 1 || cols < 1) throw CheckpointFormatError("checkpoint: bad weight shape");
      l.weight.resize(rows, cols);
      for (long i = 0; i < rows; ++i) {
        for (long j = 0; j < cols; ++j) l.weight(i, j) = r.real();
      }
      l.bias = r.row("bias");
      l.scale = r.row("scale");
      l.shift = r.row("shift");
      l.running_mean = r.row("running_mean");
      l.running_var = r.row("running_var");
      m.params.layers.push_back(std::move(l));
    }
    r.expect("end-module");
    try {
      check_params(m.params, m.spec);
    } catch (const std::exception& e) {
      throw CheckpointFormatError(std::string("checkpoint: module '") + m.name + "': " + e.what());
    }
    modules.push_back(std::move(m));
  }
  return modules;
}

void save_checkpoint(const std::string& path, const std::vector<NamedModule>& modules) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_checkpoint(os, modules);
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<NamedModule> load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("checkpoint not found: '" + path + "'");
  return read_checkpoint(is);
}

const NamedModule& find_module(const std::vector<NamedModule>& modules, const std::string& name) {
  for (const auto& m : modules) {
    if (m.name == name) return m;
  }
  throw CheckpointFormatError("checkpoint: no module named '" + name + "'");
}

}  // namespace vicreg
