#pragma once

// Plain-text parameter checkpoints.
//
// Every real number is written as a C99 hexadecimal float ("%a"), so a
// save/load round trip reproduces every bit. Layout:
//
//   vicreg-checkpoint 1
//   module <name>
//   widths <w0> <w1> ... <wL>
//   activation <0|1 per hidden layer>
//   standardize <0|1 per hidden layer>
//   affine <0|1>
//   epsilon <hexfloat>
//   momentum <hexfloat>
//   weight <rows> <cols>          (one line per row follows)
//   bias <len> <values...>
//   scale|shift|running_mean|running_var <len> <values...>   (len may be 0)
//   ... repeated per layer ...
//   end-module
//   ... further modules ...

#include "vicreg/network.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace vicreg {

struct NamedModule {
  std::string name;
  MlpSpec spec;
  MlpParams params;
};

class CheckpointFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& os, const std::vector<NamedModule>& modules);
std::vector<NamedModule> read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path, const std::vector<NamedModule>& modules);
std::vector<NamedModule> load_checkpoint(const std::string& path);

/// Finds a module by name; throws CheckpointFormatError if absent.
const NamedModule& find_module(const std::vector<NamedModule>& modules, const std::string& name);

/// "%a" formatting and its inverse; shared by every text format in the library.
std::string format_hex(double value);
double parse_real(const std::string& token);

}  // namespace vicreg
