#pragma once

// Run manifests: the resolved configuration, every seed, and a content hash of
// each artifact a command wrote. The embedded config text is enough to rerun
// the command bit-exactly.

#include "vicreg/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vicreg {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t fnv1a64_file(const std::string& path);

struct ArtifactRecord {
  std::string path;
  std::uint64_t bytes = 0;
  std::uint64_t fnv1a64 = 0;
};

ArtifactRecord describe_artifact(const std::string& path);

struct Manifest {
  std::string command;  // e.g. "train", "ablate table7"
  RunConfig config;
  std::vector<ArtifactRecord> artifacts;
  // Free-form key/value results (verdicts, accuracies) in insertion order.
  std::vector<std::pair<std::string, std::string>> results;
};

std::string manifest_json(const Manifest& m);
void write_manifest(const std::string& path, const Manifest& m);

}  // namespace vicreg
