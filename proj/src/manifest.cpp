#include "vicreg/manifest.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace vicreg {

namespace {

constexpr std::uint64_t kOffset = 14695981039346656037ULL;
constexpr std::uint64_t kPrime = 1099511628211ULL;

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = kOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kPrime;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read artifact: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

ArtifactRecord describe_artifact(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read artifact: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return {path, static_cast<std::uint64_t>(bytes.size()), fnv1a64(bytes)};
}

std::string manifest_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["seeds"] = {{"data", m.config.data.seed},
                {"train", m.config.train.seed},
                {"views", m.config.train.views.seed},
                {"probe", m.config.probe.linear.seed}};
  j["config"] = serialize_config(m.config);
  nlohmann::ordered_json arts = nlohmann::ordered_json::array();
  for (const auto& a : m.artifacts) {
    arts.push_back({{"path", a.path}, {"bytes", a.bytes}, {"fnv1a64", hex64(a.fnv1a64)}});
  }
  j["artifacts"] = arts;
  nlohmann::ordered_json res = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.results) res[k] = v;
  j["results"] = res;
  return j.dump(2) + "\n";
}

void write_manifest(const std::string& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << manifest_json(m);
}

}  // namespace vicreg
