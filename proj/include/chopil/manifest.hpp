#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace chopil {

std::string sha256_file(const std::string& path);

// Provenance record written next to every command's outputs: what ran, with
// which seeds, over which files (content-addressed). Wall-clock and timestamp
// live only here so the artifacts themselves stay byte-reproducible.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::map<std::string, std::string> extra;  // echoed settings (alpha, counts, ...)
  double wall_seconds = 0.0;

  void save(const std::string& path) const;  // hashes inputs/outputs on write
};

}  // namespace chopil
