#pragma once

#include <map>
#include <string>
#include <vector>

#include "chopil/bc.hpp"
#include "chopil/benchmark.hpp"

namespace chopil {

// Plain-text `key = value` configuration.  Lines starting with '#' (or blank
// lines) are ignored; keys are dotted, e.g. `sim.tracking_noise_std = 0.0005`.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  // Typed getters fall back to `fallback` when the key is absent and throw
  // ParseError (with the line number of the offending entry) when the stored
  // text does not convert.
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;

  const std::string* find(const std::string& key) const;
};

// every key any command understands; one shared file can drive the whole
// pipeline
const std::vector<std::string>& known_config_keys();

// keys in the file that no command understands (typo guard)
std::vector<std::string> unknown_keys(const KvConfig& cfg);

// Overlay config-file values onto defaulted structs.  Flag handling in the
// CLI runs after these, so command-line values win.
void apply_config(const KvConfig& cfg, SimConfig& sim);
void apply_config(const KvConfig& cfg, TrainConfig& train);
void apply_config(const KvConfig& cfg, BenchmarkConfig& bench);

}  // namespace chopil
