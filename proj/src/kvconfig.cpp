#include "chopil/kvconfig.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "chopil/errors.hpp"

namespace chopil {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected 'key = value'", lineno);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", lineno);
    if (cfg.values_.count(key) != 0) {
      throw ParseError("duplicate key '" + key + "'", lineno);
    }
    cfg.values_[key] = value;
    cfg.lines_[key] = lineno;
  }
  return cfg;
}

const std::string* KvConfig::find(const std::string& key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

bool KvConfig::has(const std::string& key) const {
  return values_.count(key) != 0;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  if (v == nullptr) return fallback;
  try {
    std::size_t pos = 0;
    const double out = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing text");
    return out;
  } catch (const std::exception&) {
    throw ParseError("key '" + key + "' is not a number: " + *v,
                     lines_.at(key));
  }
}

int KvConfig::get_int(const std::string& key, int fallback) const {
  const std::string* v = find(key);
  if (v == nullptr) return fallback;
  try {
    std::size_t pos = 0;
    const long out = std::stol(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing text");
    return static_cast<int>(out);
  } catch (const std::exception&) {
    throw ParseError("key '" + key + "' is not an integer: " + *v,
                     lines_.at(key));
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (v == nullptr) return fallback;
  std::string low = *v;
  std::transform(low.begin(), low.end(), low.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (low == "true" || low == "1" || low == "yes" || low == "on") return true;
  if (low == "false" || low == "0" || low == "no" || low == "off") return false;
  throw ParseError("key '" + key + "' is not a boolean: " + *v, lines_.at(key));
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
  const std::string* v = find(key);
  return v == nullptr ? fallback : *v;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys{
      "sim.rate_hz",
      "sim.max_linear_speed",
      "sim.max_angular_speed",
      "sim.max_opening_speed",
      "sim.tracking_noise_std",
      "sim.bias_norm_min",
      "sim.bias_norm_max",
      "sim.grasp_tolerance",
      "sim.close_threshold",
      "sim.lift_height",
      "sim.hold_duration",
      "sim.time_limit",
      "sim.home_jitter_std",
      "sim.expert_noise_std",
      "train.epochs",
      "train.batch_size",
      "train.learning_rate",
      "train.momentum",
      "train.sample_stride",
      "train.w_pos",
      "train.w_rot",
      "train.w_open",
      "noise.eta",
      "noise.fraction",
      "knn.k",
      "knn.dedup_epsilon",
      "ensemble.quantile",
      "bench.demos_per_object",
      "bench.n_seeds",
      "bench.base_seed",
      "bench.grid_n",
      "bench.trials_per_cell",
      "bench.export_point_clouds",
      "bench.demo_dir",
  };
  return keys;
}

std::vector<std::string> unknown_keys(const KvConfig& cfg) {
  const auto& known = known_config_keys();
  std::vector<std::string> out;
  for (const auto& [key, _] : cfg.entries()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      out.push_back(key);
    }
  }
  return out;
}

void apply_config(const KvConfig& cfg, SimConfig& sim) {
  sim.rate_hz = cfg.get_double("sim.rate_hz", sim.rate_hz);
  sim.max_linear_speed = cfg.get_double("sim.max_linear_speed", sim.max_linear_speed);
  sim.max_angular_speed = cfg.get_double("sim.max_angular_speed", sim.max_angular_speed);
  sim.max_opening_speed = cfg.get_double("sim.max_opening_speed", sim.max_opening_speed);
  sim.tracking_noise_std = cfg.get_double("sim.tracking_noise_std", sim.tracking_noise_std);
  sim.bias_norm_min = cfg.get_double("sim.bias_norm_min", sim.bias_norm_min);
  sim.bias_norm_max = cfg.get_double("sim.bias_norm_max", sim.bias_norm_max);
  sim.grasp_tolerance = cfg.get_double("sim.grasp_tolerance", sim.grasp_tolerance);
  sim.close_threshold = cfg.get_double("sim.close_threshold", sim.close_threshold);
  sim.lift_height = cfg.get_double("sim.lift_height", sim.lift_height);
  sim.hold_duration = cfg.get_double("sim.hold_duration", sim.hold_duration);
  sim.time_limit = cfg.get_double("sim.time_limit", sim.time_limit);
  sim.home_jitter_std = cfg.get_double("sim.home_jitter_std", sim.home_jitter_std);
  sim.expert_noise_std = cfg.get_double("sim.expert_noise_std", sim.expert_noise_std);
}

void apply_config(const KvConfig& cfg, TrainConfig& train) {
  train.epochs = cfg.get_int("train.epochs", train.epochs);
  train.batch_size = cfg.get_int("train.batch_size", train.batch_size);
  train.learning_rate = cfg.get_double("train.learning_rate", train.learning_rate);
  train.momentum = cfg.get_double("train.momentum", train.momentum);
  train.sample_stride = cfg.get_int("train.sample_stride", train.sample_stride);
  train.loss_weights.w_pos = cfg.get_double("train.w_pos", train.loss_weights.w_pos);
  train.loss_weights.w_rot = cfg.get_double("train.w_rot", train.loss_weights.w_rot);
  train.loss_weights.w_open = cfg.get_double("train.w_open", train.loss_weights.w_open);
  if (train.noise.has_value()) {
    train.noise->eta = cfg.get_double("noise.eta", train.noise->eta);
    train.noise->fraction = cfg.get_double("noise.fraction", train.noise->fraction);
  }
}

void apply_config(const KvConfig& cfg, BenchmarkConfig& bench) {
  apply_config(cfg, bench.sim);
  bench.demos_per_object = cfg.get_int("bench.demos_per_object", bench.demos_per_object);
  bench.n_seeds = cfg.get_int("bench.n_seeds", bench.n_seeds);
  bench.base_seed = static_cast<std::uint64_t>(
      cfg.get_int("bench.base_seed", static_cast<int>(bench.base_seed)));
  bench.grid_n = cfg.get_int("bench.grid_n", bench.grid_n);
  bench.trials_per_cell = cfg.get_int("bench.trials_per_cell", bench.trials_per_cell);
  bench.epochs = cfg.get_int("train.epochs", bench.epochs);
  bench.batch_size = cfg.get_int("train.batch_size", bench.batch_size);
  bench.learning_rate = cfg.get_double("train.learning_rate", bench.learning_rate);
  bench.sample_stride = cfg.get_int("train.sample_stride", bench.sample_stride);
  bench.eta = cfg.get_double("noise.eta", bench.eta);
  bench.noise_fraction = cfg.get_double("noise.fraction", bench.noise_fraction);
  bench.knn_k = cfg.get_int("knn.k", bench.knn_k);
  bench.knn_dedup_epsilon = cfg.get_double("knn.dedup_epsilon", bench.knn_dedup_epsilon);
  bench.ensemble_quantile = cfg.get_double("ensemble.quantile", bench.ensemble_quantile);
  bench.export_point_clouds = cfg.get_bool("bench.export_point_clouds", bench.export_point_clouds);
  bench.demo_dir = cfg.get_string("bench.demo_dir", bench.demo_dir);
}

}  // namespace chopil
