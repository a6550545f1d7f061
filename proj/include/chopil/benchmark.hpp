#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "chopil/analysis.hpp"
#include "chopil/simulator.hpp"
#include "chopil/stats.hpp"

namespace chopil {

struct BenchmarkConfig {
  SimConfig sim;  // base env config; per-object grasp tolerance applied on top
  int demos_per_object = 100;
  int n_seeds = 5;
  std::uint64_t base_seed = 1;  // seeds are base_seed .. base_seed + n_seeds - 1
  int grid_n = 5;
  int trials_per_cell = 1;
  int epochs = 50;
  int batch_size = 256;
  double learning_rate = 1e-3;
  int sample_stride = 2;
  double eta = 0.05;
  double noise_fraction = 0.2;
  int knn_k = 5;
  double knn_dedup_epsilon = 0.0;
  double ensemble_quantile = 0.99;
  bool export_point_clouds = true;
  // When set, demos load from <demo_dir>/<object>-seed<seed>.jsonl instead of
  // being simulated; missing files fail the whole run up front.
  std::string demo_dir;

  void validate() const;
};

// one (method, object, seed) outcome
struct BenchCell {
  std::string method;
  std::string object;
  std::uint64_t seed = 0;
  double success = 0.0;  // fraction in [0,1]
  double mean_nn = std::numeric_limits<double>::quiet_NaN();
  double p95_nn = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct BenchmarkReport {
  std::vector<std::string> methods;
  std::vector<std::string> objects;
  std::vector<std::uint64_t> seeds;
  std::vector<BenchCell> cells;
  std::map<std::string, PairedTestResult> comparisons;  // on per-seed "All" success
  std::vector<ShiftReport> point_clouds;  // one designated (object, seed)
  std::string cloud_object;
  double wall_seconds = 0.0;

  const BenchCell* find(const std::string& method, const std::string& object,
                        std::uint64_t seed) const;
  // mean success fraction over seeds; object "All" averages the three objects
  double mean_success(const std::string& method, const std::string& object) const;
  // per-seed success averaged over the three objects
  std::vector<double> per_seed_all(const std::string& method) const;
  // per-seed shift metric averaged over the three objects
  std::vector<double> per_seed_shift(const std::string& method) const;
};

const std::vector<std::string>& benchmark_methods();

// naming convention shared by `gen` output and demo_dir lookup
std::string demo_file_path(const std::string& dir, const std::string& object,
                           std::uint64_t seed);

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg);

// writes benchmark_matrix.csv, benchmark_details.json and the point clouds
void save_benchmark(const BenchmarkReport& report, const BenchmarkConfig& cfg,
                    const std::string& out_dir);

}  // namespace chopil
