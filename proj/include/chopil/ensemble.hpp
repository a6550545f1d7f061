#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "chopil/bc.hpp"
#include "chopil/knn.hpp"

namespace chopil {

struct EnsembleConfig {
  double alpha = 0.0;
  int k = 5;

  void validate() const;  // alpha finite and >= 0, k >= 1
};

struct SwitchRecord {
  std::size_t step;
  double mean_distance;
  bool used_bc;
};

// Gate between the network and the nearest-neighbor policy: follow the
// network only while the mean distance to the k nearest demo features stays
// strictly below alpha; otherwise fall back to label blending.
class EnsemblePolicy {
 public:
  EnsemblePolicy(BCNetwork bc, KnnIndex index, EnsembleConfig cfg);

  // `history`: states observed so far this episode, newest last (a rolling
  // window of >= 3 entries is enough after the first two steps).
  Action act(const std::vector<State>& history);

  void reset();  // clears switch log and query hints at episode start

  const std::vector<SwitchRecord>& switch_log() const { return switch_log_; }
  const BCNetwork& bc() const { return bc_; }
  const KnnIndex& index() const { return index_; }
  const EnsembleConfig& config() const { return cfg_; }
  Frame frame() const { return bc_.frame(); }

 private:
  BCNetwork bc_;
  KnnIndex index_;
  EnsembleConfig cfg_;
  std::vector<SwitchRecord> switch_log_;
  std::vector<std::size_t> hints_;
};

// alpha = the given quantile of leave-one-out mean k-neighbor distance over
// the indexed demo features. quantile 0 yields 0 (every state gated to the
// non-parametric branch); quantile 1 yields the maximum.
double calibrate_alpha(const KnnIndex& index, const DemoSet& demos, double quantile);

void save_switch_log(const std::vector<SwitchRecord>& log, const std::string& path);

}  // namespace chopil
