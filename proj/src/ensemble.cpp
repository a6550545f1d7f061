#include "chopil/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "chopil/errors.hpp"

namespace chopil {

void EnsembleConfig::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw std::invalid_argument("alpha must be finite and >= 0");
  }
  if (k < 1) throw std::invalid_argument("k must be >= 1");
}

EnsemblePolicy::EnsemblePolicy(BCNetwork bc, KnnIndex index, EnsembleConfig cfg)
    : bc_(std::move(bc)), index_(std::move(index)), cfg_(cfg) {
  cfg_.validate();
  if (bc_.frame() != index_.frame()) {
    throw ValidationError("network and index disagree on frame");
  }
  if (cfg_.k != index_.k()) {
    throw std::invalid_argument("ensemble k must match index k");
  }
}

void EnsemblePolicy::reset() {
  switch_log_.clear();
  hints_.clear();
}

Action EnsemblePolicy::act(const std::vector<State>& history) {
  if (history.empty()) throw std::invalid_argument("act: empty history");
  const State& current = history.back();
  if (current.frame != frame()) {
    throw ValidationError("state frame does not match policy frame");
  }
  std::vector<Pose> poses;
  poses.reserve(history.size());
  for (const auto& s : history) poses.push_back(s.pose);
  const KnnFeature f = feature_from_history(poses, current.object_position);

  const auto nbrs = index_.query(f, hints_);
  hints_.clear();
  for (const auto& nb : nbrs) {
    hints_.push_back(nb.id);
    if (nb.id + 1 < index_.size()) hints_.push_back(nb.id + 1);
  }

  double mean_d = 0.0;
  for (const auto& nb : nbrs) mean_d += nb.distance;
  mean_d /= static_cast<double>(nbrs.size());

  const bool use_bc = mean_d < cfg_.alpha;
  switch_log_.push_back({switch_log_.size(), mean_d, use_bc});
  return use_bc ? bc_.predict(current) : index_.blend_labels(nbrs);
}

double calibrate_alpha(const KnnIndex& index, const DemoSet& demos, double quantile) {
  if (!(quantile >= 0.0 && quantile <= 1.0)) {
    throw std::invalid_argument("quantile must be in [0, 1]");
  }
  if (demos.frame != index.frame()) {
    throw ValidationError("demo frame does not match index frame");
  }
  const std::size_t n = index.size();
  const int k = index.k();
  if (n < static_cast<std::size_t>(k) + 1) {
    throw InsufficientDataError("calibration needs at least k+1 indexed steps");
  }
  if (quantile == 0.0) return 0.0;

  std::vector<double> mean_dists;
  mean_dists.reserve(n);
  std::vector<std::size_t> hints;
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = index.query_k(index.feature(i), k + 1, hints);
    hints.clear();
    double sum = 0.0;
    int used = 0;
    for (const auto& nb : nbrs) {
      if (nb.id == i) continue;
      if (used == k) break;
      sum += nb.distance;
      ++used;
      hints.push_back(nb.id);
      if (nb.id + 1 < n) hints.push_back(nb.id + 1);
    }
    mean_dists.push_back(sum / k);
  }

  std::sort(mean_dists.begin(), mean_dists.end());
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(quantile * static_cast<double>(mean_dists.size())));
  rank = std::clamp<std::size_t>(rank, 1, mean_dists.size());
  return mean_dists[rank - 1];
}

void save_switch_log(const std::vector<SwitchRecord>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "step,mean_distance,branch\n";
  for (const auto& rec : log) {
    out << rec.step << ',' << rec.mean_distance << ',' << (rec.used_bc ? "bc" : "knn") << "\n";
  }
}

}  // namespace chopil
