#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "chopil/dataset.hpp"
#include "chopil/geometry.hpp"
#include "chopil/trajectory.hpp"

namespace chopil {

// History feature: the last three end-effector poses (oldest first, padded by
// repeating the episode's first pose) plus the current object position.
inline constexpr int kFeatureSlots = 3;
inline constexpr int kFeatureDim = kFeatureSlots * 8 + 3;  // 27

struct KnnFeature {
  Eigen::Matrix<double, kFeatureDim, 1> v;

  static KnnFeature from_poses(const std::array<Pose, kFeatureSlots>& poses, const Vec3& obj);

  Eigen::Vector3d position(int slot) const { return v.segment<3>(slot * 8); }
  Quat orientation(int slot) const {
    return Quat(v[slot * 8 + 3], v[slot * 8 + 4], v[slot * 8 + 5], v[slot * 8 + 6]);
  }
  double opening(int slot) const { return v[slot * 8 + 7]; }
  Eigen::Vector3d object_position() const { return v.tail<3>(); }
};

// Builds the feature for the newest step given the episode pose history so
// far (newest last, at least one entry). Only the last three entries are
// used; shorter histories are padded by repeating the oldest entry.
KnnFeature feature_from_history(const std::vector<Pose>& poses, const Vec3& obj);

struct DistanceWeights {
  // per history slot, oldest first; defaults are the BC loss weights scaled
  // by recency multipliers 0.25 / 0.5 / 1.0
  std::array<double, kFeatureSlots> u_pos{0.25, 0.5, 1.0};
  std::array<double, kFeatureSlots> u_rot{0.025, 0.05, 0.1};
  std::array<double, kFeatureSlots> u_open{0.125, 0.25, 0.5};
  double u_obj = 1.0;

  void validate() const;  // nonnegative, not all zero
};

double feature_distance(const KnnFeature& a, const KnnFeature& b, const DistanceWeights& w);

struct KnnConfig {
  int k = 5;
  DistanceWeights weights;
  // entries closer than this (in feature_distance) to the previously kept
  // entry of the same trajectory are dropped at build time; 0 keeps all
  double dedup_epsilon = 0.0;

  void validate() const;
};

struct Neighbor {
  std::size_t id;
  double distance;
};

class KnnIndex {
 public:
  KnnIndex(std::vector<KnnFeature> features, std::vector<ActionVec> labels, KnnConfig cfg,
           Frame frame);

  // Exact k-nearest under feature_distance, ascending distance, ties broken
  // by lower insertion id. `hints` are candidate ids tried first; they only
  // tighten the pruning bound and never change the result.
  std::vector<Neighbor> query(const KnnFeature& f, const std::vector<std::size_t>& hints = {}) const;

  // Same, for an explicit neighbor count (used by leave-one-out calibration).
  std::vector<Neighbor> query_k(const KnnFeature& f, int k,
                                const std::vector<std::size_t>& hints = {}) const;

  // Inverse-distance blend of the k nearest labels.
  Action predict(const KnnFeature& f, const std::vector<std::size_t>& hints = {}) const;

  // Blend for an already-computed neighbor list (ascending, nonempty).
  Action blend_labels(const std::vector<Neighbor>& nbrs) const;

  std::size_t size() const { return labels_.size(); }
  int k() const { return cfg_.k; }
  const KnnConfig& config() const { return cfg_; }
  const DistanceWeights& weights() const { return cfg_.weights; }
  Frame frame() const { return frame_; }
  KnnFeature feature(std::size_t id) const;
  ActionVec label(std::size_t id) const { return labels_[id]; }

 private:
  double exact_distance(const KnnFeature& f, std::size_t id) const;

  Eigen::Matrix<double, kFeatureDim, Eigen::Dynamic> feats_;
  std::vector<ActionVec> labels_;
  KnnConfig cfg_;
  Frame frame_;
};

KnnIndex build_knn(const DemoSet& demos, const KnnConfig& cfg);

// The index file stores a reference to the demo file plus the build config;
// features are recomputed on load. Relative demo paths resolve against the
// index file's directory.
void save_knn(const KnnIndex& index, const std::string& path, const std::string& demo_path);
KnnIndex load_knn(const std::string& path);

}  // namespace chopil
