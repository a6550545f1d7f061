#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "chopil/dataset.hpp"
#include "chopil/trajectory.hpp"

namespace chopil {

// Projection basis over standardized states. `scale` carries the per-dim
// standard deviation used for standardization (1 where degenerate).
struct PcaModel {
  StateVec mean = StateVec::Zero();
  StateVec scale = StateVec::Ones();
  Eigen::MatrixXd components;          // dims x 11, rows orthonormal
  Eigen::VectorXd explained_variance;  // descending

  Eigen::Vector2d project2(const StateVec& state) const;
};

// Top-`dims` eigenvectors of the covariance of standardized states. Component
// sign is fixed so each row's largest-magnitude entry is positive.
PcaModel pca_fit(const std::vector<StateVec>& states, int dims = 2);

struct ShiftReport {
  std::string agent_name;
  double mean_nn_distance = 0.0;
  double p95_nn_distance = 0.0;
  std::vector<Eigen::Vector2d> projected_points;  // rollout states
  std::vector<Eigen::Vector2d> demo_projected;
};

// For every rollout state: Euclidean distance to the nearest demo state in
// the full standardized 11-D space (the projection is only used for the
// exported point clouds). Frames must match.
ShiftReport shift_metric(const DemoSet& demos, const std::vector<Trajectory>& rollouts,
                         const PcaModel& pca, const std::string& agent_name = "");

// columns: x, y, source (demo|rollout), agent
void save_point_cloud_csv(const ShiftReport& report, const std::string& path);

}  // namespace chopil
