#pragma once

#include <string>
#include <vector>

#include "chopil/geometry.hpp"

namespace chopil {

using StateVec = Eigen::Matrix<double, 11, 1>;
using ActionVec = Eigen::Matrix<double, 8, 1>;

constexpr int kStateDim = 11;
constexpr int kActionDim = 8;

// 11-D observation: EE pose plus tracked object position.
// Flattening order: [px, py, pz, qw, qx, qy, qz, opening, ox, oy, oz].
struct State {
  Pose pose;
  Vec3 object_position{0.0, 0.0, 0.0};
  Frame frame = Frame::Robot;

  StateVec flatten() const;
  static State unflatten(const StateVec& v, Frame frame);
};

// 8-D target end-effector pose command. Flattening order: first 8 state dims.
struct Action {
  Pose target;
  Frame frame = Frame::Robot;

  ActionVec flatten() const;
  static Action unflatten(const ActionVec& v, Frame frame);
};

struct Step {
  double t = 0.0;  // seconds
  State state;
  Action action;
};

struct Trajectory {
  std::string id;
  std::vector<Step> steps;
  bool success = false;
  double object_radius = 0.0;  // meters

  Frame frame() const;  // tag shared by all steps; Robot if empty
};

// Re-express a robot-centric state relative to the object: EE position minus
// object position, object slot zeroed. Orientation and opening are unchanged
// (objects are position-tracked only, so the transform is translation-only).
// Throws ValidationError if the state is already object-centric.
State to_object_frame(const State& state);

// Analogous transform for an action, given the object position it was
// recorded against.
Action to_object_frame(const Action& action, const Vec3& object_position);

// Inverse transform: object-centric action back to the world frame so it can
// be commanded to the robot.
Action from_object_frame(const Action& action, const Vec3& object_position);

// Inverse of to_object_frame(State).
State from_object_frame(const State& state, const Vec3& object_position);

Trajectory to_object_frame(const Trajectory& traj);

}  // namespace chopil
