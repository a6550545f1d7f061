#include "chopil/trajectory.hpp"

#include "chopil/errors.hpp"

namespace chopil {

StateVec State::flatten() const {
  StateVec v;
  v << pose.position.x(), pose.position.y(), pose.position.z(),
      pose.orientation.w(), pose.orientation.x(), pose.orientation.y(),
      pose.orientation.z(), pose.opening, object_position.x(),
      object_position.y(), object_position.z();
  return v;
}

State State::unflatten(const StateVec& v, Frame frame) {
  State s;
  s.pose = Pose(Vec3(v[0], v[1], v[2]), Quat(v[3], v[4], v[5], v[6]), v[7]);
  s.object_position = Vec3(v[8], v[9], v[10]);
  s.frame = frame;
  return s;
}

ActionVec Action::flatten() const {
  ActionVec v;
  v << target.position.x(), target.position.y(), target.position.z(),
      target.orientation.w(), target.orientation.x(), target.orientation.y(),
      target.orientation.z(), target.opening;
  return v;
}

Action Action::unflatten(const ActionVec& v, Frame frame) {
  Action a;
  a.target = Pose(Vec3(v[0], v[1], v[2]), Quat(v[3], v[4], v[5], v[6]), v[7]);
  a.frame = frame;
  return a;
}

Frame Trajectory::frame() const {
  return steps.empty() ? Frame::Robot : steps.front().state.frame;
}

State to_object_frame(const State& state) {
  if (state.frame == Frame::Object) {
    throw ValidationError("state is already object-centric");
  }
  State out = state;
  out.pose.position -= state.object_position;
  out.object_position.setZero();
  out.frame = Frame::Object;
  return out;
}

Action to_object_frame(const Action& action, const Vec3& object_position) {
  if (action.frame == Frame::Object) {
    throw ValidationError("action is already object-centric");
  }
  Action out = action;
  out.target.position -= object_position;
  out.frame = Frame::Object;
  return out;
}

Action from_object_frame(const Action& action, const Vec3& object_position) {
  if (action.frame == Frame::Robot) {
    throw ValidationError("action is already robot-centric");
  }
  Action out = action;
  out.target.position += object_position;
  out.frame = Frame::Robot;
  return out;
}

State from_object_frame(const State& state, const Vec3& object_position) {
  if (state.frame == Frame::Robot) {
    throw ValidationError("state is already robot-centric");
  }
  State out = state;
  out.pose.position += object_position;
  out.object_position = object_position;
  out.frame = Frame::Robot;
  return out;
}

Trajectory to_object_frame(const Trajectory& traj) {
  Trajectory out = traj;
  for (Step& step : out.steps) {
    const Vec3 obj = step.state.object_position;
    step.state = to_object_frame(step.state);
    step.action = to_object_frame(step.action, obj);
  }
  return out;
}

}  // namespace chopil
