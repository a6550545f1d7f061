#include "chopil/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "chopil/errors.hpp"

namespace chopil {

std::string frame_name(Frame f) {
  return f == Frame::Robot ? "robot" : "object";
}

Frame frame_from_name(const std::string& name) {
  if (name == "robot") return Frame::Robot;
  if (name == "object") return Frame::Object;
  throw ValidationError("unknown frame tag: \"" + name + "\"");
}

Quat canonicalized(const Quat& q) {
  if (q.w() < 0.0) return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  return q;
}

Quat normalized_canonical(const Quat& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw std::invalid_argument("cannot normalize degenerate quaternion (norm " +
                                std::to_string(n) + ")");
  }
  Quat out(q.w() / n, q.x() / n, q.y() / n, q.z() / n);
  return canonicalized(out);
}

Pose::Pose(const Vec3& pos, const Quat& q, double open)
    : position(pos), orientation(normalized_canonical(q)), opening(open) {}

bool Pose::approx_equal(const Pose& other, double tol) const {
  return (position - other.position).norm() <= tol &&
         std::abs(orientation.w() - other.orientation.w()) <= tol &&
         std::abs(orientation.x() - other.orientation.x()) <= tol &&
         std::abs(orientation.y() - other.orientation.y()) <= tol &&
         std::abs(orientation.z() - other.orientation.z()) <= tol &&
         std::abs(opening - other.opening) <= tol;
}

double quat_distance(const Quat& q1, const Quat& q2) {
  constexpr double kNormTol = 1e-6;
  if (std::abs(q1.norm() - 1.0) > kNormTol || std::abs(q2.norm() - 1.0) > kNormTol) {
    throw std::invalid_argument("quat_distance requires unit quaternions (within 1e-6)");
  }
  const double d = std::abs(q1.dot(q2));
  return 2.0 * std::acos(std::clamp(d, 0.0, 1.0));
}

}  // namespace chopil
