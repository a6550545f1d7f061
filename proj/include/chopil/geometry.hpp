#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>

namespace chopil {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

// Largest opening angle of the actuated chopstick joint, radians.
constexpr double kOpeningMax = 0.8;

// Coordinate frame of a state/action/trajectory. Robot-centric has the robot
// base at the origin; object-centric puts the object's position at the origin.
enum class Frame { Robot, Object };

std::string frame_name(Frame f);
Frame frame_from_name(const std::string& name);

// Flip sign so qw >= 0. Removes the double-cover ambiguity before any
// averaging or additive perturbation of quaternion components.
Quat canonicalized(const Quat& q);

// Normalize then canonicalize.
Quat normalized_canonical(const Quat& q);

/// End-effector pose: chopstick tip position, orientation, opening angle.
/// The quaternion is kept unit-norm and w-canonicalized by every factory
/// and mutating operation in this library.
struct Pose {
  Vec3 position{0.0, 0.0, 0.0};
  Quat orientation{1.0, 0.0, 0.0, 0.0};  // (w, x, y, z)
  double opening = 0.0;

  Pose() = default;
  Pose(const Vec3& pos, const Quat& q, double open);

  bool approx_equal(const Pose& other, double tol) const;
};

// Geodesic angle between two unit quaternions on the quotient space
// (sign flips identified): theta = 2*acos(|<q1,q2>|), in [0, pi].
// Throws std::invalid_argument if either input is off unit norm by > 1e-6.
double quat_distance(const Quat& q1, const Quat& q2);

}  // namespace chopil
