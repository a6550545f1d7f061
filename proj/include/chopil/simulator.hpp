#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chopil/dataset.hpp"
#include "chopil/geometry.hpp"
#include "chopil/rng.hpp"
#include "chopil/trajectory.hpp"

namespace chopil {

enum class Shape { Cube, Ball };

struct SceneObject {
  std::string name = "cube";
  Shape shape = Shape::Cube;
  double size = 0.01;  // edge length or diameter, meters
  Vec3 position{0, 0, 0};
  bool held = false;

  double half_extent() const { return size / 2.0; }
};

// cube (1 cm edge), ball20 (2 cm diameter), ball14 (1.4 cm diameter)
SceneObject make_object(const std::string& name);
const std::vector<std::string>& object_names();

// per-object grasp tolerance (calibration constants; the effective grasp
// radius tolerance + size/2 orders the objects easiest to hardest:
// cube 11 mm, ball20 10.5 mm, ball14 9 mm)
double grasp_tolerance_for(const std::string& object_name);

// tolerance for a recorded trajectory given its object half extent; unknown
// sizes use the fallback
double grasp_tolerance_for_radius(double half_extent, double fallback);

struct Workspace {
  Vec3 lo{0.15, -0.15, 0.0};
  Vec3 hi{0.45, 0.15, 0.40};

  bool contains(const Vec3& p) const;
  Vec3 clamp(const Vec3& p) const;
};

// the square plate region where objects are placed; grid cell centers and
// random demo placements both live here
struct Plate {
  double x_lo = 0.18, x_hi = 0.42;
  double y_lo = -0.12, y_hi = 0.12;
};

struct SimConfig {
  Workspace workspace;
  Plate plate;
  double rate_hz = 100.0;
  double max_linear_speed = 0.09;    // m/s
  double max_angular_speed = 2.0;    // rad/s
  double max_opening_speed = 1.0;    // rad/s
  double tracking_noise_std = 0.0005;  // m, per axis per step
  // per-episode constant EE position bias, norm drawn uniformly in this band
  double bias_norm_min = 0.001;
  double bias_norm_max = 0.006;
  double grasp_tolerance = 0.002;  // m, added to the object half extent
  double close_threshold = 0.25;   // rad; closing below this attempts a grasp
  double lift_height = 0.08;       // m
  double hold_duration = 1.0;      // s
  double time_limit = 12.0;        // s
  double home_jitter_std = 0.002;  // m, reset pose scatter
  double expert_noise_std = 0.0015;  // m, demonstration-time command jitter
  Pose home_pose{Vec3(0.42, 0.0, 0.13), Quat(1, 0, 0, 0), 0.6};
  std::uint64_t seed = 0;

  double dt() const { return 1.0 / rate_hz; }
  int max_steps() const { return static_cast<int>(time_limit * rate_hz + 0.5); }
  void validate() const;
};

enum class Outcome { Running, Success, Failure };
std::string outcome_name(Outcome o);

struct EnvState {
  Pose pose;
  SceneObject object;
  double t = 0.0;
  double held_elapsed = 0.0;
  Outcome outcome = Outcome::Running;

  // internals, fixed at reset / grasp time
  Vec3 bias{0, 0, 0};
  Vec3 grab_offset{0, 0, 0};
  int step_count = 0;
  int held_steps = 0;
  Rng rng;
};

EnvState reset(const SimConfig& cfg, const SceneObject& object, const Vec3& object_position);
void step(EnvState& env, const Action& cmd, const SimConfig& cfg);

// RobotCentric observation of the environment
State observe(const EnvState& env);

// Waypoint demonstrator. Commands are absolute phase goals (the
// environment's rate limiter does the interpolation): approach above the
// object, hover just over it while integrating away the episode's
// calibration error, sink onto it, pinch once within reach, lift, hold. The
// commanded opening is the home aperture until the pinch commits and a fixed
// closed aperture afterwards. The style seed varies approach height, lateral
// offset, yaw, hover height and the pause length.
class ScriptedExpert {
 public:
  ScriptedExpert(const SimConfig& cfg, std::uint64_t style_seed);

  void reset();
  Action act(const EnvState& env);

 private:
  enum class Phase { Approach, Descend, Adjust, Sink, Close, Reopen, Grip, Lift, Hold };

  SimConfig cfg_;
  std::uint64_t style_seed_;
  Rng rng_;
  Phase phase_ = Phase::Approach;
  bool started_ = false;

  // style parameters, drawn at reset
  double approach_height_ = 0.07;
  double adjust_duration_ = 0.4;
  double hover_z_ = 0.012;
  Vec3 lateral_{0, 0, 0};
  Quat target_orientation_{1, 0, 0, 0};

  // controller state
  Vec3 correction_{0, 0, 0};  // learned negative of the episode bias
  Vec3 grip_goal_{0, 0, 0};
  Vec3 lift_goal_{0, 0, 0};
  double phase_t0_ = 0.0;
  double open_wander_ = 0.0;  // AR(1) aperture wander around home

  void begin(const EnvState& env);
};

// Runs expert episodes with random plate placements and demonstration-level
// command jitter until n successes are recorded; failures are discarded.
DemoSet generate_demos(const SimConfig& cfg, const SceneObject& object, int n,
                       std::uint64_t seed);

// Open-loop re-execution of a recorded trajectory at its recorded placement.
Outcome replay(const Trajectory& traj, const SimConfig& cfg);

}  // namespace chopil
