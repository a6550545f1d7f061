#include "chopil/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "chopil/errors.hpp"

namespace chopil {

SceneObject make_object(const std::string& name) {
  SceneObject obj;
  obj.name = name;
  if (name == "cube") {
    obj.shape = Shape::Cube;
    obj.size = 0.010;
  } else if (name == "ball20") {
    obj.shape = Shape::Ball;
    obj.size = 0.020;
  } else if (name == "ball14") {
    obj.shape = Shape::Ball;
    obj.size = 0.014;
  } else {
    throw ValidationError("unknown object '" + name + "' (expected cube, ball20 or ball14)");
  }
  return obj;
}

const std::vector<std::string>& object_names() {
  static const std::vector<std::string> names{"cube", "ball20", "ball14"};
  return names;
}

double grasp_tolerance_for(const std::string& object_name) {
  if (object_name == "cube") return 0.0060;
  if (object_name == "ball20") return 0.0005;
  if (object_name == "ball14") return 0.0020;
  throw ValidationError("unknown object '" + object_name + "'");
}

double grasp_tolerance_for_radius(double half_extent, double fallback) {
  for (const auto& name : object_names()) {
    if (std::abs(make_object(name).half_extent() - half_extent) < 1e-9) {
      return grasp_tolerance_for(name);
    }
  }
  return fallback;
}

bool Workspace::contains(const Vec3& p) const {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

Vec3 Workspace::clamp(const Vec3& p) const {
  return p.cwiseMax(lo).cwiseMin(hi);
}

void SimConfig::validate() const {
  if (!(rate_hz > 0)) throw std::invalid_argument("rate_hz must be > 0");
  if (!(max_linear_speed > 0) || !(max_angular_speed > 0) || !(max_opening_speed > 0)) {
    throw std::invalid_argument("speed limits must be > 0");
  }
  if (tracking_noise_std < 0 || home_jitter_std < 0 || expert_noise_std < 0) {
    throw std::invalid_argument("noise magnitudes must be >= 0");
  }
  if (bias_norm_min < 0 || bias_norm_max < bias_norm_min) {
    throw std::invalid_argument("bias band must satisfy 0 <= min <= max");
  }
  if (grasp_tolerance < 0) throw std::invalid_argument("grasp_tolerance must be >= 0");
  if (!(close_threshold > 0 && close_threshold < kOpeningMax)) {
    throw std::invalid_argument("close_threshold must lie inside (0, opening_max)");
  }
  if (!(lift_height > 0) || !(hold_duration > 0) || !(time_limit > 0)) {
    throw std::invalid_argument("lift_height, hold_duration, time_limit must be > 0");
  }
  if ((workspace.lo.array() >= workspace.hi.array()).any()) {
    throw std::invalid_argument("workspace box is empty");
  }
  if (!workspace.contains(home_pose.position)) {
    throw std::invalid_argument("home pose outside workspace");
  }
}

std::string outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
  }
  return "unknown";
}

EnvState reset(const SimConfig& cfg, const SceneObject& object, const Vec3& object_position) {
  cfg.validate();
  if (!object_position.allFinite() || !cfg.workspace.contains(object_position)) {
    throw std::invalid_argument("object placement outside workspace");
  }
  EnvState env;
  env.rng = Rng(seed_mix(cfg.seed, 0x657076ull));

  // draw order is fixed: home jitter first, then the bias direction and norm
  env.pose = cfg.home_pose;
  Vec3 jitter(env.rng.normal(), env.rng.normal(), env.rng.normal());
  env.pose.position = cfg.workspace.clamp(env.pose.position + cfg.home_jitter_std * jitter);
  env.pose.opening = std::clamp(env.pose.opening + env.rng.uniform(-0.06, 0.06),
                                0.0, kOpeningMax);

  env.object = object;
  env.object.position = object_position;
  env.object.held = false;

  if (cfg.bias_norm_max > 0.0) {
    Vec3 dir(env.rng.normal(), env.rng.normal(), env.rng.normal());
    while (dir.norm() < 1e-12) {
      dir = Vec3(env.rng.normal(), env.rng.normal(), env.rng.normal());
    }
    const double norm = env.rng.uniform(cfg.bias_norm_min, cfg.bias_norm_max);
    env.bias = dir.normalized() * norm;
  }
  return env;
}

State observe(const EnvState& env) {
  State s;
  s.pose = env.pose;
  s.object_position = env.object.position;
  s.frame = Frame::Robot;
  return s;
}

void step(EnvState& env, const Action& cmd, const SimConfig& cfg) {
  if (env.outcome != Outcome::Running) {
    throw std::logic_error("step called on a terminal environment");
  }
  if (cmd.frame != Frame::Robot) {
    throw ValidationError("commands must be robot-centric");
  }
  if (!cmd.target.position.allFinite() || !cmd.target.orientation.coeffs().allFinite() ||
      !std::isfinite(cmd.target.opening)) {
    throw std::invalid_argument("non-finite command");
  }
  if (cmd.target.opening < -1e-9 || cmd.target.opening > kOpeningMax + 1e-9) {
    throw std::invalid_argument("command opening outside [0, opening_max]");
  }

  const double dt = cfg.dt();
  const Vec3 noise(env.rng.normal(), env.rng.normal(), env.rng.normal());
  const Vec3 target = cmd.target.position + env.bias + cfg.tracking_noise_std * noise;

  const Vec3 delta = target - env.pose.position;
  const double dist = delta.norm();
  const double max_step = cfg.max_linear_speed * dt;
  if (dist > max_step) {
    env.pose.position += delta * (max_step / dist);
  } else {
    env.pose.position = target;
  }
  env.pose.position = cfg.workspace.clamp(env.pose.position);

  const Quat goal_q = normalized_canonical(cmd.target.orientation);
  const double angle = quat_distance(env.pose.orientation, goal_q);
  const double max_rot = cfg.max_angular_speed * dt;
  if (angle <= max_rot) {
    env.pose.orientation = goal_q;
  } else {
    env.pose.orientation =
        normalized_canonical(env.pose.orientation.slerp(max_rot / angle, goal_q));
  }

  const double prev_opening = env.pose.opening;
  const double max_open_step = cfg.max_opening_speed * dt;
  const double dopen =
      std::clamp(cmd.target.opening - prev_opening, -max_open_step, max_open_step);
  env.pose.opening = std::clamp(prev_opening + dopen, 0.0, kOpeningMax);

  if (!env.object.held) {
    // a grasp attempt happens at the instant the opening crosses the threshold
    if (prev_opening >= cfg.close_threshold && env.pose.opening < cfg.close_threshold) {
      const double reach = cfg.grasp_tolerance + env.object.half_extent();
      if ((env.pose.position - env.object.position).norm() <= reach) {
        env.object.held = true;
        env.grab_offset = env.object.position - env.pose.position;
      }
    }
  } else if (env.pose.opening >= cfg.close_threshold) {
    env.object.held = false;
    env.held_steps = 0;
    env.held_elapsed = 0.0;
    env.object.position[2] = env.object.half_extent();  // falls back to the plate
  }
  if (env.object.held) {
    env.object.position = env.pose.position + env.grab_offset;
  }

  ++env.step_count;
  env.t = env.step_count * dt;

  if (env.object.held && env.pose.position[2] > cfg.lift_height) {
    ++env.held_steps;
    env.held_elapsed = env.held_steps * dt;
    if (env.held_elapsed >= cfg.hold_duration) {
      env.outcome = Outcome::Success;
      return;
    }
  }
  if (env.step_count >= cfg.max_steps()) {
    env.outcome = Outcome::Failure;
  }
}

namespace {
// a phase goal counts as reached when the EE settles within this distance;
// must exceed the worst-case calibration bias plus tracking noise
constexpr double kGoalReach = 0.010;

// Aperture commands are two absolute setpoints: the home aperture until the
// pinch commits, kCloseOpening afterwards (the environment's opening rate
// limit supplies the ramp in between). Before the commit the command wanders
// around the home aperture as a clamped AR(1) process: the wander spreads the
// recorded openings over a visible band while every recorded command pulls
// back toward home, so the demonstrations pin the aperture map to a
// contraction instead of leaving it free to drift.
constexpr double kCloseOpening = 0.05;  // commanded aperture through the grasp
constexpr double kCommitDist = 0.008;   // EE-to-center distance that commits the pinch
constexpr double kWanderDecay = 0.80;
constexpr double kWanderStd = 0.024;
constexpr double kWanderMax = 0.12;
constexpr double kGripDwell = 0.25;
}  // namespace

ScriptedExpert::ScriptedExpert(const SimConfig& cfg, std::uint64_t style_seed)
    : cfg_(cfg), style_seed_(style_seed) {
  reset();
}

void ScriptedExpert::reset() {
  rng_ = Rng(seed_mix(style_seed_, 0x657870ull));
  phase_ = Phase::Approach;
  started_ = false;
  approach_height_ = rng_.uniform(0.070, 0.105);
  adjust_duration_ = rng_.uniform(0.20, 0.50);
  hover_z_ = rng_.uniform(0.012, 0.018);
  const double ang = rng_.uniform(0.0, 2.0 * M_PI);
  const double rad = rng_.uniform(0.002, 0.012);
  lateral_ = Vec3(rad * std::cos(ang), rad * std::sin(ang), 0.0);
  // Commanding a per-episode random yaw would put a latent into the labels
  // that the state cannot explain; a policy cloned from such data drifts in
  // the orientation channel. Keep the tool orientation fixed.
  target_orientation_ = cfg_.home_pose.orientation;
  correction_.setZero();
  lift_goal_.setZero();
  phase_t0_ = 0.0;
  open_wander_ = 0.0;
}

void ScriptedExpert::begin(const EnvState& env) {
  started_ = true;
  phase_t0_ = env.t;
}

Action ScriptedExpert::act(const EnvState& env) {
  if (env.outcome != Outcome::Running) {
    throw std::logic_error("expert asked to act on a terminal environment");
  }
  if (!started_) begin(env);
  if (env.object.held && phase_ != Phase::Grip && phase_ != Phase::Lift &&
      phase_ != Phase::Hold) {
    // settle the pinch at the spot where the grasp latched before lifting;
    // lifting straight off the latch would label rising goals while the
    // sticks are still closing
    phase_ = Phase::Grip;
    grip_goal_ = env.pose.position;
    phase_t0_ = env.t;
  }

  const Vec3 obj = env.object.position;
  const double dist = (env.pose.position - obj).norm();
  Vec3 cmd_pos = env.pose.position;
  open_wander_ = std::clamp(kWanderDecay * open_wander_ + rng_.normal(0.0, kWanderStd),
                            -kWanderMax, kWanderMax);
  double cmd_open = cfg_.home_pose.opening + open_wander_;

  switch (phase_) {
    case Phase::Approach: {
      const Vec3 goal = obj + lateral_ + Vec3(0.0, 0.0, approach_height_);
      cmd_pos = goal;
      if ((env.pose.position - goal).norm() < kGoalReach) {
        phase_ = Phase::Descend;
      }
      break;
    }
    case Phase::Descend: {
      const Vec3 hover = obj + Vec3(0.0, 0.0, hover_z_);
      cmd_pos = hover;
      if ((env.pose.position - hover).norm() < kGoalReach) {
        phase_ = Phase::Adjust;
        phase_t0_ = env.t;
      }
      break;
    }
    case Phase::Adjust: {
      // hover just above the object; the residual tracking error reveals
      // the episode bias, which the correction integrates away
      const Vec3 target = obj + Vec3(0.0, 0.0, hover_z_);
      correction_ += 0.4 * (target - env.pose.position - correction_);
      if (correction_.norm() > 0.012) correction_ *= 0.012 / correction_.norm();
      const Vec3 dither(rng_.normal(0.0, 0.0015), rng_.normal(0.0, 0.0015), 0.0);
      cmd_pos = obj + correction_ + Vec3(0.0, 0.0, hover_z_) + dither;
      if (env.t - phase_t0_ >= adjust_duration_) {
        phase_ = Phase::Sink;
      }
      break;
    }
    case Phase::Sink: {
      // correction frozen; descend onto the object center
      cmd_pos = obj + correction_;
      if (dist <= kCommitDist) {
        phase_ = Phase::Close;
        phase_t0_ = env.t;
      }
      break;
    }
    case Phase::Close: {
      cmd_pos = obj + correction_;
      cmd_open = kCloseOpening;
      // missed grasp: back off to the hover and try again
      if (!env.object.held && env.pose.opening <= kCloseOpening + 0.01 &&
          env.t - phase_t0_ > 0.8) {
        phase_ = Phase::Reopen;
      }
      break;
    }
    case Phase::Reopen: {
      cmd_pos = obj + correction_ + Vec3(0.0, 0.0, hover_z_);
      if (env.pose.opening >= 0.45) {
        phase_ = Phase::Adjust;
        phase_t0_ = env.t;
      }
      break;
    }
    case Phase::Grip:
      cmd_pos = grip_goal_;
      cmd_open = kCloseOpening;
      if (env.t - phase_t0_ >= kGripDwell) {
        phase_ = Phase::Lift;
        lift_goal_ = Vec3(env.pose.position[0], env.pose.position[1],
                          cfg_.lift_height + 0.07);
      }
      break;
    case Phase::Lift:
      cmd_pos = lift_goal_;
      cmd_open = kCloseOpening;
      if (std::abs(env.pose.position[2] - lift_goal_[2]) < kGoalReach) {
        phase_ = Phase::Hold;
      }
      break;
    case Phase::Hold: {
      cmd_pos = lift_goal_;
      cmd_open = kCloseOpening;
      break;
    }
  }

  Action a;
  a.frame = Frame::Robot;
  a.target.position = cfg_.workspace.clamp(cmd_pos);
  a.target.orientation = target_orientation_;
  a.target.opening = std::clamp(cmd_open, 0.0, kOpeningMax);
  return a;
}

DemoSet generate_demos(const SimConfig& cfg, const SceneObject& object, int n,
                       std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("demo count must be >= 1");
  cfg.validate();

  std::vector<Trajectory> kept;
  kept.reserve(static_cast<std::size_t>(n));
  int attempts = 0;
  int successes = 0;
  while (successes < n) {
    if (attempts >= 20 && successes * 20 < attempts) {
      throw std::runtime_error("demo generation success rate below 5% after " +
                               std::to_string(attempts) + " attempts (" +
                               std::to_string(successes) + " successes); check config");
    }
    const std::uint64_t ep = static_cast<std::uint64_t>(attempts);
    Rng place_rng(seed_mix(seed, ep, 1));
    const Vec3 placement(place_rng.uniform(cfg.plate.x_lo, cfg.plate.x_hi),
                         place_rng.uniform(cfg.plate.y_lo, cfg.plate.y_hi),
                         object.half_extent());

    SimConfig ecfg = cfg;
    ecfg.seed = seed_mix(seed, ep, 2);
    EnvState env = reset(ecfg, object, placement);
    ScriptedExpert expert(ecfg, seed_mix(seed, ep, 3));
    Rng jitter(seed_mix(seed, ep, 4));

    Trajectory traj;
    traj.object_radius = object.half_extent();
    while (env.outcome == Outcome::Running) {
      const State s = observe(env);
      Action a = expert.act(env);
      a.target.position += cfg.expert_noise_std *
                           Vec3(jitter.normal(), jitter.normal(), jitter.normal());
      a.target.position = cfg.workspace.clamp(a.target.position);
      const double t = env.t;
      step(env, a, ecfg);
      traj.steps.push_back({t, s, a});
    }
    ++attempts;
    if (env.outcome == Outcome::Success) {
      traj.success = true;
      traj.id = object.name + "-" + std::to_string(successes);
      kept.push_back(std::move(traj));
      ++successes;
    }
  }
  return make_demo_set(std::move(kept));
}

Outcome replay(const Trajectory& traj, const SimConfig& cfg) {
  if (traj.steps.empty()) throw std::invalid_argument("cannot replay an empty trajectory");
  if (traj.frame() != Frame::Robot) {
    throw ValidationError("replay requires a robot-centric trajectory");
  }
  if (!traj.success) throw ValidationError("replay expects a successful demonstration");

  SceneObject object;
  object.name = "replayed";
  object.shape = Shape::Ball;
  object.size = 2.0 * traj.object_radius;
  EnvState env = reset(cfg, object, traj.steps.front().state.object_position);

  std::size_t i = 0;
  while (env.outcome == Outcome::Running) {
    const Action& a = traj.steps[std::min(i, traj.steps.size() - 1)].action;
    step(env, a, cfg);
    ++i;
  }
  return env.outcome;
}

}  // namespace chopil
