#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "chopil/rng.hpp"
#include "chopil/trajectory.hpp"

namespace chopil {

// Gaussian state-perturbation settings. `eta` scales the per-dimension
// noise std as eta * std(dim); `fraction` is the share of each
// batch whose states get replaced (actions always kept as-is).
struct NoiseConfig {
  double eta = 0.05;
  double fraction = 0.2;
  std::uint64_t seed = 0;

  enum class QuatMode { Flat, AxisAngle };
  // Flat adds noise to raw quaternion components then renormalizes (default);
  // AxisAngle applies a random small rotation of angle ~ N(0, eta) instead.
  // Both leave the corrective-label semantics untouched.
  QuatMode quat_mode = QuatMode::Flat;

  void validate() const;
};

// Perturb one flattened state in place: x += eps with per-dimension std
// eta*sqrt(var), then renormalize + canonicalize the quaternion slice.
void perturb_state(StateVec& x, double eta, const StateVec& variance, Rng& rng,
                   NoiseConfig::QuatMode quat_mode = NoiseConfig::QuatMode::Flat);

// Replace the states of a uniformly random ceil(fraction*|batch|)-subset with
// noised copies; every action is returned bit-identical. Deterministic in
// cfg.seed. `variance` is the per-dimension population variance of the source
// demo set (sigma-hat in the noise model).
std::vector<std::pair<StateVec, ActionVec>> inject_noise(
    const std::vector<std::pair<StateVec, ActionVec>>& batch, const NoiseConfig& cfg,
    const StateVec& variance);

// Same, driven by an external RNG (training injects per-batch with derived
// seeds; parallel callers must supply distinct streams).
void inject_noise_inplace(std::vector<std::pair<StateVec, ActionVec>>& batch,
                          const NoiseConfig& cfg, const StateVec& variance, Rng& rng);

}  // namespace chopil
