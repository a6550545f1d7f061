#include "chopil/noise.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "chopil/errors.hpp"

namespace chopil {

void NoiseConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw std::invalid_argument("noise eta must be finite and >= 0");
  }
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("noise fraction must be in [0, 1]");
  }
}

void perturb_state(StateVec& x, double eta, const StateVec& variance, Rng& rng,
                   NoiseConfig::QuatMode quat_mode) {
  if (quat_mode == NoiseConfig::QuatMode::Flat) {
    for (int d = 0; d < kStateDim; ++d) {
      const double std_d = eta * std::sqrt(variance[d]);
      x[d] += std_d > 0.0 ? rng.normal(0.0, std_d) : 0.0;
    }
  } else {
    for (int d = 0; d < kStateDim; ++d) {
      if (d >= 3 && d <= 6) continue;
      const double std_d = eta * std::sqrt(variance[d]);
      x[d] += std_d > 0.0 ? rng.normal(0.0, std_d) : 0.0;
    }
    // random-axis rotation with angle ~ N(0, eta), O(eta) like the flat
    // perturbation's angular effect
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    const double axis_norm = axis.norm();
    const double angle = rng.normal(0.0, eta);
    if (axis_norm > 0.0) {
      const Quat dq(Eigen::AngleAxisd(angle, axis / axis_norm));
      const Quat q = Quat(x[3], x[4], x[5], x[6]) * dq;
      x[3] = q.w();
      x[4] = q.x();
      x[5] = q.y();
      x[6] = q.z();
    }
  }
  // restore the quaternion invariant; angular error stays O(noise)
  Quat q = normalized_canonical(Quat(x[3], x[4], x[5], x[6]));
  x[3] = q.w();
  x[4] = q.x();
  x[5] = q.y();
  x[6] = q.z();
}

void inject_noise_inplace(std::vector<std::pair<StateVec, ActionVec>>& batch,
                          const NoiseConfig& cfg, const StateVec& variance, Rng& rng) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("inject_noise: empty batch");
  const std::size_t n = batch.size();
  const std::size_t m =
      static_cast<std::size_t>(std::ceil(cfg.fraction * static_cast<double>(n)));
  if (m == 0 || cfg.eta == 0.0) {
    // still renormalizes nothing; contract says untouched
    return;
  }
  // partial Fisher-Yates over index array: first m entries form the subset
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(idx[i], idx[j]);
  }
  for (std::size_t i = 0; i < m; ++i) {
    perturb_state(batch[idx[i]].first, cfg.eta, variance, rng, cfg.quat_mode);
  }
}

std::vector<std::pair<StateVec, ActionVec>> inject_noise(
    const std::vector<std::pair<StateVec, ActionVec>>& batch, const NoiseConfig& cfg,
    const StateVec& variance) {
  auto out = batch;
  Rng rng(cfg.seed);
  inject_noise_inplace(out, cfg, variance, rng);
  return out;
}

}  // namespace chopil
