#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "chopil/dataset.hpp"
#include "chopil/noise.hpp"
#include "chopil/trajectory.hpp"

namespace chopil {

// Per-component weights of the composite pose loss.
struct LossWeights {
  double w_pos = 1.0;
  double w_rot = 0.1;
  double w_open = 0.5;

  void validate() const;
};

// Per-dimension affine input normalization fitted on demo stats. Dimensions
// with (near-)zero variance pass through unscaled.
struct Standardizer {
  StateVec mean = StateVec::Zero();
  StateVec scale = StateVec::Ones();

  static Standardizer fit(const StateVec& mean, const StateVec& variance);
  StateVec apply(const StateVec& x) const;
};

/// Behavior-cloning policy network: 11 -> 64 -> 32 -> 8, ReLU on the hidden
/// layers, linear output. 3112 parameters. Forward emits the raw 8-vector;
/// the quaternion slice is only renormalized when an Action is built.
class BCNetwork {
public:
  struct Layer {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
  };

  BCNetwork() = default;
  BCNetwork(std::vector<Layer> layers, Standardizer standardizer, Frame frame,
            LossWeights weights, std::uint64_t seed);

  // Raw forward pass on an already-standardized input.
  // Throws std::invalid_argument on non-finite input.
  ActionVec forward(const StateVec& x_std) const;

  // Columns are standardized inputs; returns raw outputs per column.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x_std) const;

  // Full policy step: standardize, forward, build a valid Action
  // (quaternion renormalized + canonicalized, opening clamped).
  Action predict(const State& state) const;

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  const Standardizer& standardizer() const { return standardizer_; }
  Frame frame() const { return frame_; }
  const LossWeights& loss_weights() const { return weights_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t parameter_count() const;

private:
  std::vector<Layer> layers_;
  Standardizer standardizer_;
  Frame frame_ = Frame::Robot;
  LossWeights weights_;
  std::uint64_t seed_ = 0;
};

// L = w_pos * mean((pred_pos - tgt_pos)^2)
//   + w_rot * (1 - <pred_q/|pred_q|, tgt_q>^2)
//   + w_open * (pred_open - tgt_open)^2
// Sign-invariant in the quaternion (double cover). Throws std::domain_error
// when |pred_q| < 1e-8.
double composite_loss(const ActionVec& pred, const ActionVec& target, const LossWeights& w);

// dL/dpred of composite_loss.
ActionVec composite_loss_grad(const ActionVec& pred, const ActionVec& target,
                              const LossWeights& w);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 256;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  std::optional<NoiseConfig> noise;
  LossWeights loss_weights;
  int sample_stride = 1;  // train on every stride-th step

  void validate() const;
};

struct TrainResult {
  BCNetwork net;
  std::vector<double> epoch_loss;
};

// Minibatch SGD with momentum over shuffled (state, action) pairs; when
// cfg.noise is set, each batch gets fraction of its states replaced by noised
// copies (actions reused as corrective labels). Deterministic per seed.
// Internally the output layer is reparametrized against per-dimension action
// mean/scale (one learning rate then suits meter-, quaternion- and
// opening-scaled dims alike) and folded back before returning, so the result
// is a plain dense stack. Throws TrainingFailure on divergence (NaN or
// loss > 1e6).
TrainResult train_bc(const DemoSet& demos, const TrainConfig& cfg);

// Analytic-vs-central-finite-difference gradient comparison (h = 1e-5) on
// `n_params` randomly chosen parameters; parameters whose perturbation flips
// a ReLU activation are excluded (kink). Returns max |ga-gn|/max(1,|ga|,|gn|).
double grad_check(const BCNetwork& net, const StateVec& x_std, const ActionVec& target,
                  const LossWeights& w, int n_params, std::uint64_t seed);

void save_bc(const BCNetwork& net, const std::string& path);
BCNetwork load_bc(const std::string& path);

}  // namespace chopil
