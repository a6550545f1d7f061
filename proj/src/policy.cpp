#include "chopil/policy.hpp"

namespace chopil {

BcPolicy::BcPolicy(BCNetwork net, std::string name)
    : net_(std::move(net)), name_(std::move(name)) {}

Action BcPolicy::act(const EnvState& env) {
  const State s = observe(env);
  if (net_.frame() == Frame::Object) {
    const Action a = net_.predict(to_object_frame(s));
    return from_object_frame(a, s.object_position);
  }
  return net_.predict(s);
}

KnnPolicy::KnnPolicy(KnnIndex index, std::string name)
    : index_(std::move(index)), name_(std::move(name)) {}

void KnnPolicy::reset(std::uint64_t) {
  window_.clear();
  hints_.clear();
}

Action KnnPolicy::act(const EnvState& env) {
  State s = observe(env);
  const Vec3 obj = s.object_position;
  if (index_.frame() == Frame::Object) s = to_object_frame(s);

  window_.push_back(s.pose);
  if (window_.size() > static_cast<std::size_t>(kFeatureSlots)) {
    window_.erase(window_.begin());
  }
  const KnnFeature f = feature_from_history(window_, s.object_position);
  const auto nbrs = index_.query(f, hints_);
  hints_.clear();
  for (const auto& nb : nbrs) {
    hints_.push_back(nb.id);
    if (nb.id + 1 < index_.size()) hints_.push_back(nb.id + 1);
  }
  const Action a = index_.blend_labels(nbrs);
  return index_.frame() == Frame::Object ? from_object_frame(a, obj) : a;
}

EnsembleRunner::EnsembleRunner(EnsemblePolicy ensemble, std::string name)
    : ensemble_(std::move(ensemble)), name_(std::move(name)) {}

void EnsembleRunner::reset(std::uint64_t) {
  ensemble_.reset();
  window_.clear();
}

Action EnsembleRunner::act(const EnvState& env) {
  State s = observe(env);
  const Vec3 obj = s.object_position;
  if (ensemble_.frame() == Frame::Object) s = to_object_frame(s);

  window_.push_back(s);
  if (window_.size() > static_cast<std::size_t>(kFeatureSlots)) {
    window_.erase(window_.begin());
  }
  const Action a = ensemble_.act(window_);
  return ensemble_.frame() == Frame::Object ? from_object_frame(a, obj) : a;
}

ExpertPolicy::ExpertPolicy(SimConfig cfg, double noise_std, std::string name)
    : cfg_(std::move(cfg)), noise_std_(noise_std), name_(std::move(name)) {}

void ExpertPolicy::reset(std::uint64_t episode_seed) {
  expert_.emplace(cfg_, episode_seed);
  jitter_ = Rng(seed_mix(episode_seed, 0x6a74ull));
}

Action ExpertPolicy::act(const EnvState& env) {
  if (!expert_) expert_.emplace(cfg_, 0);
  Action a = expert_->act(env);
  if (noise_std_ > 0.0) {
    a.target.position +=
        noise_std_ * Vec3(jitter_.normal(), jitter_.normal(), jitter_.normal());
    a.target.position = cfg_.workspace.clamp(a.target.position);
  }
  return a;
}

Action NoopPolicy::act(const EnvState&) {
  Action a;
  a.frame = Frame::Robot;
  a.target = home_;
  return a;
}

}  // namespace chopil
