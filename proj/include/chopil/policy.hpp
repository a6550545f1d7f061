#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chopil/bc.hpp"
#include "chopil/ensemble.hpp"
#include "chopil/knn.hpp"
#include "chopil/simulator.hpp"

namespace chopil {

// Closed-loop actors for the evaluation loop. act() receives the environment
// and must return a robot-centric command; adapters for object-centric models
// transform the observation in and the action back out.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void reset(std::uint64_t episode_seed) = 0;
  virtual Action act(const EnvState& env) = 0;
};

class BcPolicy : public Policy {
 public:
  BcPolicy(BCNetwork net, std::string name);
  std::string name() const override { return name_; }
  void reset(std::uint64_t) override {}
  Action act(const EnvState& env) override;

 private:
  BCNetwork net_;
  std::string name_;
};

class KnnPolicy : public Policy {
 public:
  KnnPolicy(KnnIndex index, std::string name);
  std::string name() const override { return name_; }
  void reset(std::uint64_t) override;
  Action act(const EnvState& env) override;

 private:
  KnnIndex index_;
  std::string name_;
  std::vector<Pose> window_;
  std::vector<std::size_t> hints_;
};

class EnsembleRunner : public Policy {
 public:
  EnsembleRunner(EnsemblePolicy ensemble, std::string name);
  std::string name() const override { return name_; }
  void reset(std::uint64_t) override;
  Action act(const EnvState& env) override;
  const EnsemblePolicy& ensemble() const { return ensemble_; }

 private:
  EnsemblePolicy ensemble_;
  std::string name_;
  std::vector<State> window_;
};

class ExpertPolicy : public Policy {
 public:
  // noise_std > 0 adds demonstration-style command jitter
  ExpertPolicy(SimConfig cfg, double noise_std, std::string name = "Expert");
  std::string name() const override { return name_; }
  void reset(std::uint64_t episode_seed) override;
  Action act(const EnvState& env) override;

 private:
  SimConfig cfg_;
  double noise_std_;
  std::string name_;
  std::optional<ScriptedExpert> expert_;
  Rng jitter_{0};
};

// always commands the home pose; useful as a zero baseline
class NoopPolicy : public Policy {
 public:
  explicit NoopPolicy(Pose home) : home_(home) {}
  std::string name() const override { return "Noop"; }
  void reset(std::uint64_t) override {}
  Action act(const EnvState&) override;

 private:
  Pose home_;
};

}  // namespace chopil
