#pragma once

#include <string>
#include <utility>
#include <vector>

#include "chopil/trajectory.hpp"

namespace chopil {

// Demonstration corpus: successful trajectories only, one shared frame tag,
// per-dimension mean/variance over every state (population convention).
// Stats are refreshed on every mutating entry point.
struct DemoSet {
  std::vector<Trajectory> trajectories;
  Frame frame = Frame::Robot;
  StateVec mean = StateVec::Zero();
  StateVec variance = StateVec::Zero();

  std::size_t total_steps() const;

  // Every (flattened state, flattened action) pair, trajectory order.
  std::vector<std::pair<StateVec, ActionVec>> pairs() const;
};

// Population mean and variance per flattened state dimension across all steps.
// Throws InsufficientDataError when fewer than 2 steps are present.
std::pair<StateVec, StateVec> compute_stats(const std::vector<Trajectory>& trajectories);

// Build a DemoSet from trajectories: drops success=false entries, validates a
// single frame tag, computes stats.
DemoSet make_demo_set(std::vector<Trajectory> trajectories);

DemoSet to_object_frame(const DemoSet& demos);

// ---- trajectory file format (UTF-8 JSON lines) ----
//
//   header:  {"version":1,"frame":"robot"|"object","rate_hz":100}
//   step:    {"traj":"<id>","t":<s>,"state":[11],"action":[8],
//             "success":true|false,"radius":<m>}
//
// Values round-trip bit-exactly. Steps of one trajectory appear in time
// order; trajectories may interleave (grouped by id on load).

void save_trajectories(const std::vector<Trajectory>& trajectories, Frame frame,
                       const std::string& path);
std::pair<std::vector<Trajectory>, Frame> load_trajectories(const std::string& path);

// save/load with the DemoSet contract on top (success filter + stats).
void save_demos(const DemoSet& demos, const std::string& path);
DemoSet load_demos(const std::string& path);

}  // namespace chopil
