#pragma once

#include <string>
#include <vector>

#include "chopil/policy.hpp"
#include "chopil/simulator.hpp"

namespace chopil {

struct EpisodeResult {
  int row = 0;
  int col = 0;
  int trial = 0;
  std::string object;
  Outcome outcome = Outcome::Failure;
  int steps = 0;
  std::string note;  // diagnostic when the policy faulted
};

struct EvalReport {
  std::vector<EpisodeResult> episodes;
  std::vector<Trajectory> rollouts;  // recorded when requested, RobotCentric

  double success_rate() const;
};

struct EvalOptions {
  int grid_n = 5;
  int trials_per_cell = 1;
  bool record_rollouts = false;
};

// Places the object at each cell center of a grid over the plate and rolls
// the policy closed-loop to a terminal outcome. Env noise seeds derive from
// cfg.seed and the cell, so different policies evaluated with the same cfg
// face identical per-episode conditions.
EvalReport evaluate_grid(Policy& policy, const SimConfig& cfg, const SceneObject& object,
                         const EvalOptions& opts = {});

// columns: cell_row, cell_col, object, outcome, steps; final summary row
void save_eval_csv(const EvalReport& report, const std::string& path);

}  // namespace chopil
