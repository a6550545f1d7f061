#include "chopil/evaluate.hpp"

#include <fstream>
#include <stdexcept>

#include "chopil/errors.hpp"

namespace chopil {

double EvalReport::success_rate() const {
  if (episodes.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& e : episodes) {
    if (e.outcome == Outcome::Success) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(episodes.size());
}

EvalReport evaluate_grid(Policy& policy, const SimConfig& cfg, const SceneObject& object,
                         const EvalOptions& opts) {
  if (opts.grid_n < 1 || opts.trials_per_cell < 1) {
    throw std::invalid_argument("grid_n and trials_per_cell must be >= 1");
  }
  cfg.validate();

  const double cell_w = (cfg.plate.x_hi - cfg.plate.x_lo) / opts.grid_n;
  const double cell_h = (cfg.plate.y_hi - cfg.plate.y_lo) / opts.grid_n;

  EvalReport report;
  for (int row = 0; row < opts.grid_n; ++row) {
    for (int col = 0; col < opts.grid_n; ++col) {
      for (int trial = 0; trial < opts.trials_per_cell; ++trial) {
        const Vec3 center(cfg.plate.x_lo + (row + 0.5) * cell_w,
                          cfg.plate.y_lo + (col + 0.5) * cell_h,
                          object.half_extent());
        const std::uint64_t ep = seed_mix(cfg.seed, static_cast<std::uint64_t>(row),
                                          static_cast<std::uint64_t>(col),
                                          static_cast<std::uint64_t>(trial));
        SimConfig ecfg = cfg;
        ecfg.seed = seed_mix(ep, 1);
        EnvState env = reset(ecfg, object, center);
        policy.reset(seed_mix(ep, 2));

        Trajectory traj;
        traj.id = object.name + "-r" + std::to_string(row) + "c" + std::to_string(col) +
                  "t" + std::to_string(trial);
        traj.object_radius = object.half_extent();

        std::string note;
        while (env.outcome == Outcome::Running) {
          const State s = observe(env);
          const double t = env.t;
          try {
            const Action a = policy.act(env);
            step(env, a, ecfg);
            if (opts.record_rollouts) traj.steps.push_back({t, s, a});
          } catch (const std::exception& e) {
            note = e.what();
            break;
          }
        }
        const Outcome outcome = note.empty() ? env.outcome : Outcome::Failure;

        report.episodes.push_back(
            {row, col, trial, object.name, outcome, env.step_count, note});
        if (opts.record_rollouts) {
          traj.success = outcome == Outcome::Success;
          report.rollouts.push_back(std::move(traj));
        }
      }
    }
  }
  return report;
}

void save_eval_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "cell_row,cell_col,object,outcome,steps\n";
  for (const auto& e : report.episodes) {
    out << e.row << ',' << e.col << ',' << e.object << ',' << outcome_name(e.outcome) << ','
        << e.steps;
    out << "\n";
  }
  out << "summary,," << (report.episodes.empty() ? "" : report.episodes.front().object)
      << ",success_rate," << report.success_rate() << "\n";
}

}  // namespace chopil
