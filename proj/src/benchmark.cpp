#include "chopil/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "chopil/bc.hpp"
#include "chopil/ensemble.hpp"
#include "chopil/errors.hpp"
#include "chopil/evaluate.hpp"
#include "chopil/knn.hpp"
#include "chopil/policy.hpp"

namespace chopil {

namespace {

const char* kExpert = "Expert";
const char* kReplay = "Replay";
const char* kBcRobot = "BC+RobotC";
const char* kBcObj = "BC+ObjC";
const char* kBcNoise = "BC+ObjC+Noise";
const char* kKnnRobot = "kNN+RobotC";
const char* kKnnObj = "kNN+ObjC";
const char* kEnsemble = "Ensemble";

const std::vector<std::string> kMethods{kExpert, kReplay,  kBcRobot, kBcObj,
                                        kBcNoise, kKnnRobot, kKnnObj,  kEnsemble};

// the methods whose rollouts feed the covariate-shift analysis
bool wants_shift(const std::string& m) {
  return m == kBcObj || m == kBcNoise || m == kKnnObj || m == kEnsemble;
}

std::vector<StateVec> demo_states(const DemoSet& demos) {
  std::vector<StateVec> states;
  states.reserve(demos.total_steps());
  for (const auto& traj : demos.trajectories) {
    for (const auto& s : traj.steps) states.push_back(s.state.flatten());
  }
  return states;
}

}  // namespace

const std::vector<std::string>& benchmark_methods() { return kMethods; }

std::string demo_file_path(const std::string& dir, const std::string& object,
                           std::uint64_t seed) {
  return dir + "/" + object + "-seed" + std::to_string(seed) + ".jsonl";
}

void BenchmarkConfig::validate() const {
  sim.validate();
  if (demos_per_object < 1) throw std::invalid_argument("demos_per_object must be >= 1");
  if (n_seeds < 1) throw std::invalid_argument("n_seeds must be >= 1");
  if (grid_n < 1 || trials_per_cell < 1) {
    throw std::invalid_argument("grid_n and trials_per_cell must be >= 1");
  }
  if (epochs < 1 || batch_size < 1 || !(learning_rate > 0) || sample_stride < 1) {
    throw std::invalid_argument("bad training settings");
  }
  if (eta < 0 || noise_fraction < 0 || noise_fraction > 1) {
    throw std::invalid_argument("bad noise settings");
  }
  if (knn_k < 1 || knn_dedup_epsilon < 0) throw std::invalid_argument("bad knn settings");
  if (!(ensemble_quantile >= 0 && ensemble_quantile <= 1)) {
    throw std::invalid_argument("ensemble_quantile must be in [0, 1]");
  }
}

const BenchCell* BenchmarkReport::find(const std::string& method, const std::string& object,
                                       std::uint64_t seed) const {
  for (const auto& c : cells) {
    if (c.method == method && c.object == object && c.seed == seed) return &c;
  }
  return nullptr;
}

double BenchmarkReport::mean_success(const std::string& method,
                                     const std::string& object) const {
  if (object == "All") {
    double sum = 0.0;
    for (const auto& obj : objects) sum += mean_success(method, obj);
    return sum / static_cast<double>(objects.size());
  }
  double sum = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.method == method && c.object == object && c.error.empty()) {
      sum += c.success;
      ++n;
    }
  }
  return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> BenchmarkReport::per_seed_all(const std::string& method) const {
  std::vector<double> out;
  for (const std::uint64_t seed : seeds) {
    double sum = 0.0;
    for (const auto& obj : objects) {
      const BenchCell* c = find(method, obj, seed);
      if (c == nullptr || !c->error.empty()) {
        sum = std::numeric_limits<double>::quiet_NaN();
        break;
      }
      sum += c->success;
    }
    out.push_back(sum / static_cast<double>(objects.size()));
  }
  return out;
}

std::vector<double> BenchmarkReport::per_seed_shift(const std::string& method) const {
  std::vector<double> out;
  for (const std::uint64_t seed : seeds) {
    double sum = 0.0;
    for (const auto& obj : objects) {
      const BenchCell* c = find(method, obj, seed);
      if (c == nullptr || std::isnan(c->mean_nn)) {
        sum = std::numeric_limits<double>::quiet_NaN();
        break;
      }
      sum += c->mean_nn;
    }
    out.push_back(sum / static_cast<double>(objects.size()));
  }
  return out;
}

BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  const auto t_start = std::chrono::steady_clock::now();

  BenchmarkReport report;
  report.methods = kMethods;
  report.objects = object_names();
  report.cloud_object = "ball20";
  for (int i = 0; i < cfg.n_seeds; ++i) {
    report.seeds.push_back(cfg.base_seed + static_cast<std::uint64_t>(i));
  }

  if (!cfg.demo_dir.empty()) {
    // fail fast on any missing file rather than burying it in a cell error
    for (const auto& obj_name : report.objects) {
      for (const std::uint64_t seed : report.seeds) {
        const std::string path = demo_file_path(cfg.demo_dir, obj_name, seed);
        if (!std::filesystem::exists(path)) {
          throw ValidationError("demo file not found: " + path);
        }
      }
    }
  }

  const EvalOptions plain_opts{cfg.grid_n, cfg.trials_per_cell, false};
  const EvalOptions record_opts{cfg.grid_n, cfg.trials_per_cell, true};

  for (std::size_t obj_i = 0; obj_i < report.objects.size(); ++obj_i) {
    const std::string& obj_name = report.objects[obj_i];
    SceneObject object = make_object(obj_name);
    SimConfig ocfg = cfg.sim;
    ocfg.grasp_tolerance = grasp_tolerance_for(obj_name);

    for (const std::uint64_t seed : report.seeds) {
      // one fully independent replicate: fresh demos, training and eval; the
      // eval seed is shared across methods so paired comparisons see the
      // same per-episode noise
      const std::uint64_t demo_seed = seed_mix(seed, obj_i, 0xD0ull);
      const std::uint64_t eval_seed = seed_mix(seed, obj_i, 0xE0ull);

      DemoSet demos_robot;
      DemoSet demos_obj;
      try {
        if (cfg.demo_dir.empty()) {
          demos_robot = generate_demos(ocfg, object, cfg.demos_per_object, demo_seed);
        } else {
          demos_robot = load_demos(demo_file_path(cfg.demo_dir, obj_name, seed));
          if (demos_robot.frame != Frame::Robot) {
            throw ValidationError("demo files for the benchmark must be robot-centric");
          }
        }
        demos_obj = to_object_frame(demos_robot);
      } catch (const std::exception& e) {
        for (const auto& m : kMethods) {
          report.cells.push_back({m, obj_name, seed, 0.0,
                                  std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::quiet_NaN(),
                                  std::string("demo generation failed: ") + e.what()});
        }
        continue;
      }

      TrainConfig tc;
      tc.epochs = cfg.epochs;
      tc.batch_size = cfg.batch_size;
      tc.learning_rate = cfg.learning_rate;
      tc.sample_stride = cfg.sample_stride;
      tc.seed = seed;

      TrainConfig tc_noise = tc;
      tc_noise.noise = NoiseConfig{};
      tc_noise.noise->eta = cfg.eta;
      tc_noise.noise->fraction = cfg.noise_fraction;
      tc_noise.noise->seed = seed_mix(seed, obj_i, 0xA0ull);

      KnnConfig kc;
      kc.k = cfg.knn_k;
      kc.dedup_epsilon = cfg.knn_dedup_epsilon;

      PcaModel pca = pca_fit(demo_states(demos_obj));

      for (const auto& method : kMethods) {
        BenchCell cell;
        cell.method = method;
        cell.object = obj_name;
        cell.seed = seed;
        try {
          SimConfig ecfg = ocfg;
          ecfg.seed = eval_seed;

          if (method == kReplay) {
            Rng pick(seed_mix(eval_seed, 0x5252ull));
            const int trials = cfg.grid_n * cfg.grid_n * cfg.trials_per_cell;
            int ok = 0;
            for (int e = 0; e < trials; ++e) {
              const auto& traj = demos_robot.trajectories[pick.uniform_index(
                  demos_robot.trajectories.size())];
              SimConfig rcfg = ocfg;
              rcfg.seed = seed_mix(eval_seed, static_cast<std::uint64_t>(e), 2ull);
              if (replay(traj, rcfg) == Outcome::Success) ++ok;
            }
            cell.success = static_cast<double>(ok) / trials;
            report.cells.push_back(std::move(cell));
            continue;
          }

          std::unique_ptr<Policy> policy;
          if (method == kExpert) {
            policy = std::make_unique<ExpertPolicy>(ocfg, ocfg.expert_noise_std);
          } else if (method == kBcRobot) {
            policy = std::make_unique<BcPolicy>(train_bc(demos_robot, tc).net, method);
          } else if (method == kBcObj) {
            policy = std::make_unique<BcPolicy>(train_bc(demos_obj, tc).net, method);
          } else if (method == kBcNoise) {
            policy = std::make_unique<BcPolicy>(train_bc(demos_obj, tc_noise).net, method);
          } else if (method == kKnnRobot) {
            policy = std::make_unique<KnnPolicy>(build_knn(demos_robot, kc), method);
          } else if (method == kKnnObj) {
            policy = std::make_unique<KnnPolicy>(build_knn(demos_obj, kc), method);
          } else {  // ensemble
            KnnIndex index = build_knn(demos_obj, kc);
            const double alpha = calibrate_alpha(index, demos_obj, cfg.ensemble_quantile);
            cell.alpha = alpha;
            EnsemblePolicy ens(train_bc(demos_obj, tc_noise).net, std::move(index),
                               EnsembleConfig{alpha, cfg.knn_k});
            policy = std::make_unique<EnsembleRunner>(std::move(ens), method);
          }

          const bool shift = wants_shift(method);
          const EvalReport eval =
              evaluate_grid(*policy, ecfg, object, shift ? record_opts : plain_opts);
          cell.success = eval.success_rate();

          if (shift) {
            std::vector<Trajectory> rollouts;
            rollouts.reserve(eval.rollouts.size());
            for (const auto& r : eval.rollouts) {
              if (!r.steps.empty()) rollouts.push_back(to_object_frame(r));
            }
            const ShiftReport sr = shift_metric(demos_obj, rollouts, pca, method);
            cell.mean_nn = sr.mean_nn_distance;
            cell.p95_nn = sr.p95_nn_distance;
            if (cfg.export_point_clouds && obj_name == report.cloud_object &&
                seed == report.seeds.front()) {
              report.point_clouds.push_back(sr);
            }
          }
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        report.cells.push_back(std::move(cell));
      }
    }
  }

  const auto add_comparison = [&report](const std::string& name, const std::string& hi,
                                        const std::string& lo) {
    const auto a = report.per_seed_all(hi);
    const auto b = report.per_seed_all(lo);
    for (double v : a) {
      if (std::isnan(v)) return;
    }
    for (double v : b) {
      if (std::isnan(v)) return;
    }
    if (a.size() >= 2) report.comparisons[name] = paired_t_test(a, b);
  };
  add_comparison("noise_vs_objc", kBcNoise, kBcObj);
  add_comparison("ensemble_vs_robotc", kEnsemble, kBcRobot);
  add_comparison("ensemble_vs_noise", kEnsemble, kBcNoise);
  add_comparison("objc_vs_robotc", kBcObj, kBcRobot);

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

void save_benchmark(const BenchmarkReport& report, const BenchmarkConfig& cfg,
                    const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  {
    std::ofstream out(fs::path(out_dir) / "benchmark_matrix.csv");
    if (!out) throw ValidationError("cannot write benchmark matrix");
    out << "method";
    for (const auto& obj : report.objects) out << ',' << obj;
    out << ",All\n";
    out.setf(std::ios::fixed);
    out.precision(1);
    for (const auto& m : report.methods) {
      out << m;
      for (const auto& obj : report.objects) out << ',' << 100.0 * report.mean_success(m, obj);
      out << ',' << 100.0 * report.mean_success(m, "All") << "\n";
    }
  }

  {
    nlohmann::ordered_json j;
    j["seeds"] = report.seeds;
    j["wall_seconds"] = report.wall_seconds;
    j["config"] = {{"demos_per_object", cfg.demos_per_object},
                   {"n_seeds", cfg.n_seeds},
                   {"base_seed", cfg.base_seed},
                   {"grid_n", cfg.grid_n},
                   {"trials_per_cell", cfg.trials_per_cell},
                   {"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"learning_rate", cfg.learning_rate},
                   {"sample_stride", cfg.sample_stride},
                   {"eta", cfg.eta},
                   {"noise_fraction", cfg.noise_fraction},
                   {"knn_k", cfg.knn_k},
                   {"knn_dedup_epsilon", cfg.knn_dedup_epsilon},
                   {"ensemble_quantile", cfg.ensemble_quantile}};
    auto& jc = j["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : report.cells) {
      nlohmann::ordered_json e{{"method", c.method},
                               {"object", c.object},
                               {"seed", c.seed},
                               {"success", c.success}};
      if (!std::isnan(c.mean_nn)) {
        e["mean_nn_distance"] = c.mean_nn;
        e["p95_nn_distance"] = c.p95_nn;
      }
      if (!std::isnan(c.alpha)) e["alpha"] = c.alpha;
      if (!c.error.empty()) e["error"] = c.error;
      jc.push_back(std::move(e));
    }
    auto& jp = j["comparisons"] = nlohmann::ordered_json::object();
    for (const auto& [name, r] : report.comparisons) {
      jp[name] = {{"mean_diff", r.mean_diff},
                  {"t", r.t_statistic},
                  {"p", r.p_value},
                  {"n", r.n_pairs},
                  {"degenerate", r.degenerate}};
    }
    auto& js = j["shift_5seed_mean"] = nlohmann::ordered_json::object();
    for (const auto& m : report.methods) {
      const auto v = report.per_seed_shift(m);
      double sum = 0.0;
      bool ok = !v.empty();
      for (double x : v) {
        if (std::isnan(x)) ok = false;
        sum += x;
      }
      if (ok) js[m] = sum / static_cast<double>(v.size());
    }
    std::ofstream out(fs::path(out_dir) / "benchmark_details.json");
    if (!out) throw ValidationError("cannot write benchmark details");
    out << j.dump(2) << "\n";
  }

  for (const auto& cloud : report.point_clouds) {
    std::string name = cloud.agent_name;
    std::replace(name.begin(), name.end(), '+', '_');
    save_point_cloud_csv(cloud,
                         (fs::path(out_dir) / ("point_cloud_" + name + ".csv")).string());
  }
}

}  // namespace chopil
