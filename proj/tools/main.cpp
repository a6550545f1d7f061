// chopil: batch front end for the chopstick-grasping imitation pipeline.
// Subcommands: gen, train, eval, replay, analyze, bench.
// Exit codes: 0 ok, 1 usage, 2 validation/config, 3 runtime.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "chopil/analysis.hpp"
#include "chopil/bc.hpp"
#include "chopil/benchmark.hpp"
#include "chopil/ensemble.hpp"
#include "chopil/errors.hpp"
#include "chopil/evaluate.hpp"
#include "chopil/knn.hpp"
#include "chopil/kvconfig.hpp"
#include "chopil/manifest.hpp"
#include "chopil/policy.hpp"
#include "chopil/rng.hpp"
#include "chopil/simulator.hpp"
#include "chopil/version.hpp"

namespace fs = std::filesystem;
using namespace chopil;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void ensure_parent_dir(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

KvConfig load_cfg(const std::string& path) {
  if (path.empty()) return {};
  return KvConfig::parse_file(path);
}

void reject_unknown_keys(const KvConfig& cfg) {
  const auto bad = unknown_keys(cfg);
  if (bad.empty()) return;
  std::string msg = "unknown config key(s):";
  for (const auto& k : bad) msg += " " + k;
  throw ValidationError(msg);
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string config;
  std::string object = "cube";
  int n = 100;
  std::uint64_t seed = 1;
  std::string out = "demos.jsonl";
};

int cmd_gen(const GenArgs& a) {
  Timer timer;
  const KvConfig cfg = load_cfg(a.config);
  SimConfig sim;
  apply_config(cfg, sim);
  reject_unknown_keys(cfg);
  sim.validate();

  const SceneObject object = make_object(a.object);
  sim.grasp_tolerance = grasp_tolerance_for(a.object);

  const DemoSet demos = generate_demos(sim, object, a.n, a.seed);
  ensure_parent_dir(a.out);
  save_demos(demos, a.out);

  double mean_len = 0.0;
  for (const auto& t : demos.trajectories) mean_len += static_cast<double>(t.steps.size());
  mean_len /= static_cast<double>(demos.trajectories.size());

  RunManifest man;
  man.command = "gen";
  man.config_path = a.config;
  man.seeds["seed"] = a.seed;
  man.outputs = {a.out};
  man.extra["object"] = a.object;
  man.extra["n"] = std::to_string(a.n);
  man.extra["mean_steps"] = std::to_string(mean_len);
  man.wall_seconds = timer.seconds();
  man.save(a.out + ".manifest.json");

  std::cout << "wrote " << demos.trajectories.size() << " demos (mean " << mean_len
            << " steps) to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string method = "bc";
  std::string frame = "object";
  std::string demos;
  std::string out = "model.json";
  std::uint64_t seed = 1;
  double noise_eta = 0.0;  // 0 = disabled unless the config file enables it
  int knn_k = 0;           // 0 = config value (default 5)
};

int cmd_train(const TrainArgs& a) {
  Timer timer;
  const KvConfig cfg = load_cfg(a.config);

  DemoSet demos = load_demos(a.demos);
  const Frame target_frame = frame_from_name(a.frame);
  if (demos.frame == Frame::Robot && target_frame == Frame::Object) {
    demos = to_object_frame(demos);
  } else if (demos.frame != target_frame) {
    throw ValidationError("demo file is " + frame_name(demos.frame) +
                          "-framed; cannot train a " + a.frame + "-frame model from it");
  }

  RunManifest man;
  man.command = "train";
  man.config_path = a.config;
  man.seeds["seed"] = a.seed;
  man.inputs = {a.demos};
  man.extra["method"] = a.method;
  man.extra["frame"] = a.frame;
  ensure_parent_dir(a.out);

  if (a.method == "bc") {
    TrainConfig tc;
    apply_config(cfg, tc);
    tc.seed = a.seed;
    // the flag wins over the config file; either can enable noise
    const double eta = a.noise_eta > 0.0 ? a.noise_eta : cfg.get_double("noise.eta", 0.0);
    if (eta > 0.0) {
      NoiseConfig nc;
      nc.eta = eta;
      nc.fraction = cfg.get_double("noise.fraction", nc.fraction);
      nc.seed = seed_mix(a.seed, 0xA0ull);
      tc.noise = nc;
    }
    reject_unknown_keys(cfg);
    tc.validate();
    const TrainResult result = train_bc(demos, tc);
    save_bc(result.net, a.out);
    man.extra["final_loss"] = std::to_string(result.epoch_loss.back());
    if (tc.noise.has_value()) man.extra["noise_eta"] = std::to_string(tc.noise->eta);
    std::cout << "trained bc (" << result.net.parameter_count() << " params, final loss "
              << result.epoch_loss.back() << ") to " << a.out << "\n";
  } else {  // knn
    if (a.noise_eta > 0.0) {
      throw UsageError("--noise-eta only applies to --method bc");
    }
    KnnConfig kc;
    kc.k = cfg.get_int("knn.k", kc.k);
    if (a.knn_k > 0) kc.k = a.knn_k;
    kc.dedup_epsilon = cfg.get_double("knn.dedup_epsilon", kc.dedup_epsilon);
    reject_unknown_keys(cfg);
    const KnnIndex index = build_knn(demos, kc);
    save_knn(index, a.out, a.demos);
    man.extra["entries"] = std::to_string(index.size());
    man.extra["k"] = std::to_string(kc.k);
    std::cout << "built knn index (" << index.size() << " entries, k=" << kc.k << ") to "
              << a.out << "\n";
  }

  man.outputs = {a.out};
  man.wall_seconds = timer.seconds();
  man.save(a.out + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string config;
  std::string bc_path;
  std::string knn_path;
  std::string demos;  // needed for --ensemble-alpha auto
  std::string ensemble_alpha = "auto";
  std::string object = "cube";
  int grid = 5;
  int trials = 25;
  std::uint64_t seed = 1;
  std::string out = "eval.csv";
  std::string rollouts_out;
  std::string switch_log_out;
};

int cmd_eval(const EvalArgs& a) {
  Timer timer;
  const KvConfig cfg = load_cfg(a.config);
  SimConfig sim;
  apply_config(cfg, sim);
  reject_unknown_keys(cfg);
  sim.grasp_tolerance = grasp_tolerance_for(a.object);
  sim.seed = a.seed;
  sim.validate();

  if (a.bc_path.empty() && a.knn_path.empty()) {
    throw UsageError("pass --bc and/or --knn (both for an ensemble)");
  }
  const int cells = a.grid * a.grid;
  if (a.trials % cells != 0) {
    throw UsageError("--trials must be a multiple of --grid^2 (grid " +
                     std::to_string(a.grid) + " -> multiple of " + std::to_string(cells) + ")");
  }

  RunManifest man;
  man.command = "eval";
  man.config_path = a.config;
  man.seeds["seed"] = a.seed;
  man.extra["object"] = a.object;
  man.extra["grid"] = std::to_string(a.grid);
  man.extra["trials"] = std::to_string(a.trials);

  std::unique_ptr<Policy> policy;
  EnsembleRunner* ensemble = nullptr;
  if (!a.bc_path.empty() && !a.knn_path.empty()) {
    BCNetwork net = load_bc(a.bc_path);
    KnnIndex index = load_knn(a.knn_path);
    man.inputs = {a.bc_path, a.knn_path};
    EnsembleConfig ec;
    ec.k = index.k();
    if (a.ensemble_alpha == "auto") {
      if (a.demos.empty()) {
        throw UsageError("--ensemble-alpha auto needs --demos for calibration");
      }
      DemoSet demos = load_demos(a.demos);
      if (demos.frame == Frame::Robot && index.frame() == Frame::Object) {
        demos = to_object_frame(demos);
      }
      ec.alpha = calibrate_alpha(index, demos, cfg.get_double("ensemble.quantile", 0.99));
      man.inputs.push_back(a.demos);
    } else {
      try {
        std::size_t pos = 0;
        ec.alpha = std::stod(a.ensemble_alpha, &pos);
        if (pos != a.ensemble_alpha.size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw UsageError("--ensemble-alpha must be 'auto' or a number");
      }
    }
    man.extra["alpha"] = std::to_string(ec.alpha);
    auto runner = std::make_unique<EnsembleRunner>(
        EnsemblePolicy(std::move(net), std::move(index), ec), "Ensemble");
    ensemble = runner.get();
    policy = std::move(runner);
  } else if (!a.bc_path.empty()) {
    BCNetwork net = load_bc(a.bc_path);
    man.inputs = {a.bc_path};
    const std::string name =
        net.frame() == Frame::Object ? "BC+ObjC" : "BC+RobotC";
    policy = std::make_unique<BcPolicy>(std::move(net), name);
  } else {
    KnnIndex index = load_knn(a.knn_path);
    man.inputs = {a.knn_path};
    const std::string name =
        index.frame() == Frame::Object ? "kNN+ObjC" : "kNN+RobotC";
    policy = std::make_unique<KnnPolicy>(std::move(index), name);
  }

  EvalOptions opts;
  opts.grid_n = a.grid;
  opts.trials_per_cell = a.trials / cells;
  opts.record_rollouts = !a.rollouts_out.empty();

  const SceneObject object = make_object(a.object);
  const EvalReport report = evaluate_grid(*policy, sim, object, opts);

  ensure_parent_dir(a.out);
  save_eval_csv(report, a.out);
  man.outputs = {a.out};
  if (!a.rollouts_out.empty()) {
    ensure_parent_dir(a.rollouts_out);
    save_trajectories(report.rollouts, Frame::Robot, a.rollouts_out);
    man.outputs.push_back(a.rollouts_out);
  }
  if (ensemble != nullptr && !a.switch_log_out.empty()) {
    ensure_parent_dir(a.switch_log_out);
    save_switch_log(ensemble->ensemble().switch_log(), a.switch_log_out);
    man.outputs.push_back(a.switch_log_out);
  }

  man.extra["policy"] = policy->name();
  man.extra["success_rate"] = std::to_string(report.success_rate());
  man.wall_seconds = timer.seconds();
  man.save(a.out + ".manifest.json");

  std::cout << policy->name() << " on " << a.object << ": success rate "
            << report.success_rate() << " over " << report.episodes.size()
            << " episodes -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- replay

struct ReplayArgs {
  std::string config;
  std::string demos;
  std::string out = "replay.csv";
  int limit = 0;  // 0 = all
};

int cmd_replay(const ReplayArgs& a) {
  Timer timer;
  const KvConfig cfg = load_cfg(a.config);
  SimConfig sim;
  apply_config(cfg, sim);
  reject_unknown_keys(cfg);
  sim.validate();

  const DemoSet demos = load_demos(a.demos);
  std::size_t n = demos.trajectories.size();
  if (a.limit > 0) n = std::min<std::size_t>(n, static_cast<std::size_t>(a.limit));

  ensure_parent_dir(a.out);
  std::ofstream out(a.out);
  if (!out) throw ValidationError("cannot open for writing: " + a.out);
  out << "trajectory,outcome\n";
  int successes = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Trajectory& traj = demos.trajectories[i];
    SimConfig rcfg = sim;
    rcfg.grasp_tolerance = grasp_tolerance_for_radius(traj.object_radius, sim.grasp_tolerance);
    rcfg.seed = seed_mix(sim.seed, i, 0x7265ull);
    const Outcome outcome = replay(traj, rcfg);
    if (outcome == Outcome::Success) ++successes;
    out << traj.id << "," << outcome_name(outcome) << "\n";
  }
  const double rate = n > 0 ? static_cast<double>(successes) / static_cast<double>(n) : 0.0;
  out << "summary,success_rate=" << rate << "\n";
  out.close();

  RunManifest man;
  man.command = "replay";
  man.config_path = a.config;
  man.seeds["seed"] = sim.seed;
  man.inputs = {a.demos};
  man.outputs = {a.out};
  man.extra["episodes"] = std::to_string(n);
  man.extra["success_rate"] = std::to_string(rate);
  man.wall_seconds = timer.seconds();
  man.save(a.out + ".manifest.json");

  std::cout << "replayed " << n << " demos: success rate " << rate << " -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string demos;
  std::vector<std::string> rollouts;
  std::string agent = "agent";
  std::string out = "shift.json";
  std::string cloud_out;
};

int cmd_analyze(const AnalyzeArgs& a) {
  Timer timer;
  DemoSet demos = load_demos(a.demos);

  std::vector<Trajectory> rollouts;
  for (const auto& path : a.rollouts) {
    auto [trajs, frame] = load_trajectories(path);
    for (auto& t : trajs) {
      if (frame == demos.frame) {
        rollouts.push_back(std::move(t));
      } else if (frame == Frame::Robot && demos.frame == Frame::Object) {
        rollouts.push_back(to_object_frame(t));
      } else {
        throw ValidationError("rollouts in " + path + " are " + frame_name(frame) +
                              "-framed but demos are " + frame_name(demos.frame));
      }
    }
  }

  std::vector<StateVec> states;
  states.reserve(demos.total_steps());
  for (const auto& t : demos.trajectories) {
    for (const auto& s : t.steps) states.push_back(s.state.flatten());
  }
  const PcaModel pca = pca_fit(states, 2);
  const ShiftReport report = shift_metric(demos, rollouts, pca, a.agent);

  nlohmann::ordered_json j;
  j["agent"] = report.agent_name;
  j["rollout_states"] = report.projected_points.size();
  j["mean_nn_distance"] = report.mean_nn_distance;
  j["p95_nn_distance"] = report.p95_nn_distance;
  ensure_parent_dir(a.out);
  std::ofstream out(a.out);
  if (!out) throw ValidationError("cannot open for writing: " + a.out);
  out << j.dump(2) << "\n";
  out.close();

  RunManifest man;
  man.command = "analyze";
  man.inputs = a.rollouts;
  man.inputs.insert(man.inputs.begin(), a.demos);
  man.outputs = {a.out};
  if (!a.cloud_out.empty()) {
    ensure_parent_dir(a.cloud_out);
    save_point_cloud_csv(report, a.cloud_out);
    man.outputs.push_back(a.cloud_out);
  }
  man.extra["agent"] = a.agent;
  man.extra["mean_nn_distance"] = std::to_string(report.mean_nn_distance);
  man.wall_seconds = timer.seconds();
  man.save(a.out + ".manifest.json");

  std::cout << a.agent << ": mean_nn_distance " << report.mean_nn_distance
            << ", p95 " << report.p95_nn_distance << " -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string config;
  std::string out_dir = "bench_out";
  int seeds = 0;            // 0 = keep config value
  int demos_per_object = 0; // 0 = keep config value
  std::string demo_dir;
};

int cmd_bench(const BenchArgs& a) {
  const KvConfig cfg = load_cfg(a.config);
  BenchmarkConfig bc;
  apply_config(cfg, bc);
  reject_unknown_keys(cfg);
  if (a.seeds > 0) bc.n_seeds = a.seeds;
  if (a.demos_per_object > 0) bc.demos_per_object = a.demos_per_object;
  if (!a.demo_dir.empty()) bc.demo_dir = a.demo_dir;
  bc.validate();

  const BenchmarkReport report = run_benchmark(bc);

  fs::create_directories(a.out_dir);
  save_benchmark(report, bc, a.out_dir);

  RunManifest man;
  man.command = "bench";
  man.config_path = a.config;
  man.seeds["base_seed"] = bc.base_seed;
  man.extra["n_seeds"] = std::to_string(bc.n_seeds);
  man.extra["demos_per_object"] = std::to_string(bc.demos_per_object);
  man.outputs = {a.out_dir + "/benchmark_matrix.csv", a.out_dir + "/benchmark_details.json"};
  if (bc.export_point_clouds) {
    for (const auto& cloud : report.point_clouds) {
      std::string name = cloud.agent_name;
      for (auto& c : name) {
        if (c == '+') c = '_';
      }
      man.outputs.push_back(a.out_dir + "/point_cloud_" + name + ".csv");
    }
  }
  man.wall_seconds = report.wall_seconds;
  man.save(a.out_dir + "/manifest.json");

  // echo the headline matrix
  std::cout << "method";
  for (const auto& obj : report.objects) std::cout << "\t" << obj;
  std::cout << "\tAll\n";
  for (const auto& m : report.methods) {
    std::cout << m;
    for (const auto& obj : report.objects) {
      std::printf("\t%.1f", 100.0 * report.mean_success(m, obj));
    }
    std::printf("\t%.1f\n", 100.0 * report.mean_success(m, "All"));
  }
  std::cout << "wall " << report.wall_seconds << " s -> " << a.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chopstick-grasping imitation pipeline"};
  app.set_version_flag("--version", std::string("chopil ") + kToolVersion +
                                        " (format " + std::to_string(kFormatVersion) + ")");
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* c_gen = app.add_subcommand("gen", "generate expert demonstrations");
  c_gen->add_option("--config", gen.config, "key = value config file");
  c_gen->add_option("--object", gen.object, "cube | ball20 | ball14")
      ->check(CLI::IsMember(object_names()));
  c_gen->add_option("--n", gen.n, "number of successful demos")->check(CLI::PositiveNumber);
  c_gen->add_option("--seed", gen.seed, "base seed");
  c_gen->add_option("--out", gen.out, "output trajectory file (json-lines)");

  TrainArgs train;
  CLI::App* c_train = app.add_subcommand("train", "fit a policy on a demo file");
  c_train->add_option("--config", train.config, "key = value config file");
  c_train->add_option("--method", train.method, "bc | knn")
      ->check(CLI::IsMember({"bc", "knn"}));
  c_train->add_option("--frame", train.frame, "robot | object")
      ->check(CLI::IsMember({"robot", "object"}));
  c_train->add_option("--demos", train.demos, "demo trajectory file")->required();
  c_train->add_option("--seed", train.seed, "training seed");
  c_train->add_option("--noise-eta", train.noise_eta,
                      "corrective-label noise scale (bc only; 0 disables)")
      ->check(CLI::NonNegativeNumber);
  c_train->add_option("--k", train.knn_k, "neighbor count (knn only)")
      ->check(CLI::PositiveNumber);
  c_train->add_option("--out", train.out, "output model/index file");

  EvalArgs eval;
  CLI::App* c_eval = app.add_subcommand("eval", "grid evaluation of trained policies");
  c_eval->add_option("--config", eval.config, "key = value config file");
  c_eval->add_option("--bc", eval.bc_path, "bc model file");
  c_eval->add_option("--knn", eval.knn_path, "knn index file");
  c_eval->add_option("--demos", eval.demos, "demo file (alpha auto calibration)");
  c_eval->add_option("--ensemble-alpha", eval.ensemble_alpha, "'auto' or a distance threshold");
  c_eval->add_option("--object", eval.object, "cube | ball20 | ball14")
      ->check(CLI::IsMember(object_names()));
  c_eval->add_option("--grid", eval.grid, "grid side length")->check(CLI::PositiveNumber);
  c_eval->add_option("--trials", eval.trials, "total episodes (multiple of grid^2)")
      ->check(CLI::PositiveNumber);
  c_eval->add_option("--seed", eval.seed, "evaluation seed");
  c_eval->add_option("--out", eval.out, "per-episode CSV");
  c_eval->add_option("--save-rollouts", eval.rollouts_out, "record rollouts to this file");
  c_eval->add_option("--switch-log", eval.switch_log_out, "ensemble branch log CSV");

  ReplayArgs replay;
  CLI::App* c_replay = app.add_subcommand("replay", "open-loop re-execution of demos");
  c_replay->add_option("--config", replay.config, "key = value config file");
  c_replay->add_option("--demos", replay.demos, "demo trajectory file")->required();
  c_replay->add_option("--limit", replay.limit, "replay only the first N")
      ->check(CLI::NonNegativeNumber);
  c_replay->add_option("--out", replay.out, "per-trajectory CSV");

  AnalyzeArgs analyze;
  CLI::App* c_analyze = app.add_subcommand("analyze", "covariate-shift metrics vs demos");
  c_analyze->add_option("--demos", analyze.demos, "demo trajectory file")->required();
  c_analyze->add_option("--rollouts", analyze.rollouts, "rollout trajectory file(s)")
      ->required()
      ->expected(-1);
  c_analyze->add_option("--agent", analyze.agent, "label for the report");
  c_analyze->add_option("--out", analyze.out, "report JSON");
  c_analyze->add_option("--cloud", analyze.cloud_out, "projected point-cloud CSV");

  BenchArgs bench;
  CLI::App* c_bench = app.add_subcommand("bench", "full method-by-object benchmark matrix");
  c_bench->add_option("--config", bench.config, "key = value config file");
  c_bench->add_option("--out", bench.out_dir, "output directory");
  c_bench->add_option("--seeds", bench.seeds, "override bench.n_seeds")
      ->check(CLI::PositiveNumber);
  c_bench->add_option("--demos-per-object", bench.demos_per_object,
                      "override bench.demos_per_object")
      ->check(CLI::PositiveNumber);
  c_bench->add_option("--demos", bench.demo_dir, "directory of pre-generated demo files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_gen->parsed()) return cmd_gen(gen);
    if (c_train->parsed()) return cmd_train(train);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_replay->parsed()) return cmd_replay(replay);
    if (c_analyze->parsed()) return cmd_analyze(analyze);
    if (c_bench->parsed()) return cmd_bench(bench);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
