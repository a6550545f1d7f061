#include "chopil/dataset.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "chopil/errors.hpp"

namespace chopil {

using ordered_json = nlohmann::ordered_json;

std::size_t DemoSet::total_steps() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  return n;
}

std::vector<std::pair<StateVec, ActionVec>> DemoSet::pairs() const {
  std::vector<std::pair<StateVec, ActionVec>> out;
  out.reserve(total_steps());
  for (const auto& traj : trajectories) {
    for (const auto& step : traj.steps) {
      out.emplace_back(step.state.flatten(), step.action.flatten());
    }
  }
  return out;
}

std::pair<StateVec, StateVec> compute_stats(const std::vector<Trajectory>& trajectories) {
  std::size_t n = 0;
  StateVec sum = StateVec::Zero();
  for (const auto& traj : trajectories) {
    for (const auto& step : traj.steps) {
      sum += step.state.flatten();
      ++n;
    }
  }
  if (n < 2) {
    throw InsufficientDataError("stats require at least 2 steps, got " + std::to_string(n));
  }
  const StateVec mean = sum / static_cast<double>(n);
  StateVec sq = StateVec::Zero();
  for (const auto& traj : trajectories) {
    for (const auto& step : traj.steps) {
      const StateVec d = step.state.flatten() - mean;
      sq += d.cwiseProduct(d);
    }
  }
  return {mean, sq / static_cast<double>(n)};
}

DemoSet make_demo_set(std::vector<Trajectory> trajectories) {
  DemoSet set;
  for (auto& traj : trajectories) {
    if (traj.success) set.trajectories.push_back(std::move(traj));
  }
  if (!set.trajectories.empty()) {
    set.frame = set.trajectories.front().frame();
    for (const auto& traj : set.trajectories) {
      if (traj.frame() != set.frame) {
        throw ValidationError("demo set mixes frame tags");
      }
    }
  }
  if (set.total_steps() >= 2) {
    auto [mean, variance] = compute_stats(set.trajectories);
    set.mean = mean;
    set.variance = variance;
  }
  return set;
}

DemoSet to_object_frame(const DemoSet& demos) {
  DemoSet out;
  out.trajectories.reserve(demos.trajectories.size());
  for (const auto& traj : demos.trajectories) {
    out.trajectories.push_back(to_object_frame(traj));
  }
  out.frame = Frame::Object;
  if (out.total_steps() >= 2) {
    auto [mean, variance] = compute_stats(out.trajectories);
    out.mean = mean;
    out.variance = variance;
  }
  return out;
}

namespace {

void validate_step(const Step& step, long line) {
  const StateVec sv = step.state.flatten();
  const ActionVec av = step.action.flatten();
  if (!sv.allFinite() || !av.allFinite() || !std::isfinite(step.t)) {
    throw ValidationError("non-finite value in step record (line " + std::to_string(line) + ")");
  }
  if (step.state.pose.opening < 0.0 || step.state.pose.opening > kOpeningMax ||
      step.action.target.opening < 0.0 || step.action.target.opening > kOpeningMax) {
    throw ValidationError("opening angle out of [0, opening_max] (line " +
                          std::to_string(line) + ")");
  }
}

}  // namespace

void save_trajectories(const std::vector<Trajectory>& trajectories, Frame frame,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  ordered_json header;
  header["version"] = 1;
  header["frame"] = frame_name(frame);
  header["rate_hz"] = 100;
  out << header.dump() << "\n";
  for (const auto& traj : trajectories) {
    for (const auto& step : traj.steps) {
      ordered_json rec;
      rec["traj"] = traj.id;
      rec["t"] = step.t;
      const StateVec sv = step.state.flatten();
      const ActionVec av = step.action.flatten();
      rec["state"] = std::vector<double>(sv.data(), sv.data() + kStateDim);
      rec["action"] = std::vector<double>(av.data(), av.data() + kActionDim);
      rec["success"] = traj.success;
      rec["radius"] = traj.object_radius;
      out << rec.dump() << "\n";
    }
  }
  if (!out) throw ValidationError("write failed: " + path);
}

std::pair<std::vector<Trajectory>, Frame> load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing header record", 1);
  ++line_no;

  Frame frame = Frame::Robot;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("version").get<int>() != 1) {
      throw ValidationError("unsupported trajectory file version");
    }
    frame = frame_from_name(header.at("frame").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad header: ") + e.what(), line_no);
  }

  // id -> position in `order`; steps grouped by first appearance
  std::vector<Trajectory> order;
  std::map<std::string, std::size_t> index_of;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    }
    try {
      const std::string id = rec.at("traj").get<std::string>();
      const auto& jstate = rec.at("state");
      const auto& jaction = rec.at("action");
      if (!jstate.is_array() || jstate.size() != kStateDim ||
          !jaction.is_array() || jaction.size() != kActionDim) {
        throw ParseError("state/action length mismatch", line_no);
      }
      StateVec sv;
      for (int i = 0; i < kStateDim; ++i) {
        if (!jstate[i].is_number()) throw ValidationError("non-numeric state entry");
        sv[i] = jstate[i].get<double>();
      }
      ActionVec av;
      for (int i = 0; i < kActionDim; ++i) {
        if (!jaction[i].is_number()) throw ValidationError("non-numeric action entry");
        av[i] = jaction[i].get<double>();
      }
      const double qnorm = std::sqrt(sv[3] * sv[3] + sv[4] * sv[4] + sv[5] * sv[5] + sv[6] * sv[6]);
      if (std::abs(qnorm - 1.0) > 1e-6) {
        throw ValidationError("state quaternion is not unit norm");
      }

      Step step;
      step.t = rec.at("t").get<double>();
      step.state = State::unflatten(sv, frame);
      step.action = Action::unflatten(av, frame);
      validate_step(step, line_no);

      auto it = index_of.find(id);
      if (it == index_of.end()) {
        it = index_of.emplace(id, order.size()).first;
        Trajectory traj;
        traj.id = id;
        traj.success = rec.at("success").get<bool>();
        traj.object_radius = rec.at("radius").get<double>();
        order.push_back(std::move(traj));
      }
      Trajectory& traj = order[it->second];
      if (!traj.steps.empty() && step.t <= traj.steps.back().t) {
        throw ValidationError("timestamps not strictly increasing in trajectory \"" + id +
                              "\" (line " + std::to_string(line_no) + ")");
      }
      traj.steps.push_back(std::move(step));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    }
  }
  return {std::move(order), frame};
}

void save_demos(const DemoSet& demos, const std::string& path) {
  save_trajectories(demos.trajectories, demos.frame, path);
}

DemoSet load_demos(const std::string& path) {
  auto [trajectories, frame] = load_trajectories(path);
  auto set = make_demo_set(std::move(trajectories));
  set.frame = set.trajectories.empty() ? frame : set.frame;
  if (set.frame != frame) throw ValidationError("frame tag mismatch in " + path);
  return set;
}

}  // namespace chopil
