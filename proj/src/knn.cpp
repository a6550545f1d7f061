#include "chopil/knn.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "chopil/errors.hpp"

namespace chopil {

KnnFeature KnnFeature::from_poses(const std::array<Pose, kFeatureSlots>& poses, const Vec3& obj) {
  KnnFeature f;
  for (int s = 0; s < kFeatureSlots; ++s) {
    const Pose& p = poses[static_cast<std::size_t>(s)];
    const Quat q = canonicalized(p.orientation);
    f.v.segment<3>(s * 8) = p.position;
    f.v[s * 8 + 3] = q.w();
    f.v[s * 8 + 4] = q.x();
    f.v[s * 8 + 5] = q.y();
    f.v[s * 8 + 6] = q.z();
    f.v[s * 8 + 7] = p.opening;
  }
  f.v.tail<3>() = obj;
  return f;
}

KnnFeature feature_from_history(const std::vector<Pose>& poses, const Vec3& obj) {
  if (poses.empty()) throw std::invalid_argument("feature_from_history: empty history");
  const std::size_t n = poses.size();
  std::array<Pose, kFeatureSlots> slots;
  for (int s = 0; s < kFeatureSlots; ++s) {
    // slot kFeatureSlots-1 is the newest pose; missing history repeats poses[0]
    const std::ptrdiff_t idx =
        static_cast<std::ptrdiff_t>(n) - 1 - (kFeatureSlots - 1 - s);
    slots[static_cast<std::size_t>(s)] = poses[idx > 0 ? static_cast<std::size_t>(idx) : 0];
  }
  return KnnFeature::from_poses(slots, obj);
}

void DistanceWeights::validate() const {
  double total = u_obj;
  for (int s = 0; s < kFeatureSlots; ++s) {
    if (u_pos[s] < 0 || u_rot[s] < 0 || u_open[s] < 0) {
      throw std::invalid_argument("distance weights must be nonnegative");
    }
    total += u_pos[s] + u_rot[s] + u_open[s];
  }
  if (u_obj < 0) throw std::invalid_argument("distance weights must be nonnegative");
  if (total == 0.0) throw std::invalid_argument("distance weights must not all be zero");
}

double feature_distance(const KnnFeature& a, const KnnFeature& b, const DistanceWeights& w) {
  double d = w.u_obj * (a.v.tail<3>() - b.v.tail<3>()).squaredNorm();
  for (int s = 0; s < kFeatureSlots; ++s) {
    const int o = s * 8;
    d += w.u_pos[s] * (a.v.segment<3>(o) - b.v.segment<3>(o)).squaredNorm();
    const double dot = a.v.segment<4>(o + 3).dot(b.v.segment<4>(o + 3));
    const double theta = 2.0 * std::acos(std::clamp(std::abs(dot), 0.0, 1.0));
    d += w.u_rot[s] * theta * theta;
    const double dopen = a.v[o + 7] - b.v[o + 7];
    d += w.u_open[s] * dopen * dopen;
  }
  return d;
}

void KnnConfig::validate() const {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (dedup_epsilon < 0) throw std::invalid_argument("dedup_epsilon must be >= 0");
  weights.validate();
}

KnnIndex::KnnIndex(std::vector<KnnFeature> features, std::vector<ActionVec> labels, KnnConfig cfg,
                   Frame frame)
    : labels_(std::move(labels)), cfg_(cfg), frame_(frame) {
  cfg_.validate();
  if (features.size() != labels_.size()) {
    throw std::invalid_argument("feature/label count mismatch");
  }
  if (features.size() < static_cast<std::size_t>(cfg_.k)) {
    throw InsufficientDataError("index smaller than k");
  }
  feats_.resize(kFeatureDim, static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    feats_.col(static_cast<Eigen::Index>(i)) = features[i].v;
  }
}

KnnFeature KnnIndex::feature(std::size_t id) const {
  KnnFeature f;
  f.v = feats_.col(static_cast<Eigen::Index>(id));
  return f;
}

double KnnIndex::exact_distance(const KnnFeature& f, std::size_t id) const {
  const auto col = feats_.col(static_cast<Eigen::Index>(id));
  const DistanceWeights& w = cfg_.weights;
  double d = w.u_obj * (f.v.tail<3>() - col.tail<3>()).squaredNorm();
  for (int s = 0; s < kFeatureSlots; ++s) {
    const int o = s * 8;
    d += w.u_pos[s] * (f.v.segment<3>(o) - col.segment<3>(o)).squaredNorm();
    const double dot = f.v.segment<4>(o + 3).dot(col.segment<4>(o + 3));
    const double theta = 2.0 * std::acos(std::clamp(std::abs(dot), 0.0, 1.0));
    d += w.u_rot[s] * theta * theta;
    const double dopen = f.v[o + 7] - col[o + 7];
    d += w.u_open[s] * dopen * dopen;
  }
  return d;
}

namespace {

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

// ordered worst-last buffer of the current best k under (distance, id)
struct BestK {
  std::vector<Neighbor> items;
  std::size_t k;

  explicit BestK(std::size_t k_) : k(k_) { items.reserve(k_ + 1); }

  bool full() const { return items.size() == k; }
  double worst() const { return items.back().distance; }

  void offer(std::size_t id, double d) {
    const Neighbor cand{id, d};
    if (full() && !neighbor_less(cand, items.back())) return;
    auto it = std::lower_bound(items.begin(), items.end(), cand, neighbor_less);
    items.insert(it, cand);
    if (items.size() > k) items.pop_back();
  }

  bool contains(std::size_t id) const {
    return std::any_of(items.begin(), items.end(),
                       [id](const Neighbor& n) { return n.id == id; });
  }
};

}  // namespace

std::vector<Neighbor> KnnIndex::query(const KnnFeature& f,
                                      const std::vector<std::size_t>& hints) const {
  return query_k(f, cfg_.k, hints);
}

std::vector<Neighbor> KnnIndex::query_k(const KnnFeature& f, int k_arg,
                                        const std::vector<std::size_t>& hints) const {
  const std::size_t n = labels_.size();
  if (k_arg < 1) throw std::invalid_argument("k must be >= 1");
  const std::size_t k = static_cast<std::size_t>(k_arg);
  if (k > n) throw std::invalid_argument("k exceeds index size");
  const DistanceWeights& w = cfg_.weights;

  BestK best(k);
  for (std::size_t id : hints) {
    if (id < n && !best.contains(id)) best.offer(id, exact_distance(f, id));
  }

  const Eigen::Vector3d fobj = f.v.tail<3>();
  const Eigen::Vector3d fp2 = f.v.segment<3>(16);
  for (std::size_t id = 0; id < n; ++id) {
    const auto col = feats_.col(static_cast<Eigen::Index>(id));
    const bool bounded = best.full();
    // cheap bound: newest-slot position + object terms only
    double lb = w.u_obj * (fobj - col.tail<3>()).squaredNorm() +
                w.u_pos[2] * (fp2 - col.segment<3>(16)).squaredNorm();
    if (bounded && lb > best.worst()) continue;
    // full bound with the chordal rotation surrogate (2-2|dot| <= theta^2)
    double d = lb;
    double dots[kFeatureSlots];
    for (int s = 0; s < kFeatureSlots; ++s) {
      const int o = s * 8;
      if (s < 2) d += w.u_pos[s] * (f.v.segment<3>(o) - col.segment<3>(o)).squaredNorm();
      const double dopen = f.v[o + 7] - col[o + 7];
      d += w.u_open[s] * dopen * dopen;
      dots[s] = f.v.segment<4>(o + 3).dot(col.segment<4>(o + 3));
      d += w.u_rot[s] * (2.0 - 2.0 * std::min(std::abs(dots[s]), 1.0));
    }
    if (bounded && d > best.worst()) continue;
    for (int s = 0; s < kFeatureSlots; ++s) {
      const double theta = 2.0 * std::acos(std::clamp(std::abs(dots[s]), 0.0, 1.0));
      d += w.u_rot[s] * (theta * theta - (2.0 - 2.0 * std::min(std::abs(dots[s]), 1.0)));
    }
    if (best.contains(id)) continue;  // already offered via hint
    best.offer(id, d);
  }

  std::stable_sort(best.items.begin(), best.items.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  });
  return best.items;
}

Action KnnIndex::predict(const KnnFeature& f, const std::vector<std::size_t>& hints) const {
  return blend_labels(query(f, hints));
}

Action KnnIndex::blend_labels(const std::vector<Neighbor>& nbrs) const {
  if (nbrs.empty()) throw std::invalid_argument("blend_labels: empty neighbor list");
  const std::size_t k = nbrs.size();

  double wsum = 0.0;
  std::vector<double> v(k);
  for (std::size_t i = 0; i < k; ++i) {
    v[i] = 1.0 / (nbrs[i].distance + 1e-9);
    wsum += v[i];
  }
  for (auto& vi : v) vi /= wsum;

  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  double opening = 0.0;
  Eigen::Vector3d pos_min = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d pos_max = -pos_min;
  double open_min = std::numeric_limits<double>::infinity();
  double open_max = -open_min;

  const Eigen::Vector4d qref = labels_[nbrs[0].id].segment<4>(3);
  Eigen::Vector4d qsum = Eigen::Vector4d::Zero();

  for (std::size_t i = 0; i < k; ++i) {
    const ActionVec& lab = labels_[nbrs[i].id];
    pos += v[i] * lab.head<3>();
    opening += v[i] * lab[7];
    pos_min = pos_min.cwiseMin(lab.head<3>());
    pos_max = pos_max.cwiseMax(lab.head<3>());
    open_min = std::min(open_min, lab[7]);
    open_max = std::max(open_max, lab[7]);
    Eigen::Vector4d q = lab.segment<4>(3);
    if (q.dot(qref) < 0.0) q = -q;
    qsum += v[i] * q;
  }
  // convex combination up to rounding; pin the bound exactly
  pos = pos.cwiseMax(pos_min).cwiseMin(pos_max);
  opening = std::clamp(opening, open_min, open_max);

  Quat q;
  if (qsum.norm() < 1e-12) {
    q = Quat(qref[0], qref[1], qref[2], qref[3]);
  } else {
    q = Quat(qsum[0], qsum[1], qsum[2], qsum[3]);
  }
  q = normalized_canonical(q);

  ActionVec out;
  out.head<3>() = pos;
  out[3] = q.w();
  out[4] = q.x();
  out[5] = q.y();
  out[6] = q.z();
  out[7] = opening;
  return Action::unflatten(out, frame_);
}

KnnIndex build_knn(const DemoSet& demos, const KnnConfig& cfg) {
  cfg.validate();
  std::vector<KnnFeature> features;
  std::vector<ActionVec> labels;
  features.reserve(demos.total_steps());
  labels.reserve(demos.total_steps());

  for (const auto& traj : demos.trajectories) {
    std::vector<Pose> history;
    history.reserve(traj.steps.size());
    bool has_kept = false;
    KnnFeature last_kept;
    for (const auto& step : traj.steps) {
      history.push_back(step.state.pose);
      KnnFeature f = feature_from_history(history, step.state.object_position);
      if (cfg.dedup_epsilon > 0.0 && has_kept &&
          feature_distance(f, last_kept, cfg.weights) < cfg.dedup_epsilon) {
        continue;
      }
      features.push_back(f);
      labels.push_back(step.action.flatten());
      last_kept = f;
      has_kept = true;
    }
  }
  if (features.size() < static_cast<std::size_t>(cfg.k)) {
    throw InsufficientDataError("demo set yields fewer features than k");
  }
  return KnnIndex(std::move(features), std::move(labels), cfg, demos.frame);
}

void save_knn(const KnnIndex& index, const std::string& path, const std::string& demo_path) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["type"] = "knn";
  j["demos"] = demo_path;
  j["frame"] = frame_name(index.frame());
  j["k"] = index.k();
  const DistanceWeights& w = index.weights();
  j["weights"] = {{"u_pos", w.u_pos},
                  {"u_rot", w.u_rot},
                  {"u_open", w.u_open},
                  {"u_obj", w.u_obj}};
  j["dedup_epsilon"] = index.config().dedup_epsilon;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

KnnIndex load_knn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad index file " + path + ": " + e.what());
  }
  try {
    if (j.at("type").get<std::string>() != "knn" || j.at("version").get<int>() != 1) {
      throw ValidationError("not a version-1 knn index: " + path);
    }
    KnnConfig cfg;
    cfg.k = j.at("k").get<int>();
    cfg.dedup_epsilon = j.at("dedup_epsilon").get<double>();
    const auto& jw = j.at("weights");
    cfg.weights.u_pos = jw.at("u_pos").get<std::array<double, kFeatureSlots>>();
    cfg.weights.u_rot = jw.at("u_rot").get<std::array<double, kFeatureSlots>>();
    cfg.weights.u_open = jw.at("u_open").get<std::array<double, kFeatureSlots>>();
    cfg.weights.u_obj = jw.at("u_obj").get<double>();
    const Frame frame = frame_from_name(j.at("frame").get<std::string>());

    std::filesystem::path demo_path(j.at("demos").get<std::string>());
    if (demo_path.is_relative()) {
      demo_path = std::filesystem::path(path).parent_path() / demo_path;
    }
    DemoSet demos = load_demos(demo_path.string());
    if (demos.frame != frame) {
      if (frame == Frame::Object) {
        demos = to_object_frame(demos);
      } else {
        throw ValidationError("index frame is robot-centric but demos are object-centric");
      }
    }
    return build_knn(demos, cfg);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad index file " + path + ": " + e.what());
  }
}

}  // namespace chopil
