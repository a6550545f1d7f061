#include "chopil/bc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <stdexcept>

#include "chopil/errors.hpp"
#include "chopil/rng.hpp"

namespace chopil {

namespace {
constexpr int kArch[] = {11, 64, 32, 8};
constexpr int kLayers = 3;
constexpr double kDivergenceLimit = 1e6;
}  // namespace

void LossWeights::validate() const {
  if (w_pos < 0.0 || w_rot < 0.0 || w_open < 0.0 || (w_pos == 0.0 && w_rot == 0.0 && w_open == 0.0)) {
    throw std::invalid_argument("loss weights must be nonnegative with at least one > 0");
  }
}

Standardizer Standardizer::fit(const StateVec& mean, const StateVec& variance) {
  Standardizer s;
  s.mean = mean;
  for (int d = 0; d < kStateDim; ++d) {
    const double sd = std::sqrt(std::max(variance[d], 0.0));
    s.scale[d] = sd > 1e-9 ? sd : 1.0;
  }
  return s;
}

StateVec Standardizer::apply(const StateVec& x) const {
  return (x - mean).cwiseQuotient(scale);
}

BCNetwork::BCNetwork(std::vector<Layer> layers, Standardizer standardizer, Frame frame,
                     LossWeights weights, std::uint64_t seed)
    : layers_(std::move(layers)),
      standardizer_(standardizer),
      frame_(frame),
      weights_(weights),
      seed_(seed) {}

std::size_t BCNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

ActionVec BCNetwork::forward(const StateVec& x_std) const {
  if (!x_std.allFinite()) throw std::invalid_argument("forward: non-finite input");
  Eigen::VectorXd a = x_std;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::VectorXd z = layers_[i].W * a + layers_[i].b;
    if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return ActionVec(a);
}

Eigen::MatrixXd BCNetwork::forward_batch(const Eigen::MatrixXd& x_std) const {
  Eigen::MatrixXd a = x_std;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::MatrixXd z = (layers_[i].W * a).colwise() + layers_[i].b;
    if (i + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Action BCNetwork::predict(const State& state) const {
  if (state.frame != frame_) {
    throw ValidationError("state frame does not match network frame");
  }
  const ActionVec raw = forward(standardizer_.apply(state.flatten()));
  ActionVec fixed = raw;
  const Quat q = normalized_canonical(Quat(raw[3], raw[4], raw[5], raw[6]));
  fixed[3] = q.w();
  fixed[4] = q.x();
  fixed[5] = q.y();
  fixed[6] = q.z();
  fixed[7] = std::clamp(raw[7], 0.0, kOpeningMax);
  return Action::unflatten(fixed, frame_);
}

double composite_loss(const ActionVec& pred, const ActionVec& target, const LossWeights& w) {
  const double pos =
      ((pred.head<3>() - target.head<3>()).squaredNorm()) / 3.0;
  const Eigen::Vector4d r = pred.segment<4>(3);
  const Eigen::Vector4d q = target.segment<4>(3);
  const double rn = r.norm();
  if (rn < 1e-8) throw std::domain_error("composite_loss: degenerate predicted quaternion");
  const double s = r.dot(q) / rn;
  const double open = pred[7] - target[7];
  return w.w_pos * pos + w.w_rot * (1.0 - s * s) + w.w_open * open * open;
}

ActionVec composite_loss_grad(const ActionVec& pred, const ActionVec& target,
                              const LossWeights& w) {
  ActionVec g = ActionVec::Zero();
  g.head<3>() = w.w_pos * 2.0 / 3.0 * (pred.head<3>() - target.head<3>());
  const Eigen::Vector4d r = pred.segment<4>(3);
  const Eigen::Vector4d q = target.segment<4>(3);
  const double rn = r.norm();
  if (rn < 1e-8) throw std::domain_error("composite_loss_grad: degenerate predicted quaternion");
  const Eigen::Vector4d u = r / rn;
  const double s = u.dot(q);
  g.segment<4>(3) = -w.w_rot * 2.0 * s * (q - u * s) / rn;
  g[7] = w.w_open * 2.0 * (pred[7] - target[7]);
  return g;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
  if (sample_stride < 1) throw std::invalid_argument("sample_stride must be >= 1");
  loss_weights.validate();
  if (noise) noise->validate();
}

namespace {

std::vector<BCNetwork::Layer> init_layers(Rng& rng) {
  std::vector<BCNetwork::Layer> layers(kLayers);
  for (int l = 0; l < kLayers; ++l) {
    const int fan_in = kArch[l];
    const int fan_out = kArch[l + 1];
    layers[l].W.resize(fan_out, fan_in);
    const double std = std::sqrt(2.0 / fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layers[l].W(r, c) = rng.normal(0.0, std);
    }
    layers[l].b = Eigen::VectorXd::Zero(fan_out);
  }
  return layers;
}

}  // namespace

TrainResult train_bc(const DemoSet& demos, const TrainConfig& cfg) {
  cfg.validate();
  auto all_pairs = demos.pairs();
  std::vector<std::pair<StateVec, ActionVec>> pairs;
  for (std::size_t i = 0; i < all_pairs.size(); i += static_cast<std::size_t>(cfg.sample_stride)) {
    pairs.push_back(all_pairs[i]);
  }
  if (pairs.empty()) throw InsufficientDataError("train_bc: no training pairs");

  const Standardizer standardizer = Standardizer::fit(demos.mean, demos.variance);

  // Per-dimension action statistics. The output layer is trained in units of
  // act_scale around act_mean and folded back afterwards: raw targets mix
  // meters (~1e-2 spread) with unit quaternion components, which otherwise
  // leaves the position dims underpowered at any single learning rate.
  ActionVec act_mean = ActionVec::Zero();
  for (const auto& p : pairs) act_mean += p.second;
  act_mean /= static_cast<double>(pairs.size());
  ActionVec act_var = ActionVec::Zero();
  for (const auto& p : pairs) {
    const ActionVec d = p.second - act_mean;
    act_var += d.cwiseProduct(d);
  }
  act_var /= static_cast<double>(pairs.size());
  ActionVec act_scale;
  for (int d = 0; d < kActionDim; ++d) {
    act_scale[d] = std::max(std::sqrt(act_var[d]), 1e-3);
  }

  Rng rng(seed_mix(cfg.seed, 0x6263u));  // init + shuffle stream
  auto layers = init_layers(rng);

  std::vector<Eigen::MatrixXd> vel_w(kLayers);
  std::vector<Eigen::VectorXd> vel_b(kLayers);
  for (int l = 0; l < kLayers; ++l) {
    vel_w[l] = Eigen::MatrixXd::Zero(layers[l].W.rows(), layers[l].W.cols());
    vel_b[l] = Eigen::VectorXd::Zero(layers[l].b.size());
  }

  const std::size_t n = pairs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> trace;
  trace.reserve(cfg.epochs);

  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::pair<StateVec, ActionVec>> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < n; start += bs, ++n_batches) {
      const std::size_t b = std::min(bs, n - start);
      batch.clear();
      for (std::size_t i = 0; i < b; ++i) batch.push_back(pairs[order[start + i]]);

      if (cfg.noise && cfg.noise->eta > 0.0 && cfg.noise->fraction > 0.0) {
        Rng noise_rng(seed_mix(cfg.noise->seed, static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(n_batches)));
        inject_noise_inplace(batch, *cfg.noise, demos.variance, noise_rng);
      }

      Eigen::MatrixXd x(kStateDim, b);
      Eigen::MatrixXd y(kActionDim, b);
      for (std::size_t i = 0; i < b; ++i) {
        x.col(i) = standardizer.apply(batch[i].first);
        y.col(i) = batch[i].second;
      }

      // forward with cached activations; the output layer lives in scaled
      // units, predictions are mapped back before the loss
      Eigen::MatrixXd a0 = x;
      Eigen::MatrixXd z1 = (layers[0].W * a0).colwise() + layers[0].b;
      Eigen::MatrixXd a1 = z1.cwiseMax(0.0);
      Eigen::MatrixXd z2 = (layers[1].W * a1).colwise() + layers[1].b;
      Eigen::MatrixXd a2 = z2.cwiseMax(0.0);
      Eigen::MatrixXd z3 = (layers[2].W * a2).colwise() + layers[2].b;
      Eigen::MatrixXd pred = (act_scale.asDiagonal() * z3).colwise() + act_mean;

      double batch_loss = 0.0;
      Eigen::MatrixXd dpred(kActionDim, b);
      for (std::size_t i = 0; i < b; ++i) {
        const ActionVec p = pred.col(i);
        const ActionVec t = y.col(i);
        batch_loss += composite_loss(p, t, cfg.loss_weights);
        dpred.col(i) = composite_loss_grad(p, t, cfg.loss_weights);
      }
      const double inv_b = 1.0 / static_cast<double>(b);
      batch_loss *= inv_b;
      dpred *= inv_b;
      epoch_loss += batch_loss;

      Eigen::MatrixXd dz3 = act_scale.asDiagonal() * dpred;
      Eigen::MatrixXd gw2 = dz3 * a2.transpose();
      Eigen::VectorXd gb2 = dz3.rowwise().sum();
      Eigen::MatrixXd da2 = layers[2].W.transpose() * dz3;
      Eigen::MatrixXd dz2 = (z2.array() > 0.0).select(da2, 0.0);
      Eigen::MatrixXd gw1 = dz2 * a1.transpose();
      Eigen::VectorXd gb1 = dz2.rowwise().sum();
      Eigen::MatrixXd da1 = layers[1].W.transpose() * dz2;
      Eigen::MatrixXd dz1 = (z1.array() > 0.0).select(da1, 0.0);
      Eigen::MatrixXd gw0 = dz1 * a0.transpose();
      Eigen::VectorXd gb0 = dz1.rowwise().sum();

      const double lr = cfg.learning_rate;
      const double mom = cfg.momentum;
      vel_w[2] = mom * vel_w[2] - lr * gw2;
      vel_b[2] = mom * vel_b[2] - lr * gb2;
      vel_w[1] = mom * vel_w[1] - lr * gw1;
      vel_b[1] = mom * vel_b[1] - lr * gb1;
      vel_w[0] = mom * vel_w[0] - lr * gw0;
      vel_b[0] = mom * vel_b[0] - lr * gb0;
      layers[2].W += vel_w[2];
      layers[2].b += vel_b[2];
      layers[1].W += vel_w[1];
      layers[1].b += vel_b[1];
      layers[0].W += vel_w[0];
      layers[0].b += vel_b[0];
    }
    epoch_loss /= static_cast<double>(n_batches);
    trace.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss) || epoch_loss > kDivergenceLimit) {
      throw TrainingFailure("training diverged at epoch " + std::to_string(epoch) +
                                " (loss " + std::to_string(epoch_loss) + ")",
                            trace);
    }
  }

  // fold the output reparametrization into plain dense weights
  layers[2].W = act_scale.asDiagonal() * layers[2].W;
  layers[2].b = act_scale.cwiseProduct(layers[2].b) + act_mean;

  TrainResult result{BCNetwork(std::move(layers), standardizer, demos.frame,
                               cfg.loss_weights, cfg.seed),
                     std::move(trace)};
  return result;
}

namespace {

struct FlatParam {
  int layer;
  bool is_bias;
  int row;
  int col;
};

std::vector<FlatParam> enumerate_params(const BCNetwork& net) {
  std::vector<FlatParam> params;
  for (int l = 0; l < static_cast<int>(net.layers().size()); ++l) {
    const auto& layer = net.layers()[l];
    for (int r = 0; r < layer.W.rows(); ++r)
      for (int c = 0; c < layer.W.cols(); ++c) params.push_back({l, false, r, c});
    for (int r = 0; r < layer.b.size(); ++r) params.push_back({l, true, r, 0});
  }
  return params;
}

double& param_ref(BCNetwork& net, const FlatParam& p) {
  auto& layer = net.layers()[static_cast<std::size_t>(p.layer)];
  return p.is_bias ? layer.b(p.row) : layer.W(p.row, p.col);
}

// activation sign pattern of the hidden layers for a given input
std::vector<bool> relu_pattern(const BCNetwork& net, const StateVec& x) {
  std::vector<bool> pattern;
  Eigen::VectorXd a = x;
  for (std::size_t i = 0; i + 1 < net.layers().size(); ++i) {
    Eigen::VectorXd z = net.layers()[i].W * a + net.layers()[i].b;
    for (int r = 0; r < z.size(); ++r) pattern.push_back(z[r] > 0.0);
    a = z.cwiseMax(0.0);
  }
  return pattern;
}

// analytic gradient of composite loss wrt every parameter, single sample
std::vector<double> analytic_grads(const BCNetwork& net, const StateVec& x,
                                   const ActionVec& target, const LossWeights& w) {
  const auto& L = net.layers();
  Eigen::VectorXd a0 = x;
  Eigen::VectorXd z1 = L[0].W * a0 + L[0].b;
  Eigen::VectorXd a1 = z1.cwiseMax(0.0);
  Eigen::VectorXd z2 = L[1].W * a1 + L[1].b;
  Eigen::VectorXd a2 = z2.cwiseMax(0.0);
  ActionVec pred = L[2].W * a2 + L[2].b;

  Eigen::VectorXd dpred = composite_loss_grad(pred, target, w);
  Eigen::MatrixXd gw2 = dpred * a2.transpose();
  Eigen::VectorXd gb2 = dpred;
  Eigen::VectorXd dz2 = (z2.array() > 0.0).select(L[2].W.transpose() * dpred, 0.0);
  Eigen::MatrixXd gw1 = dz2 * a1.transpose();
  Eigen::VectorXd gb1 = dz2;
  Eigen::VectorXd dz1 = (z1.array() > 0.0).select(L[1].W.transpose() * dz2, 0.0);
  Eigen::MatrixXd gw0 = dz1 * a0.transpose();
  Eigen::VectorXd gb0 = dz1;

  std::vector<double> grads;
  const Eigen::MatrixXd* gw[] = {&gw0, &gw1, &gw2};
  const Eigen::VectorXd* gb[] = {&gb0, &gb1, &gb2};
  for (int l = 0; l < kLayers; ++l) {
    for (int r = 0; r < gw[l]->rows(); ++r)
      for (int c = 0; c < gw[l]->cols(); ++c) grads.push_back((*gw[l])(r, c));
    for (int r = 0; r < gb[l]->size(); ++r) grads.push_back((*gb[l])(r));
  }
  return grads;
}

}  // namespace

double grad_check(const BCNetwork& net, const StateVec& x_std, const ActionVec& target,
                  const LossWeights& w, int n_params, std::uint64_t seed) {
  const double h = 1e-5;
  const auto params = enumerate_params(net);
  const auto grads = analytic_grads(net, x_std, target, w);
  const auto base_pattern = relu_pattern(net, x_std);

  std::vector<std::size_t> picks(params.size());
  std::iota(picks.begin(), picks.end(), 0);
  Rng rng(seed);
  for (std::size_t i = picks.size(); i > 1; --i) {
    std::swap(picks[i - 1], picks[rng.uniform_index(i)]);
  }
  const std::size_t n_check = std::min<std::size_t>(static_cast<std::size_t>(n_params), picks.size());

  BCNetwork probe = net;
  double max_err = 0.0;
  for (std::size_t i = 0; i < n_check; ++i) {
    const FlatParam& p = params[picks[i]];
    double& v = param_ref(probe, p);
    const double saved = v;
    v = saved + h;
    const bool plus_ok = relu_pattern(probe, x_std) == base_pattern;
    const double fp = composite_loss(probe.forward(x_std), target, w);
    v = saved - h;
    const bool minus_ok = relu_pattern(probe, x_std) == base_pattern;
    const double fm = composite_loss(probe.forward(x_std), target, w);
    v = saved;
    if (!plus_ok || !minus_ok) continue;  // kink crossed; excluded
    const double gn = (fp - fm) / (2.0 * h);
    const double ga = grads[picks[i]];
    const double err = std::abs(ga - gn) / std::max({1.0, std::abs(ga), std::abs(gn)});
    max_err = std::max(max_err, err);
  }
  return max_err;
}

void save_bc(const BCNetwork& net, const std::string& path) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["type"] = "bc";
  j["arch"] = std::vector<int>(std::begin(kArch), std::end(kArch));
  j["frame"] = frame_name(net.frame());
  j["seed"] = net.seed();
  j["loss_weights"] = {{"w_pos", net.loss_weights().w_pos},
                       {"w_rot", net.loss_weights().w_rot},
                       {"w_open", net.loss_weights().w_open}};
  const auto& s = net.standardizer();
  j["standardizer"] = {
      {"mean", std::vector<double>(s.mean.data(), s.mean.data() + kStateDim)},
      {"scale", std::vector<double>(s.scale.data(), s.scale.data() + kStateDim)}};
  auto& jl = j["layers"] = nlohmann::ordered_json::array();
  for (const auto& layer : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.W.size()));
    // row-major
    for (int r = 0; r < layer.W.rows(); ++r)
      for (int c = 0; c < layer.W.cols(); ++c) w.push_back(layer.W(r, c));
    jl.push_back({{"w", w},
                  {"b", std::vector<double>(layer.b.data(), layer.b.data() + layer.b.size())}});
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

BCNetwork load_bc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad model file " + path + ": " + e.what());
  }
  try {
    if (j.at("type").get<std::string>() != "bc" || j.at("version").get<int>() != 1) {
      throw ValidationError("not a version-1 bc model: " + path);
    }
    const auto arch = j.at("arch").get<std::vector<int>>();
    if (arch != std::vector<int>(std::begin(kArch), std::end(kArch))) {
      throw ValidationError("unsupported architecture in " + path);
    }
    Standardizer s;
    const auto mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    const auto scale = j.at("standardizer").at("scale").get<std::vector<double>>();
    if (mean.size() != kStateDim || scale.size() != kStateDim) {
      throw ValidationError("bad standardizer in " + path);
    }
    for (int d = 0; d < kStateDim; ++d) {
      s.mean[d] = mean[static_cast<std::size_t>(d)];
      s.scale[d] = scale[static_cast<std::size_t>(d)];
    }
    LossWeights w{j.at("loss_weights").at("w_pos").get<double>(),
                  j.at("loss_weights").at("w_rot").get<double>(),
                  j.at("loss_weights").at("w_open").get<double>()};
    std::vector<BCNetwork::Layer> layers(kLayers);
    const auto& jl = j.at("layers");
    if (jl.size() != kLayers) throw ValidationError("bad layer count in " + path);
    for (int l = 0; l < kLayers; ++l) {
      const auto wv = jl[static_cast<std::size_t>(l)].at("w").get<std::vector<double>>();
      const auto bv = jl[static_cast<std::size_t>(l)].at("b").get<std::vector<double>>();
      const int rows = kArch[l + 1];
      const int cols = kArch[l];
      if (wv.size() != static_cast<std::size_t>(rows * cols) ||
          bv.size() != static_cast<std::size_t>(rows)) {
        throw ValidationError("bad layer shape in " + path);
      }
      layers[l].W.resize(rows, cols);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          layers[l].W(r, c) = wv[static_cast<std::size_t>(r * cols + c)];
      layers[l].b = Eigen::Map<const Eigen::VectorXd>(bv.data(), rows);
    }
    return BCNetwork(std::move(layers), s, frame_from_name(j.at("frame").get<std::string>()),
                     w, j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad model file " + path + ": " + e.what());
  }
}

}  // namespace chopil
