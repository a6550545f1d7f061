#include "chopil/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "chopil/errors.hpp"

namespace chopil {

Eigen::Vector2d PcaModel::project2(const StateVec& state) const {
  const StateVec z = (state - mean).cwiseQuotient(scale);
  return components.topRows(2) * z;
}

PcaModel pca_fit(const std::vector<StateVec>& states, int dims) {
  if (dims < 1 || dims > kStateDim) throw std::invalid_argument("dims must be in [1, 11]");
  const std::size_t n = states.size();
  if (n < static_cast<std::size_t>(dims) + 1) {
    throw InsufficientDataError("need at least dims+1 states");
  }

  PcaModel model;
  for (const auto& s : states) model.mean += s;
  model.mean /= static_cast<double>(n);

  StateVec var = StateVec::Zero();
  for (const auto& s : states) var += (s - model.mean).cwiseAbs2();
  var /= static_cast<double>(n);
  for (int d = 0; d < kStateDim; ++d) {
    const double sd = std::sqrt(var[d]);
    model.scale[d] = sd > 1e-9 ? sd : 1.0;
  }

  Eigen::Matrix<double, kStateDim, kStateDim> cov;
  cov.setZero();
  for (const auto& s : states) {
    const StateVec z = (s - model.mean).cwiseQuotient(model.scale);
    cov.noalias() += z * z.transpose();
  }
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kStateDim, kStateDim>> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const auto& evals = solver.eigenvalues();   // ascending
  const auto& evecs = solver.eigenvectors();

  const double tol = 1e-12 * std::max(1.0, evals[kStateDim - 1]);
  int rank = 0;
  for (int i = 0; i < kStateDim; ++i) {
    if (evals[i] > tol) ++rank;
  }
  if (rank < dims) {
    throw InsufficientDataError("state covariance has rank " + std::to_string(rank) +
                                "; at most " + std::to_string(rank) +
                                " components are achievable");
  }

  model.components.resize(dims, kStateDim);
  model.explained_variance.resize(dims);
  for (int i = 0; i < dims; ++i) {
    Eigen::VectorXd comp = evecs.col(kStateDim - 1 - i);
    int arg = 0;
    comp.cwiseAbs().maxCoeff(&arg);
    if (comp[arg] < 0.0) comp = -comp;
    model.components.row(i) = comp.transpose();
    model.explained_variance[i] = evals[kStateDim - 1 - i];
  }
  return model;
}

ShiftReport shift_metric(const DemoSet& demos, const std::vector<Trajectory>& rollouts,
                         const PcaModel& pca, const std::string& agent_name) {
  std::size_t n_roll = 0;
  for (const auto& t : rollouts) n_roll += t.steps.size();
  if (rollouts.empty() || n_roll == 0) throw std::invalid_argument("empty rollouts");
  for (const auto& t : rollouts) {
    if (!t.steps.empty() && t.frame() != demos.frame) {
      throw ValidationError("rollout frame does not match demo frame");
    }
  }
  const std::size_t n_demo = demos.total_steps();
  if (n_demo == 0) throw std::invalid_argument("empty demo set");

  Eigen::MatrixXd D(kStateDim, n_demo);
  {
    std::size_t j = 0;
    for (const auto& traj : demos.trajectories) {
      for (const auto& s : traj.steps) {
        D.col(static_cast<Eigen::Index>(j++)) =
            (s.state.flatten() - pca.mean).cwiseQuotient(pca.scale);
      }
    }
  }

  ShiftReport report;
  report.agent_name = agent_name;
  report.demo_projected.reserve(n_demo);
  for (Eigen::Index j = 0; j < D.cols(); ++j) {
    report.demo_projected.push_back(pca.components.topRows(2) * D.col(j));
  }
  report.projected_points.reserve(n_roll);

  std::vector<double> dists;
  dists.reserve(n_roll);
  std::size_t warm = 0;  // consecutive rollout states have nearby neighbors
  for (const auto& traj : rollouts) {
    for (const auto& s : traj.steps) {
      const StateVec z = (s.state.flatten() - pca.mean).cwiseQuotient(pca.scale);
      report.projected_points.push_back(pca.components.topRows(2) * z);

      double best = (z - D.col(static_cast<Eigen::Index>(warm))).squaredNorm();
      std::size_t best_id = warm;
      for (std::size_t j = 0; j < n_demo; ++j) {
        if (j == warm) continue;
        const auto col = D.col(static_cast<Eigen::Index>(j));
        double acc = 0.0;
        for (int d = 0; d < kStateDim; ++d) {
          const double diff = z[d] - col[d];
          acc += diff * diff;
          if (acc >= best) break;
        }
        if (acc < best) {
          best = acc;
          best_id = j;
        }
      }
      warm = best_id + 1 < n_demo ? best_id + 1 : best_id;
      dists.push_back(std::sqrt(best));
    }
  }

  double mean = 0.0;
  for (double d : dists) mean += d;
  report.mean_nn_distance = mean / static_cast<double>(dists.size());

  std::vector<double> sorted = dists;
  std::sort(sorted.begin(), sorted.end());
  std::size_t rank =
      static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  report.p95_nn_distance = sorted[rank - 1];
  return report;
}

void save_point_cloud_csv(const ShiftReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << "x,y,source,agent\n";
  for (const auto& p : report.demo_projected) {
    out << p.x() << ',' << p.y() << ",demo," << report.agent_name << "\n";
  }
  for (const auto& p : report.projected_points) {
    out << p.x() << ',' << p.y() << ",rollout," << report.agent_name << "\n";
  }
}

}  // namespace chopil
