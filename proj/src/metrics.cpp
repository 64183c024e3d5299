#include "lic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lic {

namespace {

// Nearest-in-time association within the tolerance; gt must be time sorted.
std::vector<std::pair<int, int>> associate(const std::vector<PoseSample> &est, const std::vector<PoseSample> &gt,
                                           double tol) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < static_cast<int>(est.size()); ++i) {
    const double t = est[i].t;
    auto it = std::lower_bound(gt.begin(), gt.end(), t,
                               [](const PoseSample &s, double v) { return s.t < v; });
    int best = -1;
    double best_dt = tol;
    if (it != gt.end() && std::abs(it->t - t) <= best_dt) {
      best = static_cast<int>(it - gt.begin());
      best_dt = std::abs(it->t - t);
    }
    if (it != gt.begin() && std::abs((it - 1)->t - t) <= best_dt) {
      best = static_cast<int>(it - 1 - gt.begin());
    }
    if (best >= 0) pairs.emplace_back(i, best);
  }
  return pairs;
}

}  // namespace

RigidTransform align_trajectories(const std::vector<PoseSample> &est, const std::vector<PoseSample> &gt,
                                  double assoc_tolerance) {
  const auto pairs = associate(est, gt, assoc_tolerance);
  if (pairs.size() < 3) {
    throw std::runtime_error("align_trajectories: need at least 3 associated pairs, have " +
                             std::to_string(pairs.size()));
  }
  Eigen::Vector3d ce = Eigen::Vector3d::Zero(), cg = Eigen::Vector3d::Zero();
  for (const auto &[i, j] : pairs) {
    ce += est[i].p;
    cg += gt[j].p;
  }
  ce /= pairs.size();
  cg /= pairs.size();
  Eigen::Matrix3d w = Eigen::Matrix3d::Zero();
  for (const auto &[i, j] : pairs) {
    w.noalias() += (gt[j].p - cg) * (est[i].p - ce).transpose();
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  RigidTransform out;
  out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  out.translation = cg - out.rotation * ce;
  return out;
}

TrajectoryMetrics compute_metrics(const std::vector<PoseSample> &est, const std::vector<PoseSample> &gt,
                                  bool align, double assoc_tolerance) {
  const auto pairs = associate(est, gt, assoc_tolerance);
  if (pairs.empty()) throw std::runtime_error("compute_metrics: no temporal overlap");
  RigidTransform tf;
  if (align) tf = align_trajectories(est, gt, assoc_tolerance);

  TrajectoryMetrics out;
  double sum_sq = 0.0;
  out.mse_per_time.reserve(pairs.size());
  for (const auto &[i, j] : pairs) {
    const double e2 = (tf.apply(est[i].p) - gt[j].p).squaredNorm();
    sum_sq += e2;
    out.mse_per_time.emplace_back(est[i].t, e2);
  }
  out.ate = std::sqrt(sum_sq / pairs.size());
  if (!est.empty()) out.start_end = (est.front().p - est.back().p).norm();
  if (!gt.empty()) out.gt_loop_closed = (gt.front().p - gt.back().p).norm() < 0.1;
  return out;
}

}  // namespace lic
