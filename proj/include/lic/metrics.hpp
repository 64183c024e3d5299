#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lic/quat_ops.hpp"

namespace lic {

struct PoseSample {
  double t = 0.0;
  Eigen::Vector4d q = Eigen::Vector4d(0, 0, 0, 1);
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d apply(const Eigen::Vector3d &p) const { return rotation * p + translation; }
};

// Closed-form least-squares rigid alignment (no scale) mapping the estimate
// onto the ground truth over temporally associated pairs. Throws
// std::runtime_error with fewer than 3 pairs.
RigidTransform align_trajectories(const std::vector<PoseSample> &est, const std::vector<PoseSample> &gt,
                                  double assoc_tolerance = 0.01);

struct TrajectoryMetrics {
  double ate = 0.0;         // RMS position error after alignment [m]
  double start_end = 0.0;   // || p_first - p_last || of the estimate [m]
  bool gt_loop_closed = false;
  std::vector<std::pair<double, double>> mse_per_time;  // (t, squared error)
};

TrajectoryMetrics compute_metrics(const std::vector<PoseSample> &est, const std::vector<PoseSample> &gt,
                                  bool align = true, double assoc_tolerance = 0.01);

}  // namespace lic
