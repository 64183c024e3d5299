#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lic/quat_ops.hpp"

namespace lic {

enum class SensorKind { Camera, Lidar };

// Inertial block: orientation is q_IfromG, velocity/position in the global
// frame, biases in the IMU frame. Error-state order within the block is
// [dtheta, dbg, dv, dba, dp] (15).
struct ImuState {
  Eigen::Vector4d orientation = quat_identity();
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  static constexpr int kErrorDim = 15;
};

// Rigid transform + clock offset of one exteroceptive sensor S relative to
// the IMU: rotation is q_SfromI, translation is p_IinS, and
// t_imu = t_sensor + time_offset. Error order [dtheta, dp, dt] (7).
struct SensorExtrinsics {
  Eigen::Vector4d rotation = quat_identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double time_offset = 0.0;
  static constexpr int kErrorDim = 7;
};

// IMU pose frozen at a corrected measurement time. Error order [dtheta, dp].
struct ClonePose {
  Eigen::Vector4d orientation = quat_identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double imu_time = 0.0;
  SensorKind source = SensorKind::Camera;
  static constexpr int kErrorDim = 6;
};

// Fixed error-state layout: IMU block, camera calib, LiDAR calib, camera
// clones (time order), LiDAR clones (time order).
struct StateIndexMap {
  int cam_clones = 0;
  int lidar_clones = 0;

  static constexpr int kImuTheta = 0;
  static constexpr int kImuGyroBias = 3;
  static constexpr int kImuVelocity = 6;
  static constexpr int kImuAccelBias = 9;
  static constexpr int kImuPosition = 12;
  static constexpr int kCamCalibTheta = 15;
  static constexpr int kCamCalibPosition = 18;
  static constexpr int kCamCalibTimeOffset = 21;
  static constexpr int kLidarCalibTheta = 22;
  static constexpr int kLidarCalibPosition = 25;
  static constexpr int kLidarCalibTimeOffset = 28;
  static constexpr int kCloneBase = 29;

  int cam_clone(int i) const { return kCloneBase + 6 * i; }
  int lidar_clone(int i) const { return kCloneBase + 6 * (cam_clones + i); }
  int clone(SensorKind kind, int i) const {
    return kind == SensorKind::Camera ? cam_clone(i) : lidar_clone(i);
  }
  int calib_theta(SensorKind kind) const {
    return kind == SensorKind::Camera ? kCamCalibTheta : kLidarCalibTheta;
  }
  int calib_position(SensorKind kind) const {
    return kind == SensorKind::Camera ? kCamCalibPosition : kLidarCalibPosition;
  }
  int calib_time_offset(SensorKind kind) const {
    return kind == SensorKind::Camera ? kCamCalibTimeOffset : kLidarCalibTimeOffset;
  }
  int dim() const { return kCloneBase + 6 * (cam_clones + lidar_clones); }
};

struct FullState {
  ImuState imu;
  SensorExtrinsics cam_calib;
  SensorExtrinsics lidar_calib;
  std::vector<ClonePose> cam_clones;
  std::vector<ClonePose> lidar_clones;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(StateIndexMap::kCloneBase, StateIndexMap::kCloneBase);

  StateIndexMap index_map() const {
    return StateIndexMap{static_cast<int>(cam_clones.size()), static_cast<int>(lidar_clones.size())};
  }
  int error_dim() const { return index_map().dim(); }

  const std::vector<ClonePose> &clones(SensorKind kind) const {
    return kind == SensorKind::Camera ? cam_clones : lidar_clones;
  }
  std::vector<ClonePose> &clones(SensorKind kind) {
    return kind == SensorKind::Camera ? cam_clones : lidar_clones;
  }
  SensorExtrinsics &calib(SensorKind kind) { return kind == SensorKind::Camera ? cam_calib : lidar_calib; }
  const SensorExtrinsics &calib(SensorKind kind) const {
    return kind == SensorKind::Camera ? cam_calib : lidar_calib;
  }
};

// Generalized update x = x_hat [+] delta: Euclidean addition on vector
// blocks, left quaternion perturbation on rotation blocks.
// Throws std::invalid_argument on dimension mismatch.
FullState boxplus(const FullState &state, const Eigen::VectorXd &delta);

// Removes a clone and deletes its covariance rows/columns. Untouched blocks
// are copied verbatim. Throws std::out_of_range for a bad index.
FullState marginalize_clone(const FullState &state, SensorKind kind, int index);

void symmetrize_covariance(Eigen::MatrixXd &cov);

// Deletes `count` rows and columns starting at `start` (clone bookkeeping).
Eigen::MatrixXd remove_rows_cols(const Eigen::MatrixXd &m, int start, int count);

}  // namespace lic
