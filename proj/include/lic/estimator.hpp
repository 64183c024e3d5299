#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lic/io.hpp"
#include "lic/lidar_frontend.hpp"
#include "lic/lidar_update.hpp"
#include "lic/metrics.hpp"
#include "lic/propagation.hpp"
#include "lic/state.hpp"
#include "lic/update_engine.hpp"
#include "lic/vision_update.hpp"

namespace lic {

enum class InitMode { Static, Truth, TruthPerturbed };

struct PriorSigmas {
  double orientation = 1e-3;     // rad
  double position = 1e-5;        // m
  double velocity = 1e-2;        // m/s
  double gyro_bias = 5e-3;       // rad/s
  double accel_bias = 5e-2;      // m/s^2
  double calib_rot = 0.03491;    // rad (2 deg)
  double calib_trans = 0.05;     // m
  double calib_time = 0.01;      // s
};

struct EstimatorConfig {
  int max_cam_clones = 6;
  int max_lidar_clones = 4;
  bool use_camera = true;
  bool use_lidar = true;

  ImuNoiseParams imu_noise;
  double max_imu_gap = 0.05;

  SensorExtrinsics cam_calib;    // initial guesses, refined online
  SensorExtrinsics lidar_calib;
  Eigen::Vector3d init_gyro_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d init_accel_bias = Eigen::Vector3d::Zero();

  CameraModel camera;
  FeatureExtractionParams extraction;
  CorrespondenceParams correspondence;
  TriangulationParams triangulation;
  double lidar_point_sigma = 0.02;  // m
  double pixel_sigma = 1.0;         // px, mapped through the intrinsics

  double gating_confidence = 0.95;
  bool gate_lidar = true;
  bool gate_vision = true;
  double min_edge_distance = 1e-9;  // edge residuals below this carry no usable direction

  PriorSigmas priors;
  InitMode init_mode = InitMode::Static;
  bool perturb_calib = false;       // TruthPerturbed: also sample calib block errors
  double static_init_window = 1.0;  // s of accelerometer averaging
  double divergence_position_var = 1e4;  // abort when tr(P_pos) exceeds this
  std::uint64_t seed = 0;           // TruthPerturbed initial error sampling
};

struct CalibrationRecord {
  double t = 0.0;
  SensorExtrinsics cam;
  SensorExtrinsics lidar;
  // sqrt of the covariance diagonal over [cam rot(3), cam pos(3), cam td,
  //                                       lidar rot(3), lidar pos(3), lidar td]
  Eigen::Matrix<double, 14, 1> sigma = Eigen::Matrix<double, 14, 1>::Zero();
};

struct EstimatorOutput {
  bool ok = true;
  std::string abort_reason;
  std::vector<PoseSample> trajectory;              // IMU pose at every processed event
  std::vector<CalibrationRecord> calibration;
  std::vector<std::pair<double, double>> nees;     // (t, 6-DOF pose NEES), with truth only
  int lidar_residuals_accepted = 0;
  int lidar_residuals_rejected = 0;
  int vision_tracks_used = 0;
  int vision_tracks_rejected = 0;
  int records_dropped = 0;
  int failed_updates = 0;
  FullState state;
  double state_time = 0.0;
};

// Time-ordered processing: propagate to every corrected measurement time,
// clone, build/gate residuals, compress, update, marginalize. Deterministic
// for a fixed (config, records, truth).
EstimatorOutput run_estimator(const EstimatorConfig &config, const std::vector<SensorRecord> &records,
                              const std::vector<TruthSample> *truth = nullptr);

}  // namespace lic
