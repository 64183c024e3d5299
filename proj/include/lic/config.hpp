#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lic/estimator.hpp"
#include "lic/io.hpp"
#include "lic/sim.hpp"

namespace lic {

struct SimConfig {
  TrajectorySpec trajectory;
  Eigen::Vector3d room_size{10.0, 10.0, 3.0};
  int landmark_count = 200;
  double imu_rate = 200.0;
  double lidar_rate = 5.0;
  double cam_rate = 10.0;
  RigTruth rig;
  RingGeometry rings = default_ring_geometry();
  CameraModel camera;
  double pixel_sigma = 1.0;
  double lidar_point_sigma = 0.02;
  double track_dropout = 0.05;
  std::uint64_t seed = 42;
  bool noise_free = false;  // zero every noise and bias
};

struct SimOutput {
  std::vector<SensorRecord> records;
  std::vector<TruthSample> truth;
};

// Default rig with non-trivial extrinsics and clock offsets; the estimator
// defaults below start at the same values (refined online).
SimConfig default_sim_config();
EstimatorConfig default_estimator_config();

SimOutput simulate(const SimConfig &config);

// JSON round trip; missing fields keep their defaults. The file carries a
// "schema" version field.
SimConfig load_sim_config(const std::string &path);
EstimatorConfig load_estimator_config(const std::string &path);
void save_sim_config(const std::string &path, const SimConfig &config);
void save_estimator_config(const std::string &path, const EstimatorConfig &config);

std::string sim_config_to_json(const SimConfig &config);
std::string estimator_config_to_json(const EstimatorConfig &config);
SimConfig sim_config_from_json(const std::string &text);
EstimatorConfig estimator_config_from_json(const std::string &text);

}  // namespace lic
