#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "lic/lidar_frontend.hpp"
#include "lic/propagation.hpp"

namespace lic {

struct ImuRecord {
  double t = 0.0;
  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
};

struct LidarRecord {
  double t = 0.0;  // LiDAR clock
  std::vector<std::vector<Eigen::Vector3d>> rings;
};

struct CamRecord {
  double t = 0.0;  // camera clock
  struct Obs {
    std::uint64_t id = 0;
    double u = 0.0, v = 0.0;
  };
  std::vector<Obs> tracks;
};

using SensorRecord = std::variant<ImuRecord, LidarRecord, CamRecord>;

double record_time(const SensorRecord &rec);

struct LogParseError : std::runtime_error {
  LogParseError(int line, const std::string &what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line(line) {}
  int line;
};

// JSON-lines sensor log; one record per line with canonical (alphabetical)
// keys. Validates per-type monotonic timestamps and finite numbers.
std::vector<SensorRecord> read_sensor_log(const std::string &path);
void write_sensor_log(const std::string &path, const std::vector<SensorRecord> &records);

struct TruthSample {
  double t = 0.0;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  Eigen::Vector4d q = Eigen::Vector4d(0, 0, 0, 1);  // q_IfromG
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
};

std::vector<TruthSample> read_truth_csv(const std::string &path);
void write_truth_csv(const std::string &path, const std::vector<TruthSample> &truth);

// Linear position/velocity, rotation-vector orientation interpolation.
TruthSample interpolate_truth(const std::vector<TruthSample> &truth, double t);

}  // namespace lic
