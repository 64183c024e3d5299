#include "lic/state.hpp"

#include <stdexcept>
#include <string>

namespace lic {

namespace {

void apply_rotation_delta(Eigen::Vector4d &q, const Eigen::Vector3d &dtheta) {
  q = quat_multiply(quat_from_rotvec(dtheta), q);
}

}  // namespace

FullState boxplus(const FullState &state, const Eigen::VectorXd &delta) {
  const StateIndexMap map = state.index_map();
  if (delta.size() != map.dim()) {
    throw std::invalid_argument("boxplus: delta has dimension " + std::to_string(delta.size()) +
                                ", state error dimension is " + std::to_string(map.dim()));
  }
  FullState out = state;
  apply_rotation_delta(out.imu.orientation, delta.segment<3>(StateIndexMap::kImuTheta));
  out.imu.gyro_bias += delta.segment<3>(StateIndexMap::kImuGyroBias);
  out.imu.velocity += delta.segment<3>(StateIndexMap::kImuVelocity);
  out.imu.accel_bias += delta.segment<3>(StateIndexMap::kImuAccelBias);
  out.imu.position += delta.segment<3>(StateIndexMap::kImuPosition);

  apply_rotation_delta(out.cam_calib.rotation, delta.segment<3>(StateIndexMap::kCamCalibTheta));
  out.cam_calib.translation += delta.segment<3>(StateIndexMap::kCamCalibPosition);
  out.cam_calib.time_offset += delta(StateIndexMap::kCamCalibTimeOffset);

  apply_rotation_delta(out.lidar_calib.rotation, delta.segment<3>(StateIndexMap::kLidarCalibTheta));
  out.lidar_calib.translation += delta.segment<3>(StateIndexMap::kLidarCalibPosition);
  out.lidar_calib.time_offset += delta(StateIndexMap::kLidarCalibTimeOffset);

  for (int i = 0; i < map.cam_clones; ++i) {
    const int off = map.cam_clone(i);
    apply_rotation_delta(out.cam_clones[i].orientation, delta.segment<3>(off));
    out.cam_clones[i].position += delta.segment<3>(off + 3);
  }
  for (int i = 0; i < map.lidar_clones; ++i) {
    const int off = map.lidar_clone(i);
    apply_rotation_delta(out.lidar_clones[i].orientation, delta.segment<3>(off));
    out.lidar_clones[i].position += delta.segment<3>(off + 3);
  }
  return out;
}

Eigen::MatrixXd remove_rows_cols(const Eigen::MatrixXd &m, int start, int count) {
  const int n = static_cast<int>(m.rows());
  const int rest = n - start - count;
  Eigen::MatrixXd out(n - count, n - count);
  out.topLeftCorner(start, start) = m.topLeftCorner(start, start);
  out.topRightCorner(start, rest) = m.topRightCorner(start, rest);
  out.bottomLeftCorner(rest, start) = m.bottomLeftCorner(rest, start);
  out.bottomRightCorner(rest, rest) = m.bottomRightCorner(rest, rest);
  return out;
}

FullState marginalize_clone(const FullState &state, SensorKind kind, int index) {
  const StateIndexMap map = state.index_map();
  const int count = kind == SensorKind::Camera ? map.cam_clones : map.lidar_clones;
  if (index < 0 || index >= count) {
    throw std::out_of_range("marginalize_clone: index " + std::to_string(index) + " out of range [0, " +
                            std::to_string(count) + ")");
  }
  FullState out = state;
  const int offset = map.clone(kind, index);
  out.clones(kind).erase(out.clones(kind).begin() + index);
  out.cov = remove_rows_cols(state.cov, offset, ClonePose::kErrorDim);
  return out;
}

void symmetrize_covariance(Eigen::MatrixXd &cov) {
  cov = 0.5 * (cov + cov.transpose()).eval();
}

}  // namespace lic
