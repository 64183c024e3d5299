#include "lic/cloning.hpp"

#include <stdexcept>
#include <string>

namespace lic {

Eigen::MatrixXd clone_jacobian(const FullState &state, SensorKind sensor, const Eigen::Vector3d &omega_hat) {
  const StateIndexMap map = state.index_map();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(ClonePose::kErrorDim, map.dim());
  j.block<3, 3>(0, StateIndexMap::kImuTheta) = Eigen::Matrix3d::Identity();
  j.block<3, 3>(3, StateIndexMap::kImuPosition) = Eigen::Matrix3d::Identity();
  const int td = map.calib_time_offset(sensor);
  j.block<3, 1>(0, td) = omega_hat;
  j.block<3, 1>(3, td) = state.imu.velocity;
  return j;
}

void augment_clone(FullState &state, SensorKind sensor, const Eigen::Vector3d &omega_hat, double t_imu,
                   int max_clones) {
  auto &window = state.clones(sensor);
  if (static_cast<int>(window.size()) >= max_clones) {
    throw std::runtime_error("augment_clone: window already holds " + std::to_string(window.size()) +
                             " clones, marginalize first");
  }
  if (!window.empty() && t_imu <= window.back().imu_time) {
    throw std::invalid_argument("augment_clone: clone time must be strictly increasing within the window");
  }

  const StateIndexMap map = state.index_map();
  const int dim = map.dim();
  // Camera clones sit before LiDAR clones in the layout, so a new camera
  // clone is inserted in the middle of the matrix.
  const int pos = sensor == SensorKind::Camera ? StateIndexMap::kCloneBase + 6 * map.cam_clones : dim;

  const Eigen::MatrixXd j = clone_jacobian(state, sensor, omega_hat);
  const Eigen::MatrixXd jp = j * state.cov;           // 6 x dim
  const Eigen::MatrixXd jpjt = jp * j.transpose();    // 6 x 6

  const int rest = dim - pos;
  Eigen::MatrixXd cov(dim + 6, dim + 6);
  cov.topLeftCorner(pos, pos) = state.cov.topLeftCorner(pos, pos);
  cov.block(0, pos + 6, pos, rest) = state.cov.topRightCorner(pos, rest);
  cov.block(pos + 6, 0, rest, pos) = state.cov.bottomLeftCorner(rest, pos);
  cov.block(pos + 6, pos + 6, rest, rest) = state.cov.bottomRightCorner(rest, rest);
  cov.block(pos, 0, 6, pos) = jp.leftCols(pos);
  cov.block(pos, pos + 6, 6, rest) = jp.rightCols(rest);
  cov.block(0, pos, pos, 6) = jp.leftCols(pos).transpose();
  cov.block(pos + 6, pos, rest, 6) = jp.rightCols(rest).transpose();
  cov.block<6, 6>(pos, pos) = jpjt;

  ClonePose clone;
  clone.orientation = state.imu.orientation;
  clone.position = state.imu.position;
  clone.imu_time = t_imu;
  clone.source = sensor;
  window.push_back(clone);
  state.cov = std::move(cov);
  symmetrize_covariance(state.cov);
}

}  // namespace lic
