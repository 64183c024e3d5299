#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>

#include "lic/propagation.hpp"
#include "lic/state.hpp"

// Randomized-state builders and central-difference helpers shared by the
// selftest verb and the test suites.

namespace lic::testing {

inline Eigen::Vector3d random_vec3(std::mt19937_64 &rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  return Eigen::Vector3d(g(rng), g(rng), g(rng));
}

inline Eigen::Vector4d random_quat(std::mt19937_64 &rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return quat_normalize(Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng)));
}

inline Eigen::MatrixXd random_spd(std::mt19937_64 &rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return scale * (a * a.transpose() + 1e-3 * static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n));
}

inline ClonePose random_clone(std::mt19937_64 &rng, double t, SensorKind kind, double pos_scale = 2.0) {
  ClonePose c;
  c.orientation = random_quat(rng);
  c.position = random_vec3(rng, pos_scale);
  c.imu_time = t;
  c.source = kind;
  return c;
}

inline FullState random_state(std::mt19937_64 &rng, int cam_clones, int lidar_clones) {
  FullState s;
  s.imu.orientation = random_quat(rng);
  s.imu.gyro_bias = random_vec3(rng, 0.01);
  s.imu.velocity = random_vec3(rng, 1.0);
  s.imu.accel_bias = random_vec3(rng, 0.05);
  s.imu.position = random_vec3(rng, 2.0);
  s.cam_calib.rotation = random_quat(rng);
  s.cam_calib.translation = random_vec3(rng, 0.1);
  s.cam_calib.time_offset = 0.002;
  s.lidar_calib.rotation = random_quat(rng);
  s.lidar_calib.translation = random_vec3(rng, 0.1);
  s.lidar_calib.time_offset = -0.004;
  for (int i = 0; i < cam_clones; ++i) s.cam_clones.push_back(random_clone(rng, i + 1.0, SensorKind::Camera));
  for (int i = 0; i < lidar_clones; ++i) s.lidar_clones.push_back(random_clone(rng, i + 1.0, SensorKind::Lidar));
  s.cov = random_spd(rng, s.error_dim(), 1e-3);
  return s;
}

// Central differences of f: R^n -> R^m around zero.
inline Eigen::MatrixXd numerical_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd &)> &f, int n,
                                          double eps) {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd f0 = f(zero);
  Eigen::MatrixXd j(f0.size(), n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd dp = zero, dm = zero;
    dp(i) = eps;
    dm(i) = -eps;
    j.col(i) = (f(dp) - f(dm)) / (2.0 * eps);
  }
  return j;
}

inline ImuState imu_boxplus(const ImuState &s, const Eigen::Matrix<double, 15, 1> &d) {
  ImuState out = s;
  out.orientation = quat_multiply(quat_from_rotvec(d.segment<3>(0)), s.orientation);
  out.gyro_bias += d.segment<3>(3);
  out.velocity += d.segment<3>(6);
  out.accel_bias += d.segment<3>(9);
  out.position += d.segment<3>(12);
  return out;
}

inline Eigen::Matrix<double, 15, 1> imu_boxminus(const ImuState &a, const ImuState &b) {
  Eigen::Matrix<double, 15, 1> d;
  d.segment<3>(0) = rotvec_from_quat(quat_multiply(a.orientation, quat_inverse(b.orientation)));
  d.segment<3>(3) = a.gyro_bias - b.gyro_bias;
  d.segment<3>(6) = a.velocity - b.velocity;
  d.segment<3>(9) = a.accel_bias - b.accel_bias;
  d.segment<3>(12) = a.position - b.position;
  return d;
}

inline double relative_error(const Eigen::MatrixXd &test, const Eigen::MatrixXd &reference) {
  const double denom = reference.norm();
  return denom > 0.0 ? (test - reference).norm() / denom : (test - reference).norm();
}

}  // namespace lic::testing
