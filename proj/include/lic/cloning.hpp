#pragma once

#include <Eigen/Dense>

#include "lic/state.hpp"

namespace lic {

// Maps a sensor-clock stamp to the IMU clock: t_imu = t_sensor + offset.
inline double corrected_imu_time(double t_sensor, double offset) { return t_sensor + offset; }

// Clones the current IMU pose into the given window at t_imu and augments
// the covariance as P <- [P, P J^T; J P, J P J^T]. J carries identity blocks
// on the IMU orientation/position errors and the column [w_hat; v_hat] on
// the matching sensor's time-offset error; everything else is zero.
//
// omega_hat must be the bias-corrected angular rate at t_imu and the state
// mean must already be propagated to t_imu. Throws std::runtime_error if the
// window is at max_clones (caller marginalizes first) and
// std::invalid_argument if t_imu does not increase within the window.
void augment_clone(FullState &state, SensorKind sensor, const Eigen::Vector3d &omega_hat, double t_imu,
                   int max_clones);

// The 6 x dim clone Jacobian described above (exposed for derivative checks).
Eigen::MatrixXd clone_jacobian(const FullState &state, SensorKind sensor, const Eigen::Vector3d &omega_hat);

}  // namespace lic
