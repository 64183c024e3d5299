#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "lic/state.hpp"

namespace lic {

struct ImuSample {
  double timestamp = 0.0;                                    // IMU clock [s]
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();    // measured [rad/s]
  Eigen::Vector3d linear_acceleration = Eigen::Vector3d::Zero(); // measured [m/s^2]
};

struct ImuNoiseParams {
  double gyro_noise_density = 1.6968e-4;   // rad/s/sqrt(Hz)
  double accel_noise_density = 2.0e-3;     // m/s^2/sqrt(Hz)
  double gyro_bias_walk = 1.9393e-5;       // rad/s^2/sqrt(Hz)
  double accel_bias_walk = 3.0e-3;         // m/s^3/sqrt(Hz)
  Eigen::Vector3d gravity{0.0, 0.0, -9.81};
};

using Matrix15d = Eigen::Matrix<double, 15, 15>;

struct ImuPropagation {
  ImuState state;
  Matrix15d phi = Matrix15d::Identity();    // error-state transition over [t0, t1]
  Matrix15d noise = Matrix15d::Zero();      // accumulated discrete process noise
};

// Piecewise-linear interpolation of the measured rates at time t.
// Throws std::runtime_error if t is outside the sample span or if the
// bracketing samples are further apart than max_gap.
ImuSample interpolate_imu(std::span<const ImuSample> samples, double t, double max_gap);

// Integrates q_dot = 0.5*Omega(w)q, v_dot = R^T a + g, p_dot = v with RK4
// over piecewise-linear measurements; biases are held constant. The
// error-state transition Phi and process noise are integrated alongside the
// mean from the variational and Lyapunov equations on the 15-dim error
// [dtheta, dbg, dv, dba, dp].
ImuPropagation propagate_imu(const ImuState &imu, std::span<const ImuSample> samples, double t_start,
                             double t_target, const ImuNoiseParams &noise, double max_gap = 0.05);

// Mean-only variant (no covariance matrices), used where only the state is
// needed and in derivative checks.
ImuState propagate_mean(const ImuState &imu, std::span<const ImuSample> samples, double t_start,
                        double t_target, const ImuNoiseParams &noise, double max_gap = 0.05);

// Applies propagate_imu to the full filter state: the IMU block becomes
// Phi P Phi^T + Q, cross terms with calib/clones become Phi * P_cross, all
// other blocks and means stay untouched.
void propagate_with_covariance(FullState &state, std::span<const ImuSample> samples, const ImuNoiseParams &noise,
                               double t_start, double t_target, double max_gap = 0.05);

}  // namespace lic
