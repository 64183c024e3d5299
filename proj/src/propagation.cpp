#include "lic/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lic {

namespace {

// 0.5 * Omega(w) * q with Omega(w) = [-skew(w), w; -w^T, 0].
Eigen::Vector4d quat_rate(const Eigen::Vector4d &q, const Eigen::Vector3d &w) {
  Eigen::Vector4d dq;
  dq.head<3>() = 0.5 * (-w.cross(Eigen::Vector3d(q.head<3>())) + q(3) * w);
  dq(3) = -0.5 * w.dot(q.head<3>());
  return dq;
}

struct Integrand {
  Eigen::Vector4d q;
  Eigen::Vector3d v;
  Eigen::Vector3d p;
  Matrix15d phi;
  Matrix15d qn;
};

struct Derivative {
  Eigen::Vector4d dq;
  Eigen::Vector3d dv;
  Eigen::Vector3d dp;
  Matrix15d dphi;
  Matrix15d dqn;
};

Integrand advance(const Integrand &y, const Derivative &d, double h) {
  Integrand out;
  out.q = y.q + h * d.dq;
  out.v = y.v + h * d.dv;
  out.p = y.p + h * d.dp;
  out.phi = y.phi + h * d.dphi;
  out.qn = y.qn + h * d.dqn;
  return out;
}

Matrix15d error_dynamics(const Eigen::Matrix3d &r_itog_t, const Eigen::Vector3d &w_hat,
                         const Eigen::Vector3d &a_hat) {
  Matrix15d f = Matrix15d::Zero();
  f.block<3, 3>(StateIndexMap::kImuTheta, StateIndexMap::kImuTheta) = -skew(w_hat);
  f.block<3, 3>(StateIndexMap::kImuTheta, StateIndexMap::kImuGyroBias) = -Eigen::Matrix3d::Identity();
  f.block<3, 3>(StateIndexMap::kImuVelocity, StateIndexMap::kImuTheta) = -r_itog_t * skew(a_hat);
  f.block<3, 3>(StateIndexMap::kImuVelocity, StateIndexMap::kImuAccelBias) = -r_itog_t;
  f.block<3, 3>(StateIndexMap::kImuPosition, StateIndexMap::kImuVelocity) = Eigen::Matrix3d::Identity();
  return f;
}

}  // namespace

ImuSample interpolate_imu(std::span<const ImuSample> samples, double t, double max_gap) {
  if (samples.empty() || t < samples.front().timestamp - 1e-9 || t > samples.back().timestamp + 1e-9) {
    throw std::runtime_error("interpolate_imu: time " + std::to_string(t) + " outside IMU sample span");
  }
  auto it = std::lower_bound(samples.begin(), samples.end(), t,
                             [](const ImuSample &s, double v) { return s.timestamp < v; });
  if (it == samples.end()) --it;
  if (it != samples.begin() && it->timestamp > t) --it;
  const ImuSample &a = *it;
  if (std::abs(a.timestamp - t) < 1e-12 || it + 1 == samples.end()) {
    ImuSample out = a;
    out.timestamp = t;
    return out;
  }
  const ImuSample &b = *(it + 1);
  const double gap = b.timestamp - a.timestamp;
  if (gap > max_gap) {
    throw std::runtime_error("interpolate_imu: sample gap " + std::to_string(gap) + " exceeds max gap " +
                             std::to_string(max_gap));
  }
  const double alpha = (t - a.timestamp) / gap;
  ImuSample out;
  out.timestamp = t;
  out.angular_velocity = (1.0 - alpha) * a.angular_velocity + alpha * b.angular_velocity;
  out.linear_acceleration = (1.0 - alpha) * a.linear_acceleration + alpha * b.linear_acceleration;
  return out;
}

namespace {

ImuPropagation propagate_impl(const ImuState &imu, std::span<const ImuSample> samples, double t_start,
                              double t_target, const ImuNoiseParams &noise, double max_gap, bool with_matrices) {
  if (t_target < t_start - 1e-12) {
    throw std::runtime_error("propagate_imu: target time precedes start time");
  }
  if (samples.empty() || samples.front().timestamp > t_start + 1e-9 ||
      samples.back().timestamp < t_target - 1e-9) {
    throw std::runtime_error("propagate_imu: samples do not bracket the propagation span");
  }

  // Integration knots: t_start, interior sample times, t_target.
  std::vector<double> knots;
  knots.push_back(t_start);
  for (const ImuSample &s : samples) {
    if (s.timestamp > t_start + 1e-12 && s.timestamp < t_target - 1e-12) knots.push_back(s.timestamp);
  }
  knots.push_back(t_target);

  Matrix15d qc_diag = Matrix15d::Zero();
  qc_diag.block<3, 3>(0, 0) = std::pow(noise.gyro_noise_density, 2) * Eigen::Matrix3d::Identity();
  qc_diag.block<3, 3>(3, 3) = std::pow(noise.gyro_bias_walk, 2) * Eigen::Matrix3d::Identity();
  qc_diag.block<3, 3>(6, 6) = std::pow(noise.accel_noise_density, 2) * Eigen::Matrix3d::Identity();
  qc_diag.block<3, 3>(9, 9) = std::pow(noise.accel_bias_walk, 2) * Eigen::Matrix3d::Identity();

  Integrand y{imu.orientation, imu.velocity, imu.position, Matrix15d::Identity(), Matrix15d::Zero()};

  // Stage values are used unnormalized so the integrator is exactly RK4 on
  // a smooth vector field; the flow of q_dot = 0.5*Omega(w)q preserves the
  // norm, and the state is renormalized once per step.
  auto eval = [&](double t, const Integrand &s) {
    const ImuSample m = interpolate_imu(samples, t, max_gap);
    const Eigen::Vector3d w_hat = m.angular_velocity - imu.gyro_bias;
    const Eigen::Vector3d a_hat = m.linear_acceleration - imu.accel_bias;
    const Eigen::Matrix3d r = quat_to_rot(s.q);
    Derivative d;
    d.dq = quat_rate(s.q, w_hat);
    d.dv = r.transpose() * a_hat + noise.gravity;
    d.dp = s.v;
    if (with_matrices) {
      const Matrix15d f = error_dynamics(r.transpose(), w_hat, a_hat);
      d.dphi = f * s.phi;
      d.dqn = f * s.qn + s.qn * f.transpose() + qc_diag;
    } else {
      d.dphi.setZero();
      d.dqn.setZero();
    }
    return d;
  };

  for (size_t i = 0; i + 1 < knots.size(); ++i) {
    const double ta = knots[i], tb = knots[i + 1];
    const double span = tb - ta;
    if (span <= 0.0) continue;
    const int substeps = std::max(1, static_cast<int>(std::ceil(span / 0.01)));
    const double h = span / substeps;
    for (int k = 0; k < substeps; ++k) {
      const double t0 = ta + k * h;
      const Derivative k1 = eval(t0, y);
      const Derivative k2 = eval(t0 + 0.5 * h, advance(y, k1, 0.5 * h));
      const Derivative k3 = eval(t0 + 0.5 * h, advance(y, k2, 0.5 * h));
      const Derivative k4 = eval(t0 + h, advance(y, k3, h));
      y.q += h / 6.0 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
      y.v += h / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
      y.p += h / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
      if (with_matrices) {
        y.phi += h / 6.0 * (k1.dphi + 2.0 * k2.dphi + 2.0 * k3.dphi + k4.dphi);
        y.qn += h / 6.0 * (k1.dqn + 2.0 * k2.dqn + 2.0 * k3.dqn + k4.dqn);
        y.qn = 0.5 * (y.qn + y.qn.transpose()).eval();
      }
      y.q = quat_normalize(y.q);
    }
  }

  ImuPropagation out;
  out.state = imu;
  out.state.orientation = y.q;
  out.state.velocity = y.v;
  out.state.position = y.p;
  out.phi = y.phi;
  out.noise = y.qn;
  return out;
}

}  // namespace

ImuPropagation propagate_imu(const ImuState &imu, std::span<const ImuSample> samples, double t_start,
                             double t_target, const ImuNoiseParams &noise, double max_gap) {
  return propagate_impl(imu, samples, t_start, t_target, noise, max_gap, true);
}

ImuState propagate_mean(const ImuState &imu, std::span<const ImuSample> samples, double t_start,
                        double t_target, const ImuNoiseParams &noise, double max_gap) {
  return propagate_impl(imu, samples, t_start, t_target, noise, max_gap, false).state;
}

void propagate_with_covariance(FullState &state, std::span<const ImuSample> samples, const ImuNoiseParams &noise,
                               double t_start, double t_target, double max_gap) {
  const ImuPropagation prop = propagate_imu(state.imu, samples, t_start, t_target, noise, max_gap);
  state.imu = prop.state;
  const int d = state.error_dim();
  const int rest = d - ImuState::kErrorDim;
  state.cov.topLeftCorner<15, 15>() =
      prop.phi * state.cov.topLeftCorner<15, 15>() * prop.phi.transpose() + prop.noise;
  if (rest > 0) {
    state.cov.topRightCorner(15, rest) = prop.phi * state.cov.topRightCorner(15, rest);
    state.cov.bottomLeftCorner(rest, 15) = state.cov.topRightCorner(15, rest).transpose();
  }
  symmetrize_covariance(state.cov);
}

}  // namespace lic
