#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "lic/propagation.hpp"
#include "lic/sim.hpp"
#include "lic/testing.hpp"

using namespace lic;
using testing::imu_boxminus;
using testing::imu_boxplus;
using testing::numerical_jacobian;
using testing::random_state;
using testing::random_vec3;
using testing::relative_error;

namespace {

std::vector<ImuSample> constant_samples(const Eigen::Vector3d &w, const Eigen::Vector3d &a, double t0, double t1,
                                        double dt) {
  std::vector<ImuSample> out;
  for (double t = t0; t <= t1 + 1e-12; t += dt) out.push_back({t, w, a});
  return out;
}

ImuState trajectory_imu_state(const TrajectorySpec &spec, const RigTruth &rig, double t) {
  ImuState imu;
  const TrajectorySample s = trajectory_at(t, spec);
  imu.orientation = s.orientation;
  imu.position = s.position;
  imu.velocity = s.velocity;
  imu.gyro_bias = rig.gyro_bias;
  imu.accel_bias = rig.accel_bias;
  return imu;
}

RigTruth noiseless_rig() {
  RigTruth rig;
  rig.noise.gyro_noise_density = 0.0;
  rig.noise.accel_noise_density = 0.0;
  rig.noise.gyro_bias_walk = 0.0;
  rig.noise.accel_bias_walk = 0.0;
  return rig;
}

}  // namespace

TEST_CASE("stationary equilibrium keeps position and velocity") {
  ImuNoiseParams noise;
  ImuState imu;
  const Eigen::Vector3d a_m = -noise.gravity;  // specific force at rest, identity attitude
  const auto samples = constant_samples(Eigen::Vector3d::Zero(), a_m, 0.0, 1.0, 0.005);
  const ImuState out = propagate_mean(imu, samples, 0.0, 1.0, noise);
  CHECK(out.position.norm() < 1e-12);
  CHECK(out.velocity.norm() < 1e-12);
}

TEST_CASE("pure z rotation advances yaw by w dt") {
  ImuNoiseParams noise;
  ImuState imu;
  const double w = 0.7, dt = 1.3;
  // gyro sees the body rate, accelerometer sees -R g; R g stays vertical
  const auto samples = constant_samples(Eigen::Vector3d(0, 0, w), -noise.gravity, 0.0, 2.0, 0.005);
  const ImuState out = propagate_mean(imu, samples, 0.0, dt, noise);
  const Eigen::Vector3d phi = rotvec_from_quat(out.orientation);
  CHECK((phi - Eigen::Vector3d(0, 0, w * dt)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(out.position.norm() < 1e-9);
}

TEST_CASE("matches a 1000x finer integrator over one second") {
  const TrajectorySpec spec;
  RigTruth rig = noiseless_rig();
  rig.gyro_bias = Eigen::Vector3d(0.01, -0.005, 0.02);
  rig.accel_bias = Eigen::Vector3d(0.03, 0.01, -0.02);
  const ImuNoiseParams noise;

  const auto coarse = synthesize_imu(spec, rig, 200.0, 0);
  const ImuState start = trajectory_imu_state(spec, rig, 3.0);
  const ImuState out = propagate_mean(start, coarse, 3.0, 4.0, noise);

  // Reference: midpoint integration at 1000x smaller steps over the same
  // piecewise-linear measurement signal.
  ImuState ref = start;
  const double h = 0.005 / 1000.0;
  double t = 3.0;
  while (t < 4.0 - 1e-12) {
    const double step = std::min(h, 4.0 - t);
    const ImuSample m = interpolate_imu(coarse, t + 0.5 * step, 0.05);
    const Eigen::Vector3d w_hat = m.angular_velocity - ref.gyro_bias;
    const Eigen::Vector3d a_hat = m.linear_acceleration - ref.accel_bias;
    // attitude at the midpoint for the velocity derivative
    const Eigen::Vector4d q_mid = quat_multiply(quat_from_rotvec(w_hat * 0.5 * step), ref.orientation);
    const Eigen::Vector3d acc = quat_to_rot(q_mid).transpose() * a_hat + noise.gravity;
    ref.position += step * ref.velocity + 0.5 * step * step * acc;
    ref.velocity += step * acc;
    ref.orientation = quat_multiply(quat_from_rotvec(w_hat * step), ref.orientation);
    t += step;
  }
  CHECK((out.position - ref.position).norm() < 1e-7);
  CHECK((out.velocity - ref.velocity).norm() < 1e-6);
  CHECK(rot_angle(quat_to_rot(out.orientation) * quat_to_rot(ref.orientation).transpose()) < 1e-6);
}

TEST_CASE("transition matrix matches finite differences of the mean propagation") {
  const TrajectorySpec spec;
  RigTruth rig = noiseless_rig();
  rig.gyro_bias = Eigen::Vector3d(0.02, -0.01, 0.015);
  rig.accel_bias = Eigen::Vector3d(0.05, 0.02, -0.04);
  const ImuNoiseParams noise;
  const auto samples = synthesize_imu(spec, rig, 200.0, 0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pick(1.0, 50.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double t0 = pick(rng);
    const double t1 = t0 + 0.4;
    const ImuState start = trajectory_imu_state(spec, rig, t0);
    const ImuPropagation prop = propagate_imu(start, samples, t0, t1, noise);
    const auto f = [&](const Eigen::VectorXd &d) -> Eigen::VectorXd {
      return imu_boxminus(propagate_mean(imu_boxplus(start, d), samples, t0, t1, noise), prop.state);
    };
    const Eigen::MatrixXd fd = numerical_jacobian(f, 15, 1e-6);
    CHECK(relative_error(prop.phi, fd) < 1e-4);
  }
}

TEST_CASE("zero noise densities leave the clone blocks unchanged") {
  std::mt19937_64 rng(12);
  FullState s = random_state(rng, 2, 2);
  const Eigen::MatrixXd before = s.cov;
  ImuNoiseParams noise;
  noise.gyro_noise_density = 0.0;
  noise.accel_noise_density = 0.0;
  noise.gyro_bias_walk = 0.0;
  noise.accel_bias_walk = 0.0;
  const auto samples = constant_samples(Eigen::Vector3d(0.1, -0.2, 0.3), Eigen::Vector3d(0.5, 9.8, 0.1), 0, 1, 0.005);
  propagate_with_covariance(s, samples, noise, 0.0, 0.5);
  const int off = s.index_map().cam_clone(0);
  const int rest = s.error_dim() - off;
  CHECK((s.cov.block(off, off, rest, rest) - before.block(off, off, rest, rest)).norm() == 0.0);
}

TEST_CASE("doubling noise densities quadruples the additive process noise") {
  ImuNoiseParams noise;
  const auto samples = constant_samples(Eigen::Vector3d(0.2, 0.1, -0.3), Eigen::Vector3d(1.0, 9.0, 2.0), 0, 1, 0.005);
  ImuState imu;
  const ImuPropagation base = propagate_imu(imu, samples, 0.0, 0.8, noise);
  ImuNoiseParams doubled = noise;
  doubled.gyro_noise_density *= 2.0;
  doubled.accel_noise_density *= 2.0;
  doubled.gyro_bias_walk *= 2.0;
  doubled.accel_bias_walk *= 2.0;
  const ImuPropagation big = propagate_imu(imu, samples, 0.0, 0.8, doubled);
  CHECK(relative_error(big.noise, 4.0 * base.noise) < 1e-12);
}

TEST_CASE("propagation errors") {
  ImuNoiseParams noise;
  ImuState imu;
  const auto samples = constant_samples(Eigen::Vector3d::Zero(), -noise.gravity, 0.0, 1.0, 0.005);
  CHECK_THROWS(propagate_mean(imu, samples, 0.0, 2.0, noise));  // target outside span
  auto gappy = samples;
  gappy.erase(gappy.begin() + 50, gappy.begin() + 150);
  CHECK_THROWS(propagate_mean(imu, gappy, 0.0, 1.0, noise, 0.05));  // gap above the limit
}

TEST_CASE("Markov consistency of split propagation") {
  const TrajectorySpec spec;
  RigTruth rig = noiseless_rig();
  const ImuNoiseParams noise;
  const auto samples = synthesize_imu(spec, rig, 200.0, 0);
  std::mt19937_64 rng(13);
  FullState s0 = random_state(rng, 1, 1);
  const ImuState start = trajectory_imu_state(spec, rig, 5.0);
  s0.imu = start;

  // t0 -> t2 in one call, vs t0 -> t1 -> t2 with t1 off the sample grid.
  FullState direct = s0;
  propagate_with_covariance(direct, samples, noise, 5.0, 6.0);
  FullState split = s0;
  propagate_with_covariance(split, samples, noise, 5.0, 5.5731);
  propagate_with_covariance(split, samples, noise, 5.5731, 6.0);

  CHECK((direct.imu.position - split.imu.position).norm() < 1e-9);
  CHECK((direct.imu.velocity - split.imu.velocity).norm() < 1e-9);
  CHECK(rot_angle(quat_to_rot(direct.imu.orientation) * quat_to_rot(split.imu.orientation).transpose()) < 1e-9);
  CHECK(relative_error(split.cov, direct.cov) < 1e-8);
}

TEST_CASE("covariance stays PSD over many random steps") {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g(0.0, 1.0);
  const ImuNoiseParams noise;
  FullState s = random_state(rng, 0, 0);
  s.cov *= 1e-2;
  double t = 0.0;
  std::vector<ImuSample> samples;
  Eigen::Vector3d w = random_vec3(rng, 0.3), a = Eigen::Vector3d(0, 0, 9.81);
  samples.push_back({t, w, a});
  for (int i = 0; i < 10000; ++i) {
    const double dt = 0.002 + 0.003 * std::abs(g(rng));
    w += 0.05 * random_vec3(rng);
    a += 0.05 * random_vec3(rng);
    samples.push_back({t + dt, w, a});
    propagate_with_covariance(s, samples, noise, t, t + dt);
    t += dt;
    samples.erase(samples.begin());
    if (i % 500 == 0) {
      const double mineig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.cov).eigenvalues().minCoeff();
      REQUIRE(mineig > -1e-9);
    }
  }
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.cov).eigenvalues().minCoeff() > -1e-9);
}

TEST_CASE("gravity is a fixed parameter") {
  ImuNoiseParams noise;
  const Eigen::Vector3d g0 = noise.gravity;
  ImuState imu;
  const auto samples = constant_samples(Eigen::Vector3d(0.1, 0, 0), -noise.gravity, 0, 1, 0.005);
  propagate_mean(imu, samples, 0.0, 1.0, noise);
  CHECK(noise.gravity == g0);
  CHECK(noise.gravity.norm() == doctest::Approx(9.81));
}
