#include "lic/selftest.hpp"

#include <cmath>
#include <iomanip>

#include "lic/cloning.hpp"
#include "lic/lidar_update.hpp"
#include "lic/sim.hpp"
#include "lic/testing.hpp"
#include "lic/update_engine.hpp"
#include "lic/vision_update.hpp"

namespace lic {

namespace {

using testing::imu_boxminus;
using testing::imu_boxplus;
using testing::numerical_jacobian;
using testing::random_quat;
using testing::random_spd;
using testing::random_state;
using testing::random_vec3;
using testing::relative_error;

struct Reporter {
  std::ostream &os;
  int failures = 0;
  void check(const std::string &name, bool ok, double value, double limit) {
    os << (ok ? "[PASS] " : "[FAIL] ") << name << "  (" << std::scientific << std::setprecision(3) << value
       << " vs limit " << limit << ")\n";
    if (!ok) ++failures;
  }
};

double lidar_distance(const FullState &s, const Correspondence &corr, int il, int il1) {
  const RelativePose rel = relative_lidar_transform(s.lidar_calib, s.lidar_clones[il], s.lidar_clones[il1]);
  const Eigen::Vector3d p = project_point(corr.point, rel);
  if (corr.kind == LidarFeatureKind::Edge) return edge_residual(p, corr.anchors[0], corr.anchors[1]);
  return surf_residual_gradients(p, corr.anchors[0], corr.anchors[1], corr.anchors[2]).signed_distance;
}

Correspondence random_correspondence(std::mt19937_64 &rng, LidarFeatureKind kind) {
  Correspondence corr;
  corr.kind = kind;
  corr.point = random_vec3(rng, 3.0);
  corr.anchors[0] = random_vec3(rng, 3.0);
  corr.anchors[1] = corr.anchors[0] + random_vec3(rng, 1.0);
  corr.anchors[2] = corr.anchors[0] + random_vec3(rng, 1.0);
  corr.anchor_count = kind == LidarFeatureKind::Edge ? 2 : 3;
  return corr;
}

}  // namespace

int run_selftest(std::uint64_t seed, std::ostream &os) {
  std::mt19937_64 rng(seed);
  Reporter rep{os};

  {  // quaternion product against the rotation-matrix oracle
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const Eigen::Vector4d a = random_quat(rng), b = random_quat(rng);
      worst = std::max(worst,
                       (quat_to_rot(quat_multiply(a, b)) - quat_to_rot(a) * quat_to_rot(b)).norm());
    }
    rep.check("quat_multiply matches rotation composition", worst < 1e-12, worst, 1e-12);
  }

  {  // boxplus rotation log-map roundtrip
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      FullState s = random_state(rng, 0, 0);
      Eigen::VectorXd d = Eigen::VectorXd::Zero(s.error_dim());
      d.segment<3>(0) = random_vec3(rng, 0.03);
      const FullState sp = boxplus(s, d);
      const Eigen::Vector3d rec =
          rotvec_from_quat(quat_multiply(sp.imu.orientation, quat_inverse(s.imu.orientation)));
      worst = std::max(worst, (rec - Eigen::Vector3d(d.segment<3>(0))).norm());
    }
    rep.check("boxplus log-map roundtrip", worst < 1e-8, worst, 1e-8);
  }

  {  // IMU state-transition vs central differences
    TrajectorySpec spec;
    RigTruth rig;
    rig.gyro_bias = Eigen::Vector3d(0.01, -0.02, 0.015);
    rig.accel_bias = Eigen::Vector3d(0.05, 0.02, -0.04);
    rig.noise.gyro_noise_density = 0.0;
    rig.noise.accel_noise_density = 0.0;
    rig.noise.gyro_bias_walk = 0.0;
    rig.noise.accel_bias_walk = 0.0;
    const auto samples = synthesize_imu(spec, rig, 200.0, seed);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const double t0 = 1.0 + trial * 0.37;
      const double t1 = t0 + 0.31;
      ImuState imu;
      const TrajectorySample ts = trajectory_at(t0, spec);
      imu.orientation = ts.orientation;
      imu.position = ts.position;
      imu.velocity = ts.velocity;
      imu.gyro_bias = rig.gyro_bias;
      imu.accel_bias = rig.accel_bias;
      const ImuNoiseParams noise;
      const ImuPropagation prop = propagate_imu(imu, samples, t0, t1, noise);
      const auto f = [&](const Eigen::VectorXd &d) -> Eigen::VectorXd {
        const ImuState pert = imu_boxplus(imu, d);
        return imu_boxminus(propagate_mean(pert, samples, t0, t1, noise), prop.state);
      };
      const Eigen::MatrixXd fd = numerical_jacobian(f, 15, 1e-6);
      worst = std::max(worst, relative_error(prop.phi, fd));
    }
    rep.check("imu transition matrix vs finite differences", worst < 1e-4, worst, 1e-4);
  }

  {  // time-offset column of the clone Jacobian vs shifted propagation
    TrajectorySpec spec;
    RigTruth rig;
    const auto samples = synthesize_imu(spec, rig, 200.0, seed + 1);
    const ImuNoiseParams noise;
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const double t0 = 2.0 + 0.71 * trial;
      const double t_hat = t0 + 0.5003;  // keep clear of sample knots
      ImuState imu;
      const TrajectorySample ts = trajectory_at(t0, spec);
      imu.orientation = ts.orientation;
      imu.position = ts.position;
      imu.velocity = ts.velocity;
      const ImuState at_clone = propagate_mean(imu, samples, t0, t_hat, noise);
      const double delta = 1e-5;
      const ImuState plus = propagate_mean(imu, samples, t0, t_hat + delta, noise);
      const ImuState minus = propagate_mean(imu, samples, t0, t_hat - delta, noise);
      Eigen::Matrix<double, 6, 1> fd;
      fd.head<3>() = rotvec_from_quat(quat_multiply(plus.orientation, quat_inverse(minus.orientation))) /
                     (2.0 * delta);
      fd.tail<3>() = (plus.position - minus.position) / (2.0 * delta);
      Eigen::Matrix<double, 6, 1> analytic;
      analytic.head<3>() = interpolate_imu(samples, t_hat, 0.05).angular_velocity - imu.gyro_bias;
      analytic.tail<3>() = at_clone.velocity;
      worst = std::max(worst, relative_error(fd, analytic));
    }
    rep.check("clone time-offset column vs finite differences", worst < 1e-4, worst, 1e-4);
  }

  {  // LiDAR residual row vs finite differences through the projection
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      FullState s = random_state(rng, 0, 2);
      const auto kind = trial % 2 == 0 ? LidarFeatureKind::Edge : LidarFeatureKind::Surf;
      const Correspondence corr = random_correspondence(rng, kind);
      LidarResidual res;
      try {
        res = residual_jacobian(s, corr, 0, 1, 0.02);
      } catch (const std::invalid_argument &) {
        continue;
      }
      if (kind == LidarFeatureKind::Edge && res.value < 1e-3) continue;
      const auto f = [&](const Eigen::VectorXd &d) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(1, lidar_distance(boxplus(s, d), corr, 0, 1));
      };
      const Eigen::MatrixXd fd = numerical_jacobian(f, s.error_dim(), 1e-6);
      worst = std::max(worst, relative_error(res.jacobian, fd));
    }
    rep.check("lidar residual jacobian vs finite differences", worst < 1e-4, worst, 1e-4);
  }

  {  // visual jacobians vs finite differences
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      FullState s = random_state(rng, 3, 0);
      for (auto &c : s.cam_clones) {
        c.orientation = quat_from_rotvec(random_vec3(rng, 0.2));
        c.position = random_vec3(rng, 0.5);
      }
      s.cam_calib.rotation = quat_from_rotvec(random_vec3(rng, 0.1));
      const Eigen::Vector3d point(0.3, -0.2, 4.0);
      FeatureTrack track;
      track.id = 1;
      for (const auto &c : s.cam_clones) {
        const CameraPose cp = camera_pose(c, s.cam_calib);
        const Eigen::Vector3d pc = cp.r_cfromg * (point - cp.p_cing);
        track.observations.push_back({c.imu_time, Eigen::Vector2d(pc.x() / pc.z(), pc.y() / pc.z())});
      }
      const auto jac = visual_residual_jacobians(track, point, s);
      if (!jac) continue;
      const auto f = [&](const Eigen::VectorXd &d) -> Eigen::VectorXd {
        const auto j2 = visual_residual_jacobians(track, point, boxplus(s, d));
        return jac->residual - j2->residual;  // h(x+d) - h(x)
      };
      const Eigen::MatrixXd fd = numerical_jacobian(f, s.error_dim(), 1e-6);
      worst = std::max(worst, relative_error(fd, jac->h_state));
      const auto g = [&](const Eigen::VectorXd &d) -> Eigen::VectorXd {
        const auto j2 = visual_residual_jacobians(track, point + Eigen::Vector3d(d), s);
        return jac->residual - j2->residual;
      };
      const Eigen::MatrixXd fdf = numerical_jacobian(g, 3, 1e-6);
      worst = std::max(worst, relative_error(fdf, jac->h_feature));
    }
    rep.check("visual jacobians vs finite differences", worst < 1e-4, worst, 1e-4);
  }

  {  // compression equivalence on random batches
    double worst = 0.0;
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      FullState s = random_state(rng, 2, 2);
      const int d = s.error_dim();
      const int rows = 3 * d;
      ResidualBlock block;
      block.residual.resize(rows);
      block.jacobian.resize(rows, d);
      block.noise_var.resize(rows);
      for (int r = 0; r < rows; ++r) {
        block.residual(r) = 0.01 * g(rng);
        for (int c = 0; c < d; ++c) block.jacobian(r, c) = g(rng);
        block.noise_var(r) = 0.5 + std::abs(g(rng));
      }
      const KalmanCorrection raw = kalman_correction(s.cov, block);
      const KalmanCorrection comp = kalman_correction(s.cov, qr_compress(block));
      worst = std::max(worst, relative_error(comp.dx, raw.dx));
      worst = std::max(worst, relative_error(comp.cov, raw.cov));
    }
    rep.check("qr compression preserves the posterior", worst < 1e-8, worst, 1e-8);
  }

  {  // chi-squared quantiles
    const double q1 = chi_squared_quantile(1, 0.95);
    const double q2 = chi_squared_quantile(2, 0.95);
    const double err = std::max(std::abs(q1 - 3.8415), std::abs(q2 - (-2.0 * std::log(0.05))));
    rep.check("chi-squared quantiles", err < 1e-3, err, 1e-3);
  }

  os << (rep.failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
  return rep.failures;
}

}  // namespace lic
