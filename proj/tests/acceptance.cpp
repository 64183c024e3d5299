// Acceptance suite: one self-contained check per criterion, each printing a
// single PASS/FAIL line. Returns the number of failed criteria.

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <random>

#include "lic/cloning.hpp"
#include "lic/config.hpp"
#include "lic/estimator.hpp"
#include "lic/lidar_update.hpp"
#include "lic/metrics.hpp"
#include "lic/sim.hpp"
#include "lic/testing.hpp"
#include "lic/update_engine.hpp"
#include "lic/vision_update.hpp"

using namespace lic;
using testing::imu_boxminus;
using testing::imu_boxplus;
using testing::numerical_jacobian;
using testing::random_quat;
using testing::random_state;
using testing::random_vec3;
using testing::relative_error;

namespace {

int g_failures = 0;

void report(int criterion, const std::string &name, bool ok, const std::string &detail) {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << "criterion " << criterion << " (" << name << "): " << detail
            << std::endl;
  if (!ok) ++g_failures;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << std::scientific << v;
  return os.str();
}

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

// ---------------------------------------------------------------------------
// 1. Every analytic Jacobian matches central finite differences, rel < 1e-4,
//    over >= 100 random configurations each, in under 60 s.
void criterion_1() {
  const auto t_start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::mt19937_64 rng(101);

  // IMU state transition
  {
    TrajectorySpec spec;
    RigTruth rig;
    rig.noise = ImuNoiseParams{0, 0, 0, 0, ImuNoiseParams{}.gravity};
    rig.gyro_bias = Eigen::Vector3d(0.01, -0.02, 0.015);
    rig.accel_bias = Eigen::Vector3d(0.05, 0.02, -0.04);
    const auto samples = synthesize_imu(spec, rig, 200.0, 7);
    const ImuNoiseParams noise;
    std::uniform_real_distribution<double> pick(1.0, 55.0);
    for (int trial = 0; trial < 100; ++trial) {
      const double t0 = pick(rng), t1 = t0 + 0.25;
      ImuState imu;
      const TrajectorySample ts = trajectory_at(t0, spec);
      imu.orientation = ts.orientation;
      imu.position = ts.position;
      imu.velocity = ts.velocity;
      imu.gyro_bias = rig.gyro_bias;
      imu.accel_bias = rig.accel_bias;
      const ImuPropagation prop = propagate_imu(imu, samples, t0, t1, noise);
      const auto f = [&](const Eigen::VectorXd &d) -> Eigen::VectorXd {
        return imu_boxminus(propagate_mean(imu_boxplus(imu, d), samples, t0, t1, noise), prop.state);
      };
      worst = std::max(worst, relative_error(prop.phi, numerical_jacobian(f, 15, 1e-6)));
    }
  }
  const double worst_phi = worst;

  // clone Jacobian: identity blocks by construction, time column vs a
  // shifted propagation
  double worst_clone = 0.0;
  {
    TrajectorySpec spec;
    RigTruth rig;
    rig.noise = ImuNoiseParams{0, 0, 0, 0, ImuNoiseParams{}.gravity};
    const auto samples = synthesize_imu(spec, rig, 200.0, 8);
    const ImuNoiseParams noise;
    std::uniform_real_distribution<double> pick(1.0, 55.0);
    for (int trial = 0; trial < 100; ++trial) {
      const double t0 = pick(rng);
      const double t_hat = t0 + 0.5003;
      ImuState imu;
      const TrajectorySample ts = trajectory_at(t0, spec);
      imu.orientation = ts.orientation;
      imu.position = ts.position;
      imu.velocity = ts.velocity;
      const ImuState nominal = propagate_mean(imu, samples, t0, t_hat, noise);
      const double d = 1e-5;
      const ImuState plus = propagate_mean(imu, samples, t0, t_hat + d, noise);
      const ImuState minus = propagate_mean(imu, samples, t0, t_hat - d, noise);
      Eigen::Matrix<double, 6, 1> fd, analytic;
      fd.head<3>() = rotvec_from_quat(quat_multiply(plus.orientation, quat_inverse(minus.orientation))) / (2 * d);
      fd.tail<3>() = (plus.position - minus.position) / (2 * d);
      analytic.head<3>() = interpolate_imu(samples, t_hat, 0.05).angular_velocity - imu.gyro_bias;
      analytic.tail<3>() = nominal.velocity;
      worst_clone = std::max(worst_clone, relative_error(fd, analytic));

      FullState s = random_state(rng, 0, 0);
      s.imu = nominal;
      const Eigen::MatrixXd j = clone_jacobian(s, SensorKind::Lidar, analytic.head<3>());
      worst_clone = std::max(
          worst_clone, (j.block<3, 3>(0, StateIndexMap::kImuTheta) - Eigen::Matrix3d::Identity()).norm());
      worst_clone = std::max(
          worst_clone, (j.block<3, 3>(3, StateIndexMap::kImuPosition) - Eigen::Matrix3d::Identity()).norm());
    }
  }

  // LiDAR residual rows: the six projection partials composed with the
  // distance gradients, against finite differences through the whole chain
  double worst_lidar = 0.0;
  {
    int done = 0;
    while (done < 200) {
      FullState s = random_state(rng, 0, 2);
      const auto kind = done % 2 == 0 ? LidarFeatureKind::Edge : LidarFeatureKind::Surf;
      const Correspondence corr = random_correspondence(rng, kind);
      LidarResidual res;
      try {
        res = residual_jacobian(s, corr, 0, 1, 0.02);
      } catch (const std::invalid_argument &) {
        continue;
      }
      if (kind == LidarFeatureKind::Edge && res.value < 1e-2) continue;
      const auto f = [&](const Eigen::VectorXd &d) -> Eigen::VectorXd {
        return Eigen::VectorXd::Constant(1, lidar_distance(boxplus(s, d), corr, 0, 1));
      };
      worst_lidar = std::max(worst_lidar, relative_error(res.jacobian, numerical_jacobian(f, s.error_dim(), 1e-6)));
      ++done;
    }
  }

  // raw edge/surf distance gradients
  double worst_dist = 0.0;
  {
    const double eps = 1e-7;
    int done = 0;
    while (done < 100) {
      const Eigen::Vector3d pj = random_vec3(rng, 2.0);
      const Eigen::Vector3d pk = pj + random_vec3(rng, 1.0);
      const Eigen::Vector3d pl = pj + random_vec3(rng, 1.0);
      const Eigen::Vector3d pi = random_vec3(rng, 2.0);
      if ((pk - pj).norm() < 1e-2 || (pk - pj).cross(pl - pj).norm() < 1e-2) continue;
      if (edge_residual(pi, pj, pk) < 1e-2) continue;
      const EdgeGeometry eg = edge_residual_gradients(pi, pj, pk);
      const SurfGeometry sg = surf_residual_gradients(pi, pj, pk, pl);
      Eigen::RowVector3d fd_e, fd_s;
      for (int axis = 0; axis < 3; ++axis) {
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        d(axis) = eps;
        fd_e(axis) = (edge_residual(pi + d, pj, pk) - edge_residual(pi - d, pj, pk)) / (2 * eps);
        fd_s(axis) = (surf_residual_gradients(pi + d, pj, pk, pl).signed_distance -
                      surf_residual_gradients(pi - d, pj, pk, pl).signed_distance) /
                     (2 * eps);
      }
      worst_dist = std::max(worst_dist, relative_error(eg.d_pi, fd_e));
      worst_dist = std::max(worst_dist, relative_error(sg.d_pi, fd_s));
      ++done;
    }
  }

  // visual H_x and H_f
  double worst_vis = 0.0;
  {
    for (int trial = 0; trial < 100; ++trial) {
      FullState s = random_state(rng, 3, 0);
      for (int i = 0; i < 3; ++i) {
        s.cam_clones[i].orientation = quat_from_rotvec(random_vec3(rng, 0.15));
        s.cam_clones[i].position = 0.5 * random_vec3(rng);
      }
      s.cam_calib.rotation = quat_from_rotvec(random_vec3(rng, 0.1));
      s.cam_calib.translation = random_vec3(rng, 0.05);
      const Eigen::Vector3d point = Eigen::Vector3d(0.4, -0.2, 6.0) + random_vec3(rng, 0.3);
      FeatureTrack track;
      track.id = 1;
      bool valid = true;
      for (const auto &c : s.cam_clones) {
        const CameraPose cp = camera_pose(c, s.cam_calib);
        const Eigen::Vector3d pc = cp.r_cfromg * (point - cp.p_cing);
        if (pc.z() < 0.5) {
          valid = false;
          break;
        }
        track.observations.push_back({c.imu_time, Eigen::Vector2d(pc.x() / pc.z(), pc.y() / pc.z())});
      }
      if (!valid) continue;
      const auto jac = visual_residual_jacobians(track, point, s);
      const auto f = [&](const Eigen::VectorXd &d) -> Eigen::VectorXd {
        return jac->residual - visual_residual_jacobians(track, point, boxplus(s, d))->residual;
      };
      worst_vis = std::max(worst_vis, relative_error(numerical_jacobian(f, s.error_dim(), 1e-6), jac->h_state));
      const auto g = [&](const Eigen::VectorXd &d) -> Eigen::VectorXd {
        return jac->residual - visual_residual_jacobians(track, point + Eigen::Vector3d(d), s)->residual;
      };
      worst_vis = std::max(worst_vis, relative_error(numerical_jacobian(g, 3, 1e-6), jac->h_feature));
    }
  }

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  worst = std::max({worst_phi, worst_clone, worst_lidar, worst_dist, worst_vis});
  report(1, "jacobian suite", worst < 1e-4 && wall < 60.0,
         "worst rel err " + fmt(worst) + " [phi " + fmt(worst_phi) + ", clone " + fmt(worst_clone) + ", lidar " +
             fmt(worst_lidar) + ", dist " + fmt(worst_dist) + ", visual " + fmt(worst_vis) + "], " +
             fmt(wall) + " s (< 60 s)");
}

// ---------------------------------------------------------------------------
// 2. Posterior with QR compression equals the uncompressed posterior within
//    1e-8 relative on >= 50 random batches with up to 10x dim rows.
void criterion_2() {
  std::mt19937_64 rng(202);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> clones(0, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const FullState s = random_state(rng, clones(rng), clones(rng));
    const int d = s.error_dim();
    std::uniform_int_distribution<int> rows_pick(d + 1, 10 * d);
    const int rows = rows_pick(rng);
    ResidualBlock b;
    b.residual.resize(rows);
    b.jacobian.resize(rows, d);
    b.noise_var.resize(rows);
    for (int r = 0; r < rows; ++r) {
      b.residual(r) = 0.05 * g(rng);
      for (int c = 0; c < d; ++c) b.jacobian(r, c) = g(rng);
      b.noise_var(r) = 0.2 + std::abs(g(rng));
    }
    const KalmanCorrection raw = kalman_correction(s.cov, b);
    const KalmanCorrection comp = kalman_correction(s.cov, qr_compress(b));
    worst = std::max(worst, relative_error(comp.dx, raw.dx));
    worst = std::max(worst, relative_error(comp.cov, raw.cov));
  }
  report(2, "compression equivalence", worst < 1e-8, "worst rel err " + fmt(worst) + " over 50 batches");
}

// ---------------------------------------------------------------------------
// 3. Noise-free convergence over 60 s with exact initialization.
void criterion_3() {
  SimConfig sim = default_sim_config();
  sim.noise_free = true;
  sim.trajectory.duration = 60.0;
  const SimOutput out = simulate(sim);

  EstimatorConfig cfg = default_estimator_config();
  cfg.init_mode = InitMode::Truth;
  cfg.init_gyro_bias.setZero();
  cfg.init_accel_bias.setZero();
  cfg.lidar_point_sigma = 1e-3;  // measurement model for the zero-noise scans
  cfg.priors.orientation = 1e-6;
  cfg.priors.position = 1e-6;
  cfg.priors.velocity = 1e-6;
  cfg.priors.gyro_bias = 1e-5;
  cfg.priors.accel_bias = 1e-4;
  cfg.priors.calib_rot = 1e-6;
  cfg.priors.calib_trans = 1e-6;
  cfg.priors.calib_time = 1e-6;

  const EstimatorOutput est = run_estimator(cfg, out.records, &out.truth);
  if (!est.ok || est.trajectory.empty()) {
    report(3, "noise-free convergence", false, "estimator aborted: " + est.abort_reason);
    return;
  }
  const PoseSample &last = est.trajectory.back();
  const TruthSample ts = interpolate_truth(out.truth, last.t);
  const double pos_err = (ts.p - last.p).norm();
  const double ang_err = rotvec_from_quat(quat_multiply(ts.q, quat_inverse(last.q))).norm() * 180.0 / M_PI;
  report(3, "noise-free convergence", pos_err < 1e-3 && ang_err < 0.01,
         "final position error " + fmt(pos_err) + " m (< 1e-3), orientation " + fmt(ang_err) + " deg (< 0.01)");
}

// ---------------------------------------------------------------------------
// 4. Online calibration convergence from injected errors, noisy run.
void criterion_4() {
  SimConfig sim = default_sim_config();
  sim.trajectory.duration = 60.0;
  const SimOutput out = simulate(sim);

  EstimatorConfig cfg = default_estimator_config();
  cfg.init_mode = InitMode::TruthPerturbed;
  cfg.seed = 99;
  cfg.init_gyro_bias = sim.rig.gyro_bias;
  cfg.init_accel_bias = sim.rig.accel_bias;
  const Eigen::Vector3d rot_err = (2.0 * M_PI / 180.0) * Eigen::Vector3d(1, -1, 1).normalized();
  const Eigen::Vector3d trans_err = 0.05 * Eigen::Vector3d(1, 1, -1).normalized();
  cfg.cam_calib = sim.rig.cam_calib;
  cfg.cam_calib.rotation = quat_multiply(quat_from_rotvec(rot_err), cfg.cam_calib.rotation);
  cfg.cam_calib.translation += trans_err;
  cfg.cam_calib.time_offset += 0.005;
  cfg.lidar_calib = sim.rig.lidar_calib;
  cfg.lidar_calib.rotation = quat_multiply(quat_from_rotvec(-rot_err), cfg.lidar_calib.rotation);
  cfg.lidar_calib.translation -= trans_err;
  cfg.lidar_calib.time_offset -= 0.005;

  const EstimatorOutput est = run_estimator(cfg, out.records, &out.truth);
  if (!est.ok || est.calibration.empty()) {
    report(4, "calibration convergence", false, "estimator aborted: " + est.abort_reason);
    return;
  }

  bool ok = true;
  std::ostringstream detail;
  const struct {
    const char *name;
    const SensorExtrinsics *est;
    const SensorExtrinsics *truth;
    int sig;
  } chains[2] = {{"cam", &est.state.cam_calib, &sim.rig.cam_calib, 0},
                 {"lidar", &est.state.lidar_calib, &sim.rig.lidar_calib, 7}};
  for (const auto &chain : chains) {
    const Eigen::Vector3d r_err =
        rotvec_from_quat(quat_multiply(chain.est->rotation, quat_inverse(chain.truth->rotation)));
    const double rot_deg = r_err.norm() * 180.0 / M_PI;
    const double trans = (chain.est->translation - chain.truth->translation).norm();
    const double td = std::abs(chain.est->time_offset - chain.truth->time_offset);
    ok = ok && rot_deg < 0.5 && trans < 0.01 && td < 1e-3;
    detail << chain.name << " " << fmt(rot_deg) << " deg / " << fmt(trans) << " m / " << fmt(td) << " s; ";

    // 3-sigma envelopes: coverage of the per-component errors after burn-in
    int covered = 0, total = 0;
    for (const CalibrationRecord &rec : est.calibration) {
      if (rec.t < 10.0) continue;
      const SensorExtrinsics &e = chain.sig == 0 ? rec.cam : rec.lidar;
      const Eigen::Vector3d re = rotvec_from_quat(quat_multiply(e.rotation, quat_inverse(chain.truth->rotation)));
      const Eigen::Vector3d te = e.translation - chain.truth->translation;
      const double tde = e.time_offset - chain.truth->time_offset;
      for (int i = 0; i < 3; ++i) {
        total += 2;
        covered += std::abs(re(i)) <= 3.0 * rec.sigma(chain.sig + i);
        covered += std::abs(te(i)) <= 3.0 * rec.sigma(chain.sig + 3 + i);
      }
      total += 1;
      covered += std::abs(tde) <= 3.0 * rec.sigma(chain.sig + 6);
    }
    const double coverage = static_cast<double>(covered) / total;
    ok = ok && coverage >= 0.9;
    detail << chain.name << " 3sig coverage " << fmt(coverage) << "; ";
  }
  report(4, "calibration convergence", ok, detail.str() + "(limits 0.5 deg / 1 cm / 1 ms, coverage >= 0.9)");
}

// ---------------------------------------------------------------------------
// 5. Pose NEES consistency over 20 Monte-Carlo runs.
void criterion_5() {
  const int runs = 20;
  double sum_nees = 0.0;
  long count = 0;
  int aborted = 0;
  for (int s = 0; s < runs; ++s) {
    SimConfig sim = default_sim_config();
    sim.trajectory.duration = 60.0;
    sim.seed = 500 + s;
    const SimOutput out = simulate(sim);
    EstimatorConfig cfg = default_estimator_config();
    cfg.init_mode = InitMode::TruthPerturbed;
    cfg.seed = 8000 + s;
    cfg.init_gyro_bias = sim.rig.gyro_bias;
    cfg.init_accel_bias = sim.rig.accel_bias;
    // exact calibration with tight priors: the pose NEES is then a clean
    // consistency probe of the propagation/update chain
    cfg.priors.calib_rot = 1e-6;
    cfg.priors.calib_trans = 1e-6;
    cfg.priors.calib_time = 1e-6;
    const EstimatorOutput est = run_estimator(cfg, out.records, &out.truth);
    if (!est.ok) {
      ++aborted;
      continue;
    }
    for (const auto &[t, v] : est.nees) {
      sum_nees += v;
      ++count;
    }
  }
  const double avg = sum_nees / count;
  // Mean of runs*T samples of a chi^2_6 / run count: the 20-run interval is
  // [chi2inv(.025, 120)/20, chi2inv(.975, 120)/20]; accept within that
  // interval widened by its own width on both sides.
  const double lo20 = chi_squared_quantile(120, 0.025) / 20.0;
  const double hi20 = chi_squared_quantile(120, 0.975) / 20.0;
  const double w = hi20 - lo20;
  const bool ok = aborted == 0 && avg >= lo20 - w && avg <= hi20 + w;
  report(5, "pose NEES consistency", ok,
         "average NEES " + fmt(avg) + " over " + std::to_string(runs) + " runs, accept [" + fmt(lo20 - w) + ", " +
             fmt(hi20 + w) + "] (tight [" + fmt(lo20) + ", " + fmt(hi20) + "]), aborts " + std::to_string(aborted));
}

// ---------------------------------------------------------------------------
// 6. Fusion trend: full LIC beats camera-only and lidar-only on average ATE.
void criterion_6() {
  const int seeds = 10;
  double sum_full = 0.0, sum_cam = 0.0, sum_lidar = 0.0;
  int aborted = 0;
  for (int s = 0; s < seeds; ++s) {
    SimConfig sim = default_sim_config();
    sim.trajectory.duration = 40.0;
    sim.seed = 7000 + s;
    const SimOutput out = simulate(sim);
    std::vector<PoseSample> gt;
    gt.reserve(out.truth.size());
    for (const auto &t : out.truth) gt.push_back({t.t, t.q, t.p});
    const auto ate = [&](bool cam, bool lidar) {
      EstimatorConfig cfg = default_estimator_config();
      cfg.init_mode = InitMode::TruthPerturbed;
      cfg.seed = 5000 + s;
      cfg.use_camera = cam;
      cfg.use_lidar = lidar;
      const EstimatorOutput est = run_estimator(cfg, out.records, &out.truth);
      if (!est.ok || est.trajectory.size() < 10) {
        ++aborted;
        return 0.0;
      }
      return compute_metrics(est.trajectory, gt, true).ate;
    };
    sum_full += ate(true, true);
    sum_cam += ate(true, false);
    sum_lidar += ate(false, true);
  }
  const double full = sum_full / seeds, cam = sum_cam / seeds, lidar = sum_lidar / seeds;
  const bool ok = aborted == 0 && full < cam && full < lidar;
  report(6, "fusion trend", ok,
         "avg ATE over " + std::to_string(seeds) + " seeds: full " + fmt(full) + " < cam-only " + fmt(cam) +
             " and < lidar-only " + fmt(lidar));
}

// ---------------------------------------------------------------------------
// 7. Gating rates: >= 92% inlier acceptance, >= 99% rejection of 1 m
//    outliers, over >= 1e4 residuals each.
void criterion_7() {
  SimConfig sim = default_sim_config();
  sim.trajectory.duration = 60.0;
  const WorldModel world = make_box_room(sim.room_size, 0, sim.seed);
  std::mt19937_64 rng(700);

  // plane association of a noisy global point: unambiguous nearest plane
  const auto plane_of = [&](const Eigen::Vector3d &p) -> int {
    int best = -1;
    double best_d = 1e9, second = 1e9;
    for (int i = 0; i < static_cast<int>(world.planes.size()); ++i) {
      const Plane &pl = world.planes[i];
      if (std::abs((p - pl.center).dot(pl.axis_u)) > pl.half_u + 0.1) continue;
      if (std::abs((p - pl.center).dot(pl.axis_v)) > pl.half_v + 0.1) continue;
      const double d = std::abs((p - pl.center).dot(pl.normal));
      if (d < best_d) {
        second = best_d;
        best_d = d;
        best = i;
      } else {
        second = std::min(second, d);
      }
    }
    return best_d < 0.08 && second > 0.25 ? best : -1;
  };

  long inlier_total = 0, inlier_accept = 0, outlier_total = 0, outlier_reject = 0;
  const FeatureExtractionParams extraction;
  const CorrespondenceParams corr_params;
  const double sigma = sim.lidar_point_sigma;

  for (int pair = 0; pair < 80 && inlier_total < 12000; ++pair) {
    const double t0 = 1.0 + 0.68 * pair;
    const double t1 = t0 + 1.0 / sim.lidar_rate;
    const TrajectorySample pose0 = trajectory_at(t0, sim.trajectory);
    const TrajectorySample pose1 = trajectory_at(t1, sim.trajectory);
    const LidarScan scan0 = synthesize_lidar_scan(world, pose0, sim.rig, sim.rings, sigma, rng);
    const LidarScan scan1 = synthesize_lidar_scan(world, pose1, sim.rig, sim.rings, sigma, rng);
    const FeatureIndex index(extract_features(scan0, extraction));
    const auto features = extract_features(scan1, extraction);

    FullState s;
    s.lidar_calib = sim.rig.lidar_calib;
    ClonePose c0, c1;
    c0.orientation = pose0.orientation;
    c0.position = pose0.position;
    c1.orientation = pose1.orientation;
    c1.position = pose1.position;
    s.lidar_clones = {c0, c1};
    s.cov = Eigen::MatrixXd::Zero(s.error_dim(), s.error_dim());
    const RelativePose rel = relative_lidar_transform(s.lidar_calib, c0, c1);

    // global pose of the previous lidar frame, for truth association
    const Eigen::Matrix3d r_l0g = quat_to_rot(sim.rig.lidar_calib.rotation) * quat_to_rot(pose0.orientation);
    const Eigen::Vector3d p_l0 =
        pose0.position - quat_to_rot(pose0.orientation).transpose() *
                             quat_to_rot(sim.rig.lidar_calib.rotation).transpose() * sim.rig.lidar_calib.translation;
    const auto to_global = [&](const Eigen::Vector3d &p_l) { return r_l0g.transpose() * p_l + p_l0; };

    for (const LidarFeature &f : features) {
      if (f.kind != LidarFeatureKind::Surf) continue;  // plane association is unambiguous
      const Eigen::Vector3d projected = project_point(f.position, rel);
      const auto corr = index.find_correspondence(f.position, projected, f.kind, corr_params);
      if (!corr) continue;
      // inlier: the point and all anchors associate to one plane
      const int pid = plane_of(to_global(projected));
      if (pid < 0) continue;
      bool same = true;
      for (int a = 0; a < corr->anchor_count; ++a) same = same && plane_of(to_global(corr->anchors[a])) == pid;
      if (!same) continue;

      const LidarResidual res = residual_jacobian(s, *corr, 0, 1, sigma);
      ++inlier_total;
      inlier_accept += mahalanobis_gate(res, s.cov, 0.95);

      // inject a 1 m offset along the direction the scalar residual senses
      Correspondence shifted = *corr;
      const Eigen::RowVector3d grad =
          surf_residual_gradients(projected, corr->anchors[0], corr->anchors[1], corr->anchors[2]).d_pi;
      shifted.point += rel.rotation.transpose() * grad.transpose().normalized();
      const LidarResidual res_out = residual_jacobian(s, shifted, 0, 1, sigma);
      ++outlier_total;
      outlier_reject += !mahalanobis_gate(res_out, s.cov, 0.95);
    }
  }
  const double accept_rate = static_cast<double>(inlier_accept) / inlier_total;
  const double reject_rate = static_cast<double>(outlier_reject) / outlier_total;
  const bool ok = inlier_total >= 10000 && accept_rate >= 0.92 && reject_rate >= 0.99;
  report(7, "chi-squared gating", ok,
         "inlier accept " + fmt(accept_rate) + " (>= 0.92) over " + std::to_string(inlier_total) +
             ", outlier reject " + fmt(reject_rate) + " (>= 0.99) over " + std::to_string(outlier_total));
}

// ---------------------------------------------------------------------------
// 8. Metrics match independent reference implementations within 1e-10.
void criterion_8() {
  std::mt19937_64 rng(800);
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<PoseSample> gt, est;
    const Eigen::Matrix3d r = quat_to_rot(random_quat(rng));
    const Eigen::Vector3d t = random_vec3(rng, 3.0);
    for (int i = 0; i < 50; ++i) {
      PoseSample s{0.1 * i, random_quat(rng), random_vec3(rng, 4.0)};
      gt.push_back(s);
      PoseSample e = s;
      e.p = r * s.p + t + random_vec3(rng, 0.03);
      est.push_back(e);
    }
    const RigidTransform tf = align_trajectories(est, gt);
    const TrajectoryMetrics m = compute_metrics(est, gt, true);

    Eigen::Matrix3Xd src(3, est.size()), dst(3, gt.size());
    for (size_t i = 0; i < est.size(); ++i) {
      src.col(i) = est[i].p;
      dst.col(i) = gt[i].p;
    }
    const Eigen::Matrix4d u = Eigen::umeyama(src, dst, false);
    worst = std::max(worst, (tf.rotation - u.topLeftCorner<3, 3>()).norm());
    worst = std::max(worst, (tf.translation - u.topRightCorner<3, 1>()).norm());
    double sum = 0.0;
    for (size_t i = 0; i < est.size(); ++i) {
      sum += (u.topLeftCorner<3, 3>() * est[i].p + u.topRightCorner<3, 1>() - gt[i].p).squaredNorm();
    }
    worst = std::max(worst, std::abs(m.ate - std::sqrt(sum / est.size())));
    worst = std::max(worst, std::abs(m.start_end - (est.front().p - est.back().p).norm()));
  }
  report(8, "metric oracle", worst < 1e-10, "worst deviation " + fmt(worst) + " (< 1e-10)");
}

}  // namespace

int main() {
  std::cout << "acceptance suite\n";
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  std::cout << (g_failures == 0 ? "all criteria passed\n" : std::to_string(g_failures) + " criteria FAILED\n");
  return g_failures == 0 ? 0 : 1;
}
