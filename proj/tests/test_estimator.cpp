#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "lic/config.hpp"
#include "lic/estimator.hpp"

using namespace lic;

namespace {

SimOutput short_sim(double duration, bool noise_free, std::uint64_t seed = 42) {
  SimConfig cfg = default_sim_config();
  cfg.trajectory.duration = duration;
  cfg.noise_free = noise_free;
  cfg.seed = seed;
  return simulate(cfg);
}

EstimatorConfig truth_config() {
  EstimatorConfig cfg = default_estimator_config();
  cfg.init_mode = InitMode::Truth;
  return cfg;
}

}  // namespace

TEST_CASE("empty log yields an empty trajectory without error") {
  const EstimatorOutput out = run_estimator(default_estimator_config(), {});
  CHECK(out.ok);
  CHECK(out.trajectory.empty());
  CHECK(out.calibration.empty());
}

TEST_CASE("fixed config, log, and seed reproduce bitwise identical outputs") {
  const SimOutput sim = short_sim(5.0, false);
  EstimatorConfig cfg = default_estimator_config();
  cfg.init_mode = InitMode::TruthPerturbed;
  cfg.seed = 3;
  const EstimatorOutput a = run_estimator(cfg, sim.records, &sim.truth);
  const EstimatorOutput b = run_estimator(cfg, sim.records, &sim.truth);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].t == b.trajectory[i].t);
    CHECK((a.trajectory[i].p - b.trajectory[i].p).norm() == 0.0);
    CHECK((a.trajectory[i].q - b.trajectory[i].q).norm() == 0.0);
  }
  REQUIRE(a.nees.size() == b.nees.size());
  for (size_t i = 0; i < a.nees.size(); ++i) CHECK(a.nees[i].second == b.nees[i].second);
}

TEST_CASE("short noise-free run stays within a tight error budget") {
  const SimOutput sim = short_sim(8.0, true);
  EstimatorConfig cfg = truth_config();
  cfg.lidar_point_sigma = 1e-3;
  cfg.priors.orientation = 1e-6;
  cfg.priors.position = 1e-6;
  cfg.priors.velocity = 1e-6;
  cfg.priors.gyro_bias = 1e-5;
  cfg.priors.accel_bias = 1e-4;
  cfg.priors.calib_rot = 1e-6;
  cfg.priors.calib_trans = 1e-6;
  cfg.priors.calib_time = 1e-6;
  const EstimatorOutput out = run_estimator(cfg, sim.records, &sim.truth);
  REQUIRE(out.ok);
  REQUIRE(!out.trajectory.empty());
  const TruthSample ts = interpolate_truth(sim.truth, out.trajectory.back().t);
  CHECK((ts.p - out.trajectory.back().p).norm() < 1e-3);
  CHECK(out.failed_updates == 0);
}

TEST_CASE("covariance stays symmetric PSD through the pipeline") {
  const SimOutput sim = short_sim(4.0, false);
  EstimatorConfig cfg = default_estimator_config();
  cfg.init_mode = InitMode::TruthPerturbed;
  const EstimatorOutput out = run_estimator(cfg, sim.records, &sim.truth);
  REQUIRE(out.ok);
  CHECK((out.state.cov - out.state.cov.transpose()).norm() < 1e-10);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(out.state.cov).eigenvalues().minCoeff() > -1e-9);
  CHECK(static_cast<int>(out.state.cam_clones.size()) <= cfg.max_cam_clones);
  CHECK(static_cast<int>(out.state.lidar_clones.size()) <= cfg.max_lidar_clones);
}

TEST_CASE("clone windows stay time ordered") {
  const SimOutput sim = short_sim(4.0, false);
  EstimatorConfig cfg = truth_config();
  const EstimatorOutput out = run_estimator(cfg, sim.records, &sim.truth);
  REQUIRE(out.ok);
  for (size_t i = 1; i < out.state.cam_clones.size(); ++i) {
    CHECK(out.state.cam_clones[i].imu_time > out.state.cam_clones[i - 1].imu_time);
  }
  for (size_t i = 1; i < out.state.lidar_clones.size(); ++i) {
    CHECK(out.state.lidar_clones[i].imu_time > out.state.lidar_clones[i - 1].imu_time);
  }
}

TEST_CASE("static initialization aligns gravity") {
  const SimOutput sim = short_sim(6.0, false);
  EstimatorConfig cfg = default_estimator_config();
  cfg.init_mode = InitMode::Static;
  // static init assumes a resting start; the default trajectory moves, so
  // just verify the pipeline runs and produces output
  const EstimatorOutput out = run_estimator(cfg, sim.records);
  CHECK(out.ok);
  CHECK(!out.trajectory.empty());
}

TEST_CASE("disabled modalities are skipped entirely") {
  const SimOutput sim = short_sim(4.0, false);
  EstimatorConfig cfg = truth_config();
  cfg.use_lidar = false;
  const EstimatorOutput cam_only = run_estimator(cfg, sim.records, &sim.truth);
  CHECK(cam_only.ok);
  CHECK(cam_only.lidar_residuals_accepted == 0);
  CHECK(cam_only.state.lidar_clones.empty());
  cfg.use_lidar = true;
  cfg.use_camera = false;
  const EstimatorOutput lidar_only = run_estimator(cfg, sim.records, &sim.truth);
  CHECK(lidar_only.ok);
  CHECK(lidar_only.vision_tracks_used == 0);
  CHECK(lidar_only.state.cam_clones.empty());
}

TEST_CASE("divergence guard aborts with a diagnostic") {
  const SimOutput sim = short_sim(4.0, false);
  EstimatorConfig cfg = truth_config();
  cfg.divergence_position_var = 1e-9;  // impossible bound
  const EstimatorOutput out = run_estimator(cfg, sim.records, &sim.truth);
  CHECK_FALSE(out.ok);
  CHECK(out.abort_reason.find("divergence") != std::string::npos);
}

TEST_CASE("truth-based initialization without truth aborts cleanly") {
  const SimOutput sim = short_sim(2.0, false);
  const EstimatorOutput out = run_estimator(truth_config(), sim.records, nullptr);
  CHECK_FALSE(out.ok);
  CHECK(!out.abort_reason.empty());
}

TEST_CASE("calibration sigma history is populated and positive") {
  const SimOutput sim = short_sim(3.0, false);
  EstimatorConfig cfg = truth_config();
  const EstimatorOutput out = run_estimator(cfg, sim.records, &sim.truth);
  REQUIRE(out.ok);
  REQUIRE(!out.calibration.empty());
  for (int i = 0; i < 14; ++i) CHECK(out.calibration.back().sigma(i) > 0.0);
  // uncertainty shrinks over the run
  CHECK(out.calibration.back().sigma.sum() < out.calibration.front().sigma.sum());
}
