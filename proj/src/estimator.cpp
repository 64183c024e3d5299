#include "lic/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>

#include "lic/cloning.hpp"

namespace lic {

namespace {

struct LiveTrack {
  FeatureTrack track;
  double last_obs_time = -1.0;
};

class Pipeline {
 public:
  Pipeline(const EstimatorConfig &cfg, const std::vector<TruthSample> *truth) : cfg_(cfg), truth_(truth) {
    state_.cam_calib = cfg.cam_calib;
    state_.lidar_calib = cfg.lidar_calib;
    state_.imu.gyro_bias = cfg.init_gyro_bias;
    state_.imu.accel_bias = cfg.init_accel_bias;
  }

  void push(const SensorRecord &rec) {
    if (!out_.ok) return;
    if (const ImuRecord *imu = std::get_if<ImuRecord>(&rec)) {
      imu_buf_.push_back(ImuSample{imu->t, imu->w, imu->a});
      if (!initialized_) try_initialize();
    } else if (std::holds_alternative<LidarRecord>(rec)) {
      if (cfg_.use_lidar) lidar_queue_.push_back(std::get<LidarRecord>(rec));
    } else if (std::holds_alternative<CamRecord>(rec)) {
      if (cfg_.use_camera) cam_queue_.push_back(std::get<CamRecord>(rec));
    }
    drain();
  }

  EstimatorOutput take() {
    out_.state = state_;
    out_.state_time = state_time_;
    return std::move(out_);
  }

 private:
  void fail(const std::string &reason) {
    out_.ok = false;
    out_.abort_reason = reason;
  }

  void try_initialize() {
    if (imu_buf_.empty()) return;
    if (cfg_.init_mode == InitMode::Truth || cfg_.init_mode == InitMode::TruthPerturbed) {
      if (truth_ == nullptr || truth_->empty()) {
        fail("truth-based initialization requested without a truth trajectory");
        return;
      }
      const double t0 = std::max(imu_buf_.front().timestamp, truth_->front().t);
      if (imu_buf_.back().timestamp < t0) return;
      const TruthSample s = interpolate_truth(*truth_, t0);
      state_.imu.orientation = s.q;
      state_.imu.position = s.p;
      state_.imu.velocity = s.v;
      set_prior_covariance();
      if (cfg_.init_mode == InitMode::TruthPerturbed) sample_initial_error();
      state_time_ = t0;
      initialized_ = true;
      return;
    }
    // Static: gravity-aligned orientation from the first second of
    // accelerometer means, zero velocity, origin position.
    const double t0 = imu_buf_.front().timestamp;
    if (imu_buf_.back().timestamp - t0 < cfg_.static_init_window) return;
    Eigen::Vector3d mean_a = Eigen::Vector3d::Zero();
    int count = 0;
    for (const ImuSample &s : imu_buf_) {
      if (s.timestamp - t0 > cfg_.static_init_window) break;
      mean_a += s.linear_acceleration;
      ++count;
    }
    mean_a /= count;
    const Eigen::Vector3d down = cfg_.imu_noise.gravity.normalized();
    const Eigen::Vector3d target = (-mean_a).normalized();  // gravity direction in the body frame
    const Eigen::Vector3d axis = down.cross(target);
    const double angle = std::atan2(axis.norm(), down.dot(target));
    state_.imu.orientation = axis.norm() > 1e-12 ? quat_from_rotvec(Eigen::Vector3d(-angle * axis.normalized()))
                                                 : quat_identity();
    set_prior_covariance();
    state_time_ = t0 + cfg_.static_init_window;
    initialized_ = true;
  }

  void set_prior_covariance() {
    const PriorSigmas &p = cfg_.priors;
    Eigen::VectorXd d(StateIndexMap::kCloneBase);
    d.segment<3>(StateIndexMap::kImuTheta).setConstant(p.orientation * p.orientation);
    d.segment<3>(StateIndexMap::kImuGyroBias).setConstant(p.gyro_bias * p.gyro_bias);
    d.segment<3>(StateIndexMap::kImuVelocity).setConstant(p.velocity * p.velocity);
    d.segment<3>(StateIndexMap::kImuAccelBias).setConstant(p.accel_bias * p.accel_bias);
    d.segment<3>(StateIndexMap::kImuPosition).setConstant(p.position * p.position);
    for (int base : {StateIndexMap::kCamCalibTheta, StateIndexMap::kLidarCalibTheta}) {
      d.segment<3>(base).setConstant(p.calib_rot * p.calib_rot);
      d.segment<3>(base + 3).setConstant(p.calib_trans * p.calib_trans);
      d(base + 6) = p.calib_time * p.calib_time;
    }
    state_.cov = d.asDiagonal();
  }

  void sample_initial_error() {
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(state_.error_dim());
    const int limit = cfg_.perturb_calib ? StateIndexMap::kCloneBase : ImuState::kErrorDim;
    for (int i = 0; i < limit; ++i) {
      delta(i) = std::sqrt(state_.cov(i, i)) * gauss(rng);
    }
    state_ = boxplus(state_, delta);
  }

  bool covered(double t) const { return !imu_buf_.empty() && imu_buf_.back().timestamp >= t; }

  static bool clone_time_taken(const std::vector<ClonePose> &window, double t) {
    return !window.empty() && t <= window.back().imu_time + 1e-9;
  }

  void drain() {
    while (initialized_ && out_.ok) {
      const bool has_lidar = !lidar_queue_.empty();
      const bool has_cam = !cam_queue_.empty();
      if (!has_lidar && !has_cam) return;
      const double t_lidar =
          has_lidar ? corrected_imu_time(lidar_queue_.front().t, state_.lidar_calib.time_offset) : 1e300;
      const double t_cam = has_cam ? corrected_imu_time(cam_queue_.front().t, state_.cam_calib.time_offset) : 1e300;
      if (t_lidar <= t_cam) {
        if (!covered(t_lidar)) return;
        const LidarRecord rec = std::move(lidar_queue_.front());
        lidar_queue_.pop_front();
        process_lidar(rec, t_lidar);
      } else {
        if (!covered(t_cam)) return;
        const CamRecord rec = std::move(cam_queue_.front());
        cam_queue_.pop_front();
        process_cam(rec, t_cam);
      }
      prune_imu_buffer();
    }
  }

  void prune_imu_buffer() {
    const double keep_from = state_time_ - 2.0 * cfg_.max_imu_gap;
    while (imu_buf_.size() > 2 && imu_buf_[1].timestamp < keep_from) imu_buf_.pop_front();
  }

  bool propagate_to(double t) {
    // The deque is drained from the front only, so the contiguous span holds.
    const std::vector<ImuSample> samples(imu_buf_.begin(), imu_buf_.end());
    try {
      propagate_with_covariance(state_, samples, cfg_.imu_noise, state_time_, t, cfg_.max_imu_gap);
    } catch (const std::exception &e) {
      fail(std::string("propagation failed: ") + e.what());
      return false;
    }
    state_time_ = t;
    return true;
  }

  Eigen::Vector3d omega_hat_at(double t) const {
    const std::vector<ImuSample> samples(imu_buf_.begin(), imu_buf_.end());
    return interpolate_imu(samples, t, cfg_.max_imu_gap).angular_velocity - state_.imu.gyro_bias;
  }

  void process_lidar(const LidarRecord &rec, double t_hat) {
    if (t_hat < state_time_ - 1e-9 || clone_time_taken(state_.lidar_clones, t_hat)) {
      ++out_.records_dropped;
      return;
    }
    if (!propagate_to(t_hat)) return;
    if (static_cast<int>(state_.lidar_clones.size()) >= cfg_.max_lidar_clones) {
      state_ = marginalize_clone(state_, SensorKind::Lidar, 0);
    }
    augment_clone(state_, SensorKind::Lidar, omega_hat_at(t_hat), t_hat, cfg_.max_lidar_clones);

    LidarScan scan;
    scan.timestamp = rec.t;
    scan.rings = rec.rings;
    std::vector<LidarFeature> features = extract_features(scan, cfg_.extraction);

    const int idx_l1 = static_cast<int>(state_.lidar_clones.size()) - 1;
    int idx_l = -1;
    if (prev_clone_time_) {
      for (int i = 0; i < idx_l1; ++i) {
        if (std::abs(state_.lidar_clones[i].imu_time - *prev_clone_time_) < 1e-9) idx_l = i;
      }
    }
    if (idx_l >= 0 && prev_index_) {
      const RelativePose rel =
          relative_lidar_transform(state_.lidar_calib, state_.lidar_clones[idx_l], state_.lidar_clones[idx_l1]);
      std::vector<ResidualBlock> blocks;
      for (const LidarFeature &f : features) {
        const Eigen::Vector3d projected = project_point(f.position, rel);
        const auto corr = prev_index_->find_correspondence(f.position, projected, f.kind, cfg_.correspondence);
        if (!corr) continue;
        LidarResidual lr;
        try {
          lr = residual_jacobian(state_, *corr, idx_l, idx_l1, cfg_.lidar_point_sigma);
        } catch (const std::invalid_argument &) {
          continue;  // degenerate anchors
        }
        if (f.kind == LidarFeatureKind::Edge && std::abs(lr.value) < cfg_.min_edge_distance) continue;
        if (cfg_.gate_lidar && !mahalanobis_gate(lr, state_.cov, cfg_.gating_confidence)) {
          ++out_.lidar_residuals_rejected;
          continue;
        }
        ++out_.lidar_residuals_accepted;
        ResidualBlock b;
        b.residual = Eigen::VectorXd::Constant(1, -lr.value);
        b.jacobian = lr.jacobian;
        b.noise_var = Eigen::VectorXd::Constant(1, lr.noise_var);
        blocks.push_back(std::move(b));
      }
      apply_update(blocks);
    }

    prev_index_.emplace(std::move(features));
    prev_clone_time_ = t_hat;
    post_event(t_hat);
  }

  void process_cam(const CamRecord &rec, double t_hat) {
    if (t_hat < state_time_ - 1e-9 || clone_time_taken(state_.cam_clones, t_hat)) {
      ++out_.records_dropped;
      return;
    }
    if (!propagate_to(t_hat)) return;
    if (static_cast<int>(state_.cam_clones.size()) >= cfg_.max_cam_clones) marginalize_camera_overflow();
    augment_clone(state_, SensorKind::Camera, omega_hat_at(t_hat), t_hat, cfg_.max_cam_clones);

    for (const CamRecord::Obs &obs : rec.tracks) {
      LiveTrack &lt = live_tracks_[obs.id];
      lt.track.id = obs.id;
      lt.track.observations.push_back({t_hat, Eigen::Vector2d(obs.u, obs.v)});
      lt.last_obs_time = t_hat;
    }

    // Consume tracks that just ended or that span the whole window.
    std::vector<ResidualBlock> blocks;
    for (auto it = live_tracks_.begin(); it != live_tracks_.end();) {
      const bool seen_now = it->second.last_obs_time == t_hat;
      const bool full_window =
          static_cast<int>(it->second.track.observations.size()) >= cfg_.max_cam_clones;
      if (seen_now && !full_window) {
        ++it;
        continue;
      }
      if (it->second.track.observations.size() >= 2) {
        if (auto block = build_vision_block(it->second.track)) blocks.push_back(std::move(*block));
      }
      it = live_tracks_.erase(it);
    }
    apply_update(blocks);
    post_event(t_hat);
  }

  std::optional<ResidualBlock> build_vision_block(const FeatureTrack &track) {
    const TriangulationResult tri = triangulate(track, state_, cfg_.triangulation);
    if (tri.status != TriangulationStatus::Ok) {
      ++out_.vision_tracks_rejected;
      return std::nullopt;
    }
    auto jac = visual_residual_jacobians(track, tri.point, state_);
    if (!jac) {
      ++out_.vision_tracks_rejected;
      return std::nullopt;
    }
    // Whiten with the per-axis pixel noise mapped into normalized
    // coordinates, then project the feature out.
    const double su = cfg_.pixel_sigma / cfg_.camera.fx;
    const double sv = cfg_.pixel_sigma / cfg_.camera.fy;
    for (int i = 0; i < jac->residual.size() / 2; ++i) {
      jac->residual(2 * i) /= su;
      jac->residual(2 * i + 1) /= sv;
      jac->h_state.row(2 * i) /= su;
      jac->h_state.row(2 * i + 1) /= sv;
      jac->h_feature.row(2 * i) /= su;
      jac->h_feature.row(2 * i + 1) /= sv;
    }
    const auto projected = nullspace_project(jac->residual, jac->h_state, jac->h_feature);
    if (!projected) {
      ++out_.vision_tracks_rejected;
      return std::nullopt;
    }
    if (cfg_.gate_vision) {
      const Eigen::MatrixXd s = projected->jacobian * state_.cov * projected->jacobian.transpose() +
                                Eigen::MatrixXd::Identity(projected->residual.size(), projected->residual.size());
      const double gamma = projected->residual.dot(s.ldlt().solve(projected->residual));
      if (gamma > chi_squared_quantile(static_cast<int>(projected->residual.size()), cfg_.gating_confidence)) {
        ++out_.vision_tracks_rejected;
        return std::nullopt;
      }
    }
    ++out_.vision_tracks_used;
    ResidualBlock b;
    b.residual = projected->residual;
    b.jacobian = projected->jacobian;
    b.noise_var = Eigen::VectorXd::Ones(projected->residual.size());
    return b;
  }

  void apply_update(const std::vector<ResidualBlock> &blocks) {
    if (blocks.empty()) return;
    const ResidualBlock batch = qr_compress(stack_blocks(blocks));
    if (!ekf_update(state_, batch)) ++out_.failed_updates;
  }

  void marginalize_camera_overflow() {
    // Oldest clone goes, unless an active track still references it.
    int victim = 0;
    const double t_oldest = state_.cam_clones.front().imu_time;
    for (const auto &[id, lt] : live_tracks_) {
      for (const TrackObservation &obs : lt.track.observations) {
        if (std::abs(obs.clone_time - t_oldest) < 1e-9) {
          victim = std::min(1, static_cast<int>(state_.cam_clones.size()) - 1);
          break;
        }
      }
      if (victim != 0) break;
    }
    const double t_victim = state_.cam_clones[victim].imu_time;
    for (auto &[id, lt] : live_tracks_) {
      auto &obs = lt.track.observations;
      obs.erase(std::remove_if(obs.begin(), obs.end(),
                               [&](const TrackObservation &o) { return std::abs(o.clone_time - t_victim) < 1e-9; }),
                obs.end());
    }
    state_ = marginalize_clone(state_, SensorKind::Camera, victim);
  }

  void post_event(double t) {
    out_.trajectory.push_back({t, state_.imu.orientation, state_.imu.position});

    CalibrationRecord cal;
    cal.t = t;
    cal.cam = state_.cam_calib;
    cal.lidar = state_.lidar_calib;
    for (int i = 0; i < 7; ++i) {
      cal.sigma(i) = std::sqrt(state_.cov(StateIndexMap::kCamCalibTheta + i, StateIndexMap::kCamCalibTheta + i));
      cal.sigma(7 + i) =
          std::sqrt(state_.cov(StateIndexMap::kLidarCalibTheta + i, StateIndexMap::kLidarCalibTheta + i));
    }
    out_.calibration.push_back(cal);

    if (truth_ != nullptr && !truth_->empty()) {
      const TruthSample s = interpolate_truth(*truth_, t);
      Eigen::Matrix<double, 6, 1> err;
      err.head<3>() = rotvec_from_quat(quat_multiply(s.q, quat_inverse(state_.imu.orientation)));
      err.tail<3>() = s.p - state_.imu.position;
      Eigen::Matrix<double, 6, 6> pose_cov;
      const int ith = StateIndexMap::kImuTheta, ip = StateIndexMap::kImuPosition;
      pose_cov.block<3, 3>(0, 0) = state_.cov.block<3, 3>(ith, ith);
      pose_cov.block<3, 3>(0, 3) = state_.cov.block<3, 3>(ith, ip);
      pose_cov.block<3, 3>(3, 0) = state_.cov.block<3, 3>(ip, ith);
      pose_cov.block<3, 3>(3, 3) = state_.cov.block<3, 3>(ip, ip);
      out_.nees.emplace_back(t, err.dot(pose_cov.ldlt().solve(err)));
    }

    const double pos_var = state_.cov.block<3, 3>(StateIndexMap::kImuPosition, StateIndexMap::kImuPosition).trace();
    if (pos_var > cfg_.divergence_position_var) {
      fail("position covariance trace " + std::to_string(pos_var) + " exceeds divergence threshold");
    }
  }

  EstimatorConfig cfg_;
  const std::vector<TruthSample> *truth_;
  FullState state_;
  double state_time_ = 0.0;
  bool initialized_ = false;
  std::deque<ImuSample> imu_buf_;
  std::deque<LidarRecord> lidar_queue_;
  std::deque<CamRecord> cam_queue_;
  std::optional<FeatureIndex> prev_index_;
  std::optional<double> prev_clone_time_;
  std::map<std::uint64_t, LiveTrack> live_tracks_;
  EstimatorOutput out_;
};

}  // namespace

EstimatorOutput run_estimator(const EstimatorConfig &config, const std::vector<SensorRecord> &records,
                              const std::vector<TruthSample> *truth) {
  if (config.max_cam_clones < 2 || config.max_lidar_clones < 2) {
    EstimatorOutput out;
    out.ok = false;
    out.abort_reason = "window sizes must be at least 2";
    return out;
  }
  Pipeline pipeline(config, truth);
  for (const SensorRecord &rec : records) {
    pipeline.push(rec);
  }
  return pipeline.take();
}

}  // namespace lic
