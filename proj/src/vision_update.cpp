#include "lic/vision_update.hpp"

#include <cmath>

namespace lic {

namespace {

const ClonePose *find_clone(const FullState &state, double t) {
  for (const ClonePose &c : state.cam_clones) {
    if (std::abs(c.imu_time - t) < 1e-9) return &c;
  }
  return nullptr;
}

int find_clone_index(const FullState &state, double t) {
  for (int i = 0; i < static_cast<int>(state.cam_clones.size()); ++i) {
    if (std::abs(state.cam_clones[i].imu_time - t) < 1e-9) return i;
  }
  return -1;
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Eigen::Vector3d &p) {
  Eigen::Matrix<double, 2, 3> j;
  const double iz = 1.0 / p.z();
  j << iz, 0.0, -p.x() * iz * iz,
       0.0, iz, -p.y() * iz * iz;
  return j;
}

}  // namespace

CameraPose camera_pose(const ClonePose &clone, const SensorExtrinsics &calib) {
  CameraPose out;
  const Eigen::Matrix3d r_ci = quat_to_rot(calib.rotation);
  const Eigen::Matrix3d r_ig = quat_to_rot(clone.orientation);
  out.r_cfromg = r_ci * r_ig;
  out.p_cing = clone.position - r_ig.transpose() * r_ci.transpose() * calib.translation;
  return out;
}

TriangulationResult triangulate(const FeatureTrack &track, const FullState &state,
                                const TriangulationParams &params) {
  TriangulationResult out;
  if (track.observations.size() < 2) {
    out.status = TriangulationStatus::TooFewObservations;
    return out;
  }

  std::vector<CameraPose> poses;
  std::vector<Eigen::Vector3d> bearings_global;
  poses.reserve(track.observations.size());
  for (const TrackObservation &obs : track.observations) {
    const ClonePose *clone = find_clone(state, obs.clone_time);
    if (clone == nullptr) {
      out.status = TriangulationStatus::MissingClone;
      return out;
    }
    poses.push_back(camera_pose(*clone, state.cam_calib));
    const Eigen::Vector3d m(obs.uv.x(), obs.uv.y(), 1.0);
    bearings_global.push_back(poses.back().r_cfromg.transpose() * m.normalized());
  }

  double max_angle = 0.0;
  for (size_t a = 0; a < bearings_global.size(); ++a) {
    for (size_t b = a + 1; b < bearings_global.size(); ++b) {
      const double c = std::clamp(bearings_global[a].dot(bearings_global[b]), -1.0, 1.0);
      max_angle = std::max(max_angle, std::acos(c));
    }
  }
  if (max_angle < params.min_parallax_deg * M_PI / 180.0) {
    out.status = TriangulationStatus::IllConditioned;
    return out;
  }

  // Linear intersection: skew(m) * R_CfromG * (p_f - p_C) = 0 per view.
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b = Eigen::Vector3d::Zero();
  for (size_t i = 0; i < poses.size(); ++i) {
    const Eigen::Vector3d m(track.observations[i].uv.x(), track.observations[i].uv.y(), 1.0);
    const Eigen::Matrix3d sm = skew(m) * poses[i].r_cfromg;
    a.noalias() += sm.transpose() * sm;
    b.noalias() += sm.transpose() * sm * poses[i].p_cing;
  }
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(a);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < 1e-12 * ldlt.vectorD().maxCoeff()) {
    out.status = TriangulationStatus::IllConditioned;
    return out;
  }
  Eigen::Vector3d point = ldlt.solve(b);

  // Gauss-Newton refinement on the reprojection error.
  for (int it = 0; it < params.max_gauss_newton_iters; ++it) {
    Eigen::Matrix3d hess = Eigen::Matrix3d::Zero();
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    bool behind = false;
    for (size_t i = 0; i < poses.size(); ++i) {
      const Eigen::Vector3d pc = poses[i].r_cfromg * (point - poses[i].p_cing);
      if (pc.z() < params.min_depth) {
        behind = true;
        break;
      }
      const Eigen::Vector2d err = track.observations[i].uv - Eigen::Vector2d(pc.x() / pc.z(), pc.y() / pc.z());
      const Eigen::Matrix<double, 2, 3> j = projection_jacobian(pc) * poses[i].r_cfromg;
      hess.noalias() += j.transpose() * j;
      grad.noalias() += j.transpose() * err;
    }
    if (behind) break;
    const Eigen::Vector3d step = hess.ldlt().solve(grad);
    point += step;
    if (step.norm() < 1e-12) break;
  }

  for (const CameraPose &pose : poses) {
    const Eigen::Vector3d pc = pose.r_cfromg * (point - pose.p_cing);
    if (pc.z() < params.min_depth) {
      out.status = TriangulationStatus::BehindCamera;
      return out;
    }
  }
  out.status = TriangulationStatus::Ok;
  out.point = point;
  return out;
}

std::optional<VisualJacobians> visual_residual_jacobians(const FeatureTrack &track, const Eigen::Vector3d &point,
                                                         const FullState &state) {
  const StateIndexMap map = state.index_map();
  const int k = static_cast<int>(track.observations.size());
  VisualJacobians out;
  out.residual.resize(2 * k);
  out.h_state = Eigen::MatrixXd::Zero(2 * k, map.dim());
  out.h_feature = Eigen::MatrixXd::Zero(2 * k, 3);

  const Eigen::Matrix3d r_ci = quat_to_rot(state.cam_calib.rotation);
  for (int i = 0; i < k; ++i) {
    const int idx = find_clone_index(state, track.observations[i].clone_time);
    if (idx < 0) return std::nullopt;
    const ClonePose &clone = state.cam_clones[idx];
    const Eigen::Matrix3d r_ig = quat_to_rot(clone.orientation);
    const Eigen::Vector3d p_fini = r_ig * (point - clone.position);
    const Eigen::Vector3d p_finc = r_ci * p_fini + state.cam_calib.translation;
    const Eigen::Matrix<double, 2, 3> proj = projection_jacobian(p_finc);

    out.residual.segment<2>(2 * i) =
        track.observations[i].uv - Eigen::Vector2d(p_finc.x() / p_finc.z(), p_finc.y() / p_finc.z());
    out.h_state.block<2, 3>(2 * i, map.cam_clone(idx)) = proj * r_ci * skew(p_fini);
    out.h_state.block<2, 3>(2 * i, map.cam_clone(idx) + 3) = -proj * r_ci * r_ig;
    out.h_state.block<2, 3>(2 * i, StateIndexMap::kCamCalibTheta) = proj * skew(r_ci * p_fini);
    out.h_state.block<2, 3>(2 * i, StateIndexMap::kCamCalibPosition) = proj;
    out.h_feature.block<2, 3>(2 * i, 0) = proj * r_ci * r_ig;
  }
  return out;
}

std::optional<ProjectedResidual> nullspace_project(const Eigen::VectorXd &residual, const Eigen::MatrixXd &h_state,
                                                   const Eigen::MatrixXd &h_feature) {
  const int rows = static_cast<int>(h_feature.rows());
  if (rows <= 3) return std::nullopt;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(h_feature);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(3).triangularView<Eigen::Upper>();
  if (std::abs(r(2, 2)) < 1e-10 * (1.0 + std::abs(r(0, 0)))) return std::nullopt;
  const Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd basis = q.rightCols(rows - 3);  // left nullspace of h_feature
  ProjectedResidual out;
  out.residual = basis.transpose() * residual;
  out.jacobian = basis.transpose() * h_state;
  return out;
}

}  // namespace lic
