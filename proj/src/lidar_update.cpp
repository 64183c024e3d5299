#include "lic/lidar_update.hpp"

#include <cmath>
#include <stdexcept>

#include "lic/update_engine.hpp"

namespace lic {

namespace {
constexpr double kMinEdgeBaseline = 1e-6;
constexpr double kMinPlaneNormal = 1e-9;
}  // namespace

double edge_residual(const Eigen::Vector3d &pi, const Eigen::Vector3d &pj, const Eigen::Vector3d &pk) {
  const Eigen::Vector3d e = pj - pk;
  const double base = e.norm();
  if (base < kMinEdgeBaseline) throw std::invalid_argument("edge_residual: anchors closer than 1e-6 m");
  return (pi - pj).cross(pi - pk).norm() / base;
}

EdgeGeometry edge_residual_gradients(const Eigen::Vector3d &pi, const Eigen::Vector3d &pj,
                                     const Eigen::Vector3d &pk) {
  const Eigen::Vector3d e = pj - pk;
  const double base = e.norm();
  if (base < kMinEdgeBaseline) throw std::invalid_argument("edge_residual: anchors closer than 1e-6 m");
  const Eigen::Vector3d d = (pi - pj).cross(pi - pk);
  const double dn = d.norm();
  EdgeGeometry out;
  out.distance = dn / base;
  // d_hat is undefined exactly on the line; callers skip near-zero residuals.
  const Eigen::Vector3d d_hat = dn > 1e-12 ? Eigen::Vector3d(d / dn) : Eigen::Vector3d::Zero();
  const Eigen::Vector3d e_hat = e / base;
  out.d_pi = (e.cross(d_hat) / base).transpose();
  out.d_pj = (d_hat.transpose() * skew(pi - pk)) / base - out.distance / base * e_hat.transpose();
  out.d_pk = -(d_hat.transpose() * skew(pi - pj)) / base + out.distance / base * e_hat.transpose();
  return out;
}

double surf_residual(const Eigen::Vector3d &pi, const Eigen::Vector3d &pj, const Eigen::Vector3d &pk,
                     const Eigen::Vector3d &pl) {
  return std::abs(surf_residual_gradients(pi, pj, pk, pl).signed_distance);
}

SurfGeometry surf_residual_gradients(const Eigen::Vector3d &pi, const Eigen::Vector3d &pj,
                                     const Eigen::Vector3d &pk, const Eigen::Vector3d &pl) {
  const Eigen::Vector3d u = pj - pk;
  const Eigen::Vector3d w = pj - pl;
  const Eigen::Vector3d n = u.cross(w);
  const double nn = n.norm();
  if (nn < kMinPlaneNormal) throw std::invalid_argument("surf_residual: collinear anchors");
  const Eigen::Vector3d n_hat = n / nn;
  const Eigen::Vector3d m = pi - pj;
  SurfGeometry out;
  out.signed_distance = m.dot(n_hat);
  const Eigen::RowVector3d dn = ((m - out.signed_distance * n_hat) / nn).transpose();
  out.d_pi = n_hat.transpose();
  out.d_pj = -n_hat.transpose() + dn * skew(pl - pk);
  out.d_pk = dn * skew(pj - pl);
  out.d_pl = dn * skew(pk - pj);
  return out;
}

namespace {

// Partials of the projected point (frame L_l) w.r.t. the error state blocks.
struct ProjectionPartials {
  Eigen::Matrix3d d_theta_l, d_pos_l, d_theta_l1, d_pos_l1, d_theta_cal, d_pos_cal;
  Eigen::Matrix3d rel_rotation;
};

ProjectionPartials projection_partials(const FullState &state, const ClonePose &clone_l,
                                       const ClonePose &clone_l1, const Eigen::Vector3d &point) {
  const Eigen::Matrix3d r_li = quat_to_rot(state.lidar_calib.rotation);    // R_LfromI
  const Eigen::Matrix3d r_il = quat_to_rot(clone_l.orientation);          // R_IlfromG
  const Eigen::Matrix3d r_il1 = quat_to_rot(clone_l1.orientation);        // R_Il1fromG
  const Eigen::Vector3d p_iinl = state.lidar_calib.translation;
  const Eigen::Vector3d p_lini = -r_li.transpose() * p_iinl;
  const Eigen::Vector3d dp = clone_l1.position - clone_l.position;

  const Eigen::Matrix3d b = r_il * r_il1.transpose();
  const Eigen::Vector3d s = r_li.transpose() * point + p_lini;   // feature in I_{l+1}
  const Eigen::Vector3d m = b * s + r_il * dp;                   // feature in I_l

  ProjectionPartials out;
  out.rel_rotation = r_li * b * r_li.transpose();
  out.d_theta_l = r_li * skew(m);
  out.d_pos_l = -r_li * r_il;
  out.d_theta_l1 = -r_li * b * skew(s);
  out.d_pos_l1 = r_li * r_il;
  const Eigen::Vector3d c = point - p_iinl;
  out.d_theta_cal = skew(out.rel_rotation * c) - out.rel_rotation * skew(c) + skew(r_li * r_il * dp);
  out.d_pos_cal = Eigen::Matrix3d::Identity() - out.rel_rotation;
  return out;
}

}  // namespace

LidarResidual residual_jacobian(const FullState &state, const Correspondence &corr, int clone_l, int clone_l1,
                                double point_sigma) {
  const StateIndexMap map = state.index_map();
  const ClonePose &cl = state.lidar_clones.at(clone_l);
  const ClonePose &cl1 = state.lidar_clones.at(clone_l1);

  RelativePose rel;
  const ProjectionPartials parts = projection_partials(state, cl, cl1, corr.point);
  rel.rotation = parts.rel_rotation;
  const Eigen::Matrix3d r_li = quat_to_rot(state.lidar_calib.rotation);
  const Eigen::Matrix3d r_il = quat_to_rot(cl.orientation);
  const Eigen::Matrix3d r_il1 = quat_to_rot(cl1.orientation);
  const Eigen::Vector3d p_lini = -r_li.transpose() * state.lidar_calib.translation;
  rel.translation = r_li * r_il *
                        (cl1.position - cl.position + r_il1.transpose() * p_lini) +
                    state.lidar_calib.translation;
  const Eigen::Vector3d projected = project_point(corr.point, rel);

  Eigen::RowVector3d grad;
  double value = 0.0;
  std::vector<Eigen::RowVector3d> anchor_grads;
  if (corr.kind == LidarFeatureKind::Edge) {
    const EdgeGeometry g = edge_residual_gradients(projected, corr.anchors[0], corr.anchors[1]);
    value = g.distance;
    grad = g.d_pi;
    anchor_grads = {g.d_pj, g.d_pk};
  } else {
    const SurfGeometry g = surf_residual_gradients(projected, corr.anchors[0], corr.anchors[1], corr.anchors[2]);
    value = g.signed_distance;
    grad = g.d_pi;
    anchor_grads = {g.d_pj, g.d_pk, g.d_pl};
  }

  LidarResidual out;
  out.value = value;
  out.jacobian = Eigen::RowVectorXd::Zero(map.dim());
  out.jacobian.segment<3>(map.lidar_clone(clone_l)) = grad * parts.d_theta_l;
  out.jacobian.segment<3>(map.lidar_clone(clone_l) + 3) = grad * parts.d_pos_l;
  out.jacobian.segment<3>(map.lidar_clone(clone_l1)) = grad * parts.d_theta_l1;
  out.jacobian.segment<3>(map.lidar_clone(clone_l1) + 3) = grad * parts.d_pos_l1;
  out.jacobian.segment<3>(StateIndexMap::kLidarCalibTheta) = grad * parts.d_theta_cal;
  out.jacobian.segment<3>(StateIndexMap::kLidarCalibPosition) = grad * parts.d_pos_cal;

  const Eigen::RowVector3d j_point = grad * rel.rotation;
  double cr = point_sigma * point_sigma * j_point.squaredNorm();
  for (const auto &ja : anchor_grads) cr += point_sigma * point_sigma * ja.squaredNorm();
  out.noise_var = cr;
  return out;
}

double propagate_point_noise(const Correspondence &corr, const RelativePose &rel,
                             const std::vector<Eigen::Matrix3d> &point_covs) {
  if (static_cast<int>(point_covs.size()) != corr.anchor_count + 1) {
    throw std::invalid_argument("propagate_point_noise: need one covariance per point");
  }
  const Eigen::Vector3d projected = project_point(corr.point, rel);
  Eigen::RowVector3d d_proj;
  std::vector<Eigen::RowVector3d> d_anchor;
  if (corr.kind == LidarFeatureKind::Edge) {
    const EdgeGeometry g = edge_residual_gradients(projected, corr.anchors[0], corr.anchors[1]);
    d_proj = g.d_pi;
    d_anchor = {g.d_pj, g.d_pk};
  } else {
    const SurfGeometry g = surf_residual_gradients(projected, corr.anchors[0], corr.anchors[1], corr.anchors[2]);
    d_proj = g.d_pi;
    d_anchor = {g.d_pj, g.d_pk, g.d_pl};
  }
  const Eigen::RowVector3d j_point = d_proj * rel.rotation;
  double cr = j_point * point_covs[0] * j_point.transpose();
  for (int a = 0; a < corr.anchor_count; ++a) {
    cr += d_anchor[a] * point_covs[a + 1] * d_anchor[a].transpose();
  }
  return cr;
}

bool mahalanobis_gate(const LidarResidual &res, const Eigen::MatrixXd &cov, double confidence) {
  const double denom = res.jacobian * cov * res.jacobian.transpose() + res.noise_var;
  if (!(denom > 0.0)) return false;
  const double m = res.value * res.value / denom;
  return m <= chi_squared_quantile(1, confidence);
}

}  // namespace lic
