#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lic/lidar_frontend.hpp"
#include "lic/state.hpp"

namespace lic {

// Scalar point-to-line / point-to-plane residual with its row Jacobian over
// the full error state. The row is nonzero only on the two involved LiDAR
// clones and the LiDAR extrinsic rotation/translation.
struct LidarResidual {
  double value = 0.0;               // distance at the current estimate [m]
  Eigen::RowVectorXd jacobian;      // d(distance)/d(error state), 1 x dim
  double noise_var = 0.0;           // C_r [m^2]
};

// Perpendicular distance from pi to the line through pj, pk.
// Throws std::invalid_argument when ||pj - pk|| < 1e-6 (degenerate anchors).
double edge_residual(const Eigen::Vector3d &pi, const Eigen::Vector3d &pj, const Eigen::Vector3d &pk);

// Distance from pi to the plane through pj, pk, pl (absolute value).
// Throws std::invalid_argument when the anchors are collinear.
double surf_residual(const Eigen::Vector3d &pi, const Eigen::Vector3d &pj, const Eigen::Vector3d &pk,
                     const Eigen::Vector3d &pl);

struct EdgeGeometry {
  double distance = 0.0;
  Eigen::RowVector3d d_pi, d_pj, d_pk;  // gradients of the distance
};
EdgeGeometry edge_residual_gradients(const Eigen::Vector3d &pi, const Eigen::Vector3d &pj,
                                     const Eigen::Vector3d &pk);

// The plane distance is kept signed internally so the linearization stays
// smooth through zero; surf_residual reports the absolute value.
struct SurfGeometry {
  double signed_distance = 0.0;
  Eigen::RowVector3d d_pi, d_pj, d_pk, d_pl;
};
SurfGeometry surf_residual_gradients(const Eigen::Vector3d &pi, const Eigen::Vector3d &pj,
                                     const Eigen::Vector3d &pk, const Eigen::Vector3d &pl);

// Chain rule through the cross-scan projection: the distance gradient at the
// projected point composed with the partials of the projected point w.r.t.
// the two clone poses and the LiDAR extrinsics. clone_l/clone_l1 are indices
// into the LiDAR clone window. point_sigma is the isotropic per-point noise
// used for C_r.
LidarResidual residual_jacobian(const FullState &state, const Correspondence &corr, int clone_l, int clone_l1,
                                double point_sigma);

// C_r = sum_x J_x C_x J_x^T over the raw current point and the anchors.
// point_covs holds the 3x3 covariances in order [point, anchors...]; its
// size must be 1 + anchor_count.
double propagate_point_noise(const Correspondence &corr, const RelativePose &rel,
                             const std::vector<Eigen::Matrix3d> &point_covs);

// Accept iff value^2 / (H P H^T + C_r) <= chi2_1(confidence). A degenerate
// denominator rejects.
bool mahalanobis_gate(const LidarResidual &res, const Eigen::MatrixXd &cov, double confidence);

}  // namespace lic
