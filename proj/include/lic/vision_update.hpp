#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "lic/state.hpp"

namespace lic {

struct TrackObservation {
  double clone_time = 0.0;      // corrected IMU-clock time of the observing clone
  Eigen::Vector2d uv = Eigen::Vector2d::Zero();  // normalized image coordinates
};

struct FeatureTrack {
  std::uint64_t id = 0;
  std::vector<TrackObservation> observations;
};

struct CameraModel {
  double fx = 300.0, fy = 300.0;
  double cx = 320.0, cy = 240.0;
  int width = 640, height = 480;
};

enum class TriangulationStatus { Ok, TooFewObservations, MissingClone, IllConditioned, BehindCamera };

struct TriangulationResult {
  TriangulationStatus status = TriangulationStatus::Ok;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();  // feature in the global frame
};

struct TriangulationParams {
  int max_gauss_newton_iters = 5;
  double min_parallax_deg = 0.5;   // largest subtended angle below this -> IllConditioned
  double min_depth = 0.05;         // [m]
};

// Linear bearing intersection from the camera clones followed by a few
// Gauss-Newton steps on the reprojection error.
TriangulationResult triangulate(const FeatureTrack &track, const FullState &state,
                                const TriangulationParams &params);

struct VisualJacobians {
  Eigen::VectorXd residual;   // 2 rows per observation, z - h(x_hat)
  Eigen::MatrixXd h_state;    // nonzero on observing clones + camera calib
  Eigen::MatrixXd h_feature;  // 2k x 3
};

// Returns nothing when an observation has no matching camera clone.
std::optional<VisualJacobians> visual_residual_jacobians(const FeatureTrack &track, const Eigen::Vector3d &point,
                                                         const FullState &state);

struct ProjectedResidual {
  Eigen::VectorXd residual;   // rows(h_state) - 3
  Eigen::MatrixXd jacobian;
};

// Left-multiplies by an orthonormal basis of the left nullspace of
// h_feature; white noise keeps its variance. Returns nothing when h_feature
// is rank deficient (the track is dropped).
std::optional<ProjectedResidual> nullspace_project(const Eigen::VectorXd &residual, const Eigen::MatrixXd &h_state,
                                                   const Eigen::MatrixXd &h_feature);

// Camera pose composed from an IMU clone and the camera extrinsics.
struct CameraPose {
  Eigen::Matrix3d r_cfromg;
  Eigen::Vector3d p_cing;
};
CameraPose camera_pose(const ClonePose &clone, const SensorExtrinsics &calib);

}  // namespace lic
