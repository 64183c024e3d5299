#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "lic/state.hpp"

namespace lic {

// Ring-organized scan: rings[r] holds the points of elevation channel r,
// ordered by azimuth, in the LiDAR frame. The timestamp is the scan
// reference time in the LiDAR clock.
struct LidarScan {
  double timestamp = 0.0;
  std::vector<std::vector<Eigen::Vector3d>> rings;
};

enum class LidarFeatureKind { Edge, Surf };

struct LidarFeature {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  int ring = 0;
  LidarFeatureKind kind = LidarFeatureKind::Surf;
  double curvature = 0.0;
};

struct FeatureExtractionParams {
  int curvature_half_window = 5;   // neighbors per side in the curvature sum
  double edge_threshold = 0.03;    // curvature above -> edge candidate
  double surf_threshold = 0.005;   // curvature below -> surf candidate
  int sectors_per_ring = 6;
  int max_edge_per_sector = 2;
  int max_surf_per_sector = 6;
  double min_range = 0.3;          // points closer than this are skipped
};

// Per-ring curvature c_i = ||sum_j (p_j - p_i)|| / (|S| * ||p_i||) over a
// symmetric window, then per-sector selection with neighbor suppression.
// Rings with fewer than 2k+1 points are skipped.
std::vector<LidarFeature> extract_features(const LidarScan &scan, const FeatureExtractionParams &params);

struct RelativePose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Transform taking points of the later scan frame L_{l+1} into the earlier
// scan frame L_l, composed from the two IMU clones and the LiDAR extrinsics.
RelativePose relative_lidar_transform(const SensorExtrinsics &lidar_calib, const ClonePose &clone_l,
                                      const ClonePose &clone_l1);

inline Eigen::Vector3d project_point(const Eigen::Vector3d &p, const RelativePose &rel) {
  return rel.rotation * p + rel.translation;
}

// Minimal 3D KD-tree over a fixed point set; nearest-neighbor queries accept
// a per-index filter so ring constraints can be expressed directly.
class KdTree3 {
 public:
  KdTree3() = default;
  explicit KdTree3(std::vector<Eigen::Vector3d> points);

  // Index of the closest accepted point within max_dist, or -1.
  int nearest(const Eigen::Vector3d &query, double max_dist,
              const std::function<bool(int)> &accept = nullptr) const;

  int size() const { return static_cast<int>(points_.size()); }
  const Eigen::Vector3d &point(int i) const { return points_[i]; }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };
  int build(std::vector<int> &idx, int begin, int end, int depth);
  void search(int node, const Eigen::Vector3d &query, const std::function<bool(int)> &accept, double &best_d2,
              int &best) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct Correspondence {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();      // feature in the current scan frame L_{l+1}
  Eigen::Vector3d projected = Eigen::Vector3d::Zero();  // same feature projected into L_l
  LidarFeatureKind kind = LidarFeatureKind::Surf;
  int anchor_count = 0;
  std::array<Eigen::Vector3d, 3> anchors;               // edge: j,k  surf: j,k,l
  std::array<int, 3> anchor_rings{-1, -1, -1};
};

struct CorrespondenceParams {
  double max_distance = 1.0;  // gate on every anchor [m]
};

// Feature set of one scan with one KD-tree per feature kind, immutable after
// construction and safe to share read-only.
class FeatureIndex {
 public:
  explicit FeatureIndex(std::vector<LidarFeature> features);

  // Edge: nearest edge anchor p_j on ring r plus the nearest anchor on ring
  // r-1 or r+1. Surf: nearest p_j, next-nearest on the same ring p_k, and the
  // nearest on an adjacent ring p_l. Empty when any anchor is missing, too
  // far, or non-distinct.
  std::optional<Correspondence> find_correspondence(const Eigen::Vector3d &point_current,
                                                    const Eigen::Vector3d &projected, LidarFeatureKind kind,
                                                    const CorrespondenceParams &params) const;

  const std::vector<LidarFeature> &features() const { return features_; }

 private:
  std::vector<LidarFeature> features_;
  std::vector<int> edge_ids_;      // indices into features_
  std::vector<int> surf_ids_;
  KdTree3 edge_tree_;
  KdTree3 surf_tree_;
};

}  // namespace lic
