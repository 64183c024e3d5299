#include "lic/lidar_frontend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lic {

std::vector<LidarFeature> extract_features(const LidarScan &scan, const FeatureExtractionParams &params) {
  std::vector<LidarFeature> out;
  const int k = params.curvature_half_window;
  for (int ring = 0; ring < static_cast<int>(scan.rings.size()); ++ring) {
    const auto &pts = scan.rings[ring];
    const int n = static_cast<int>(pts.size());
    if (n < 2 * k + 1) continue;

    std::vector<double> curvature(n, 0.0);
    std::vector<bool> valid(n, false);
    for (int i = k; i < n - k; ++i) {
      const double range = pts[i].norm();
      if (range < params.min_range) continue;
      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      for (int j = i - k; j <= i + k; ++j) {
        if (j == i) continue;
        sum += pts[j] - pts[i];
      }
      curvature[i] = sum.norm() / (2.0 * k * range);
      valid[i] = true;
    }

    // Per-sector caps with suppression of the neighbors of picked points so
    // features spread along the ring.
    const int usable = n - 2 * k;
    const int sectors = std::max(1, params.sectors_per_ring);
    std::vector<bool> suppressed(n, false);
    for (int s = 0; s < sectors; ++s) {
      const int begin = k + s * usable / sectors;
      const int end = k + (s + 1) * usable / sectors;
      std::vector<int> order;
      for (int i = begin; i < end; ++i) {
        if (valid[i]) order.push_back(i);
      }
      std::sort(order.begin(), order.end(), [&](int a, int b) { return curvature[a] > curvature[b]; });
      int edges = 0;
      for (int i : order) {
        if (edges >= params.max_edge_per_sector || curvature[i] < params.edge_threshold) break;
        if (suppressed[i]) continue;
        out.push_back({pts[i], ring, LidarFeatureKind::Edge, curvature[i]});
        ++edges;
        for (int j = std::max(0, i - k); j <= std::min(n - 1, i + k); ++j) suppressed[j] = true;
      }
      int surfs = 0;
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int i = *it;
        if (surfs >= params.max_surf_per_sector || curvature[i] > params.surf_threshold) break;
        if (suppressed[i]) continue;
        out.push_back({pts[i], ring, LidarFeatureKind::Surf, curvature[i]});
        ++surfs;
        for (int j = std::max(0, i - k); j <= std::min(n - 1, i + k); ++j) suppressed[j] = true;
      }
    }
  }
  return out;
}

RelativePose relative_lidar_transform(const SensorExtrinsics &lidar_calib, const ClonePose &clone_l,
                                      const ClonePose &clone_l1) {
  const Eigen::Matrix3d r_lfromi = quat_to_rot(lidar_calib.rotation);
  const Eigen::Matrix3d r_il = quat_to_rot(clone_l.orientation);
  const Eigen::Matrix3d r_il1 = quat_to_rot(clone_l1.orientation);
  const Eigen::Vector3d p_linl = lidar_calib.translation;          // p_IinL
  const Eigen::Vector3d p_lini = -r_lfromi.transpose() * p_linl;   // p_LinI

  RelativePose rel;
  rel.rotation = r_lfromi * r_il * (r_lfromi * r_il1).transpose();
  rel.translation =
      r_lfromi * r_il * (clone_l1.position - clone_l.position + r_il1.transpose() * p_lini) + p_linl;
  return rel;
}

KdTree3::KdTree3(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
  if (points_.empty()) return;
  std::vector<int> idx(points_.size());
  std::iota(idx.begin(), idx.end(), 0);
  nodes_.reserve(points_.size());
  root_ = build(idx, 0, static_cast<int>(idx.size()), 0);
}

int KdTree3::build(std::vector<int> &idx, int begin, int end, int depth) {
  if (begin >= end) return -1;
  const int axis = depth % 3;
  const int mid = (begin + end) / 2;
  std::nth_element(idx.begin() + begin, idx.begin() + mid, idx.begin() + end,
                   [&](int a, int b) { return points_[a](axis) < points_[b](axis); });
  const int node_id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{idx[mid], axis, -1, -1});
  const int left = build(idx, begin, mid, depth + 1);
  const int right = build(idx, mid + 1, end, depth + 1);
  nodes_[node_id].left = left;
  nodes_[node_id].right = right;
  return node_id;
}

void KdTree3::search(int node, const Eigen::Vector3d &query, const std::function<bool(int)> &accept,
                     double &best_d2, int &best) const {
  if (node < 0) return;
  const Node &nd = nodes_[node];
  const double d2 = (points_[nd.point] - query).squaredNorm();
  if (d2 < best_d2 && (!accept || accept(nd.point))) {
    best_d2 = d2;
    best = nd.point;
  }
  const double diff = query(nd.axis) - points_[nd.point](nd.axis);
  const int near = diff < 0.0 ? nd.left : nd.right;
  const int far = diff < 0.0 ? nd.right : nd.left;
  search(near, query, accept, best_d2, best);
  if (diff * diff < best_d2) search(far, query, accept, best_d2, best);
}

int KdTree3::nearest(const Eigen::Vector3d &query, double max_dist, const std::function<bool(int)> &accept) const {
  double best_d2 = max_dist * max_dist;
  int best = -1;
  search(root_, query, accept, best_d2, best);
  return best;
}

FeatureIndex::FeatureIndex(std::vector<LidarFeature> features) : features_(std::move(features)) {
  std::vector<Eigen::Vector3d> edge_pts, surf_pts;
  for (int i = 0; i < static_cast<int>(features_.size()); ++i) {
    if (features_[i].kind == LidarFeatureKind::Edge) {
      edge_ids_.push_back(i);
      edge_pts.push_back(features_[i].position);
    } else {
      surf_ids_.push_back(i);
      surf_pts.push_back(features_[i].position);
    }
  }
  edge_tree_ = KdTree3(std::move(edge_pts));
  surf_tree_ = KdTree3(std::move(surf_pts));
}

std::optional<Correspondence> FeatureIndex::find_correspondence(const Eigen::Vector3d &point_current,
                                                                const Eigen::Vector3d &projected,
                                                                LidarFeatureKind kind,
                                                                const CorrespondenceParams &params) const {
  const KdTree3 &tree = kind == LidarFeatureKind::Edge ? edge_tree_ : surf_tree_;
  const std::vector<int> &ids = kind == LidarFeatureKind::Edge ? edge_ids_ : surf_ids_;
  if (tree.size() == 0) return std::nullopt;

  const int j_local = tree.nearest(projected, params.max_distance);
  if (j_local < 0) return std::nullopt;
  const LidarFeature &fj = features_[ids[j_local]];
  const int ring_j = fj.ring;

  Correspondence corr;
  corr.point = point_current;
  corr.projected = projected;
  corr.kind = kind;
  corr.anchors[0] = fj.position;
  corr.anchor_rings[0] = ring_j;

  auto on_adjacent_ring = [&](int local) {
    const int r = features_[ids[local]].ring;
    return std::abs(r - ring_j) == 1;
  };

  if (kind == LidarFeatureKind::Edge) {
    const int k_local = tree.nearest(projected, params.max_distance, on_adjacent_ring);
    if (k_local < 0) return std::nullopt;
    const LidarFeature &fk = features_[ids[k_local]];
    if ((fk.position - fj.position).norm() < 1e-9) return std::nullopt;
    corr.anchors[1] = fk.position;
    corr.anchor_rings[1] = fk.ring;
    corr.anchor_count = 2;
    return corr;
  }

  const int k_local = tree.nearest(projected, params.max_distance, [&](int local) {
    return local != j_local && features_[ids[local]].ring == ring_j;
  });
  const int l_local = tree.nearest(projected, params.max_distance, on_adjacent_ring);
  if (k_local < 0 || l_local < 0) return std::nullopt;
  const LidarFeature &fk = features_[ids[k_local]];
  const LidarFeature &fl = features_[ids[l_local]];
  if ((fk.position - fj.position).norm() < 1e-9 || (fl.position - fj.position).norm() < 1e-9 ||
      (fl.position - fk.position).norm() < 1e-9) {
    return std::nullopt;
  }
  corr.anchors[1] = fk.position;
  corr.anchor_rings[1] = fk.ring;
  corr.anchors[2] = fl.position;
  corr.anchor_rings[2] = fl.ring;
  corr.anchor_count = 3;
  return corr;
}

}  // namespace lic
