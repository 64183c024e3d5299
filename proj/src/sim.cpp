#include "lic/sim.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace lic {

namespace {

Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}
Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}
Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

}  // namespace

TrajectorySample trajectory_at(double t, const TrajectorySpec &spec) {
  if (t < spec.start - 1e-9 || t > spec.start + spec.duration + 1e-9) {
    throw std::out_of_range("trajectory_at: time outside the trajectory span");
  }
  // amplitude envelope: 0 during the rest phase, smoothstep over the ramp
  double r = 1.0, rd = 0.0, rdd = 0.0;
  if (spec.rest > 0.0 || spec.ramp > 0.0) {
    const double since = t - spec.start - spec.rest;
    if (since <= 0.0) {
      r = 0.0;
    } else if (since < spec.ramp) {
      const double u = since / spec.ramp;
      r = u * u * (3.0 - 2.0 * u);
      rd = 6.0 * u * (1.0 - u) / spec.ramp;
      rdd = (6.0 - 12.0 * u) / (spec.ramp * spec.ramp);
    }
  }
  TrajectorySample out;
  Eigen::Vector3d att, att_rate;
  for (int i = 0; i < 3; ++i) {
    const double wp = spec.pos_freq(i), ph = spec.pos_phase(i), ap = spec.pos_amplitude(i);
    const double s = ap * std::sin(wp * t + ph);
    const double sd = ap * wp * std::cos(wp * t + ph);
    const double sdd = -ap * wp * wp * std::sin(wp * t + ph);
    out.position(i) = spec.center(i) + r * s;
    out.velocity(i) = rd * s + r * sd;
    out.acceleration(i) = rdd * s + 2.0 * rd * sd + r * sdd;
    const double wa = spec.att_freq(i), pa = spec.att_phase(i), aa = spec.att_amplitude(i);
    att(i) = r * aa * std::sin(wa * t + pa);
    att_rate(i) = rd * aa * std::sin(wa * t + pa) + r * aa * wa * std::cos(wa * t + pa);
  }
  const double roll = att(0), pitch = att(1), yaw = att(2);
  const Eigen::Matrix3d r_gfromi = rot_z(yaw) * rot_y(pitch) * rot_x(roll);
  out.orientation = rot_to_quat(r_gfromi.transpose());
  // Body rates from ZYX Euler angle rates.
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  out.omega(0) = att_rate(0) - att_rate(2) * sp;
  out.omega(1) = att_rate(1) * cr + att_rate(2) * sr * cp;
  out.omega(2) = -att_rate(1) * sr + att_rate(2) * cr * cp;
  return out;
}

WorldModel make_box_room(const Eigen::Vector3d &size, int landmark_count, std::uint64_t seed) {
  WorldModel world;
  const double hx = size.x() / 2.0, hy = size.y() / 2.0, hz = size.z() / 2.0;
  const Eigen::Vector3d cz(0.0, 0.0, hz);
  auto add_plane = [&](const Eigen::Vector3d &c, const Eigen::Vector3d &n, const Eigen::Vector3d &u,
                       const Eigen::Vector3d &v, double hu, double hv) {
    world.planes.push_back(Plane{c, n.normalized(), u.normalized(), v.normalized(), hu, hv});
  };
  add_plane({0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, hx, hy);                 // floor
  add_plane({0, 0, size.z()}, {0, 0, -1}, {1, 0, 0}, {0, 1, 0}, hx, hy);         // ceiling
  add_plane({hx, 0, hz}, {-1, 0, 0}, {0, 1, 0}, {0, 0, 1}, hy, hz);              // +x wall
  add_plane({-hx, 0, hz}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, hy, hz);              // -x wall
  add_plane({0, hy, hz}, {0, -1, 0}, {1, 0, 0}, {0, 0, 1}, hx, hz);              // +y wall
  add_plane({0, -hy, hz}, {0, 1, 0}, {1, 0, 0}, {0, 0, 1}, hx, hz);              // -y wall

  // Derived edges: clip each plane-pair intersection line to both rectangles.
  for (size_t i = 0; i < world.planes.size(); ++i) {
    for (size_t j = i + 1; j < world.planes.size(); ++j) {
      const Plane &a = world.planes[i], &b = world.planes[j];
      const Eigen::Vector3d dir = a.normal.cross(b.normal);
      if (dir.norm() < 1e-9) continue;
      Eigen::Matrix3d m;
      m.row(0) = a.normal.transpose();
      m.row(1) = b.normal.transpose();
      m.row(2) = dir.normalized().transpose();
      const Eigen::Vector3d rhs(a.normal.dot(a.center), b.normal.dot(b.center),
                                dir.normalized().dot(0.5 * (a.center + b.center)));
      const Eigen::Vector3d x0 = m.fullPivLu().solve(rhs);
      const Eigen::Vector3d d = dir.normalized();

      double lo = -1e9, hi = 1e9;
      bool empty = false;
      auto clip = [&](const Plane &p) {
        for (int axis = 0; axis < 2; ++axis) {
          const Eigen::Vector3d &u = axis == 0 ? p.axis_u : p.axis_v;
          const double half = axis == 0 ? p.half_u : p.half_v;
          const double f0 = (x0 - p.center).dot(u);
          const double fd = d.dot(u);
          if (std::abs(fd) < 1e-12) {
            if (std::abs(f0) > half + 1e-9) empty = true;
            continue;
          }
          double s0 = (-half - f0) / fd, s1 = (half - f0) / fd;
          if (s0 > s1) std::swap(s0, s1);
          lo = std::max(lo, s0);
          hi = std::min(hi, s1);
        }
      };
      clip(a);
      clip(b);
      if (!empty && hi > lo + 1e-9) world.edges.push_back(Segment{x0 + lo * d, x0 + hi * d});
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(-hx + 0.3, hx - 0.3);
  std::uniform_real_distribution<double> uy(-hy + 0.3, hy - 0.3);
  std::uniform_real_distribution<double> uz(0.3, size.z() - 0.3);
  world.landmarks.reserve(landmark_count);
  for (int i = 0; i < landmark_count; ++i) {
    world.landmarks.emplace_back(ux(rng), uy(rng), uz(rng));
  }
  return world;
}

std::vector<ImuSample> synthesize_imu(const TrajectorySpec &spec, const RigTruth &rig, double rate,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dt = 1.0 / rate;
  const double sg = rig.noise.gyro_noise_density * std::sqrt(rate);
  const double sa = rig.noise.accel_noise_density * std::sqrt(rate);
  const double wg = rig.noise.gyro_bias_walk * std::sqrt(dt);
  const double wa = rig.noise.accel_bias_walk * std::sqrt(dt);

  Eigen::Vector3d bg = rig.gyro_bias, ba = rig.accel_bias;
  std::vector<ImuSample> out;
  const int n = static_cast<int>(std::round(spec.duration * rate));
  out.reserve(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = spec.start + k * dt;
    const TrajectorySample s = trajectory_at(std::min(t, spec.start + spec.duration), spec);
    const Eigen::Matrix3d r = quat_to_rot(s.orientation);
    ImuSample m;
    m.timestamp = t;
    m.angular_velocity = s.omega + bg + sg * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    m.linear_acceleration =
        r * (s.acceleration - rig.noise.gravity) + ba + sa * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    out.push_back(m);
    bg += wg * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    ba += wa * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
  }
  return out;
}

RingGeometry default_ring_geometry(int rings, double min_elev_deg, double max_elev_deg) {
  RingGeometry geom;
  geom.elevations.reserve(rings);
  for (int r = 0; r < rings; ++r) {
    const double frac = rings > 1 ? static_cast<double>(r) / (rings - 1) : 0.5;
    geom.elevations.push_back((min_elev_deg + frac * (max_elev_deg - min_elev_deg)) * M_PI / 180.0);
  }
  return geom;
}

LidarScan synthesize_lidar_scan(const WorldModel &world, const TrajectorySample &imu_pose, const RigTruth &rig,
                                const RingGeometry &rings, double point_sigma, std::mt19937_64 &rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Matrix3d r_li = quat_to_rot(rig.lidar_calib.rotation);
  const Eigen::Matrix3d r_ig = quat_to_rot(imu_pose.orientation);
  const Eigen::Matrix3d r_lg = r_li * r_ig;
  const Eigen::Vector3d p_lini = -r_li.transpose() * rig.lidar_calib.translation;
  const Eigen::Vector3d origin = imu_pose.position + r_ig.transpose() * p_lini;

  LidarScan scan;
  scan.rings.resize(rings.elevations.size());
  for (size_t r = 0; r < rings.elevations.size(); ++r) {
    const double ce = std::cos(rings.elevations[r]), se = std::sin(rings.elevations[r]);
    for (int a = 0; a < rings.azimuth_steps; ++a) {
      const double az = 2.0 * M_PI * a / rings.azimuth_steps;
      const Eigen::Vector3d dir_l(ce * std::cos(az), ce * std::sin(az), se);
      const Eigen::Vector3d dir_g = r_lg.transpose() * dir_l;
      double best = rings.max_range + 1.0;
      for (const Plane &p : world.planes) {
        const double denom = dir_g.dot(p.normal);
        if (std::abs(denom) < 1e-12) continue;
        const double s = (p.center - origin).dot(p.normal) / denom;
        if (s < rings.min_range || s > rings.max_range || s >= best) continue;
        const Eigen::Vector3d hit = origin + s * dir_g;
        if (std::abs((hit - p.center).dot(p.axis_u)) > p.half_u + 1e-12) continue;
        if (std::abs((hit - p.center).dot(p.axis_v)) > p.half_v + 1e-12) continue;
        best = s;
      }
      if (best <= rings.max_range) {
        Eigen::Vector3d pt = best * dir_l;
        if (point_sigma > 0.0) {
          pt += point_sigma * Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
        }
        scan.rings[r].push_back(pt);
      }
    }
  }
  return scan;
}

std::vector<CameraFrame> synthesize_camera_tracks(const WorldModel &world, const TrajectorySpec &spec,
                                                  const RigTruth &rig, const CameraModel &camera, double rate,
                                                  double pixel_sigma, double dropout_prob, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const Eigen::Matrix3d r_ci = quat_to_rot(rig.cam_calib.rotation);
  std::map<int, std::uint64_t> active;  // landmark index -> track id
  std::uint64_t next_id = 1;

  std::vector<CameraFrame> out;
  const int n = static_cast<int>(std::floor(spec.duration * rate));
  for (int k = 0; k <= n; ++k) {
    const double t = spec.start + k / rate;
    const TrajectorySample s = trajectory_at(t, spec);
    const Eigen::Matrix3d r_ig = quat_to_rot(s.orientation);
    const Eigen::Matrix3d r_cg = r_ci * r_ig;
    const Eigen::Vector3d p_cing = s.position - r_ig.transpose() * r_ci.transpose() * rig.cam_calib.translation;

    CameraFrame frame;
    frame.sensor_time = t - rig.cam_calib.time_offset;
    for (int lm = 0; lm < static_cast<int>(world.landmarks.size()); ++lm) {
      const Eigen::Vector3d pc = r_cg * (world.landmarks[lm] - p_cing);
      bool visible = pc.z() > 0.2;
      double px = 0.0, py = 0.0;
      if (visible) {
        px = camera.fx * pc.x() / pc.z() + camera.cx;
        py = camera.fy * pc.y() / pc.z() + camera.cy;
        visible = px >= 0.0 && px <= camera.width && py >= 0.0 && py <= camera.height;
      }
      if (!visible) {
        active.erase(lm);
        continue;
      }
      auto it = active.find(lm);
      if (it != active.end() && dropout_prob > 0.0 && unif(rng) < dropout_prob) {
        active.erase(it);
        continue;
      }
      if (it == active.end()) it = active.emplace(lm, next_id++).first;
      if (pixel_sigma > 0.0) {
        px += pixel_sigma * gauss(rng);
        py += pixel_sigma * gauss(rng);
      }
      frame.tracks.push_back({it->second, (px - camera.cx) / camera.fx, (py - camera.cy) / camera.fy});
    }
    out.push_back(std::move(frame));
  }
  return out;
}

}  // namespace lic
