#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "lic/lidar_frontend.hpp"
#include "lic/propagation.hpp"
#include "lic/state.hpp"
#include "lic/vision_update.hpp"

namespace lic {

// Per-axis sinusoidal position plus sinusoidal roll/pitch/yaw: analytic
// first and second derivatives, so the synthesized IMU is kinematically
// exact. An optional rest phase followed by a smoothstep ramp lets logs
// begin stationary.
struct TrajectorySpec {
  double start = 0.0;
  double duration = 60.0;
  double rest = 0.0;  // s at zero amplitude after start
  double ramp = 0.0;  // s of smooth amplitude ramp-in after the rest
  Eigen::Vector3d center{0.0, 0.0, 1.5};
  Eigen::Vector3d pos_amplitude{1.3, 1.0, 0.4};
  Eigen::Vector3d pos_freq{1.3, 1.0, 1.5};     // rad/s
  Eigen::Vector3d pos_phase{0.0, 1.3, 0.6};
  Eigen::Vector3d att_amplitude{0.34, 0.29, 1.0};  // roll, pitch, yaw [rad]
  Eigen::Vector3d att_freq{1.1, 0.85, 0.5};
  Eigen::Vector3d att_phase{0.4, 1.1, 0.0};
};

struct TrajectorySample {
  Eigen::Vector4d orientation = quat_identity();  // q_IfromG
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();  // global frame
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();         // IMU frame
};

// Throws std::out_of_range outside [start, start + duration].
TrajectorySample trajectory_at(double t, const TrajectorySpec &spec);

struct Plane {
  Eigen::Vector3d center, normal, axis_u, axis_v;
  double half_u = 0.0, half_v = 0.0;
};

struct Segment {
  Eigen::Vector3d a, b;
};

struct WorldModel {
  std::vector<Plane> planes;
  std::vector<Segment> edges;      // derived from plane intersections
  std::vector<Eigen::Vector3d> landmarks;
};

// Axis-aligned box room centered on (0, 0, size.z/2): 6 planes, their 12
// intersection edges, and uniformly scattered landmarks.
WorldModel make_box_room(const Eigen::Vector3d &size, int landmark_count, std::uint64_t seed);

struct RigTruth {
  SensorExtrinsics cam_calib;    // true values
  SensorExtrinsics lidar_calib;
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
  ImuNoiseParams noise;          // densities used for synthesis
};

// w_m = w + b_g + n_g, a_m = R (a_global - g) + b_a + n_a at the given rate;
// biases random-walk from their initial values with the configured walk
// densities. Deterministic in (spec, rig, rate, seed).
std::vector<ImuSample> synthesize_imu(const TrajectorySpec &spec, const RigTruth &rig, double rate,
                                      std::uint64_t seed);

struct RingGeometry {
  std::vector<double> elevations;  // [rad], one per ring
  int azimuth_steps = 300;
  double min_range = 0.3;
  double max_range = 30.0;
};

RingGeometry default_ring_geometry(int rings = 16, double min_elev_deg = -15.0, double max_elev_deg = 15.0);

// Ray-casts every (ring, azimuth) direction against the world planes from
// the LiDAR pose implied by the IMU pose and extrinsics, keeping the nearest
// hit in range and adding isotropic noise. The scan timestamp is left at 0;
// the caller stamps it in the LiDAR clock.
LidarScan synthesize_lidar_scan(const WorldModel &world, const TrajectorySample &imu_pose, const RigTruth &rig,
                                const RingGeometry &rings, double point_sigma, std::mt19937_64 &rng);

struct CameraFrame {
  double sensor_time = 0.0;  // camera clock
  struct Obs {
    std::uint64_t id = 0;
    double u = 0.0, v = 0.0;  // normalized coordinates
  };
  std::vector<Obs> tracks;
};

// Projects visible landmarks per frame (field-of-view and cheirality tests),
// adds pixel noise mapped through the intrinsics, and drops a track with the
// given probability per frame; a dropped landmark restarts under a fresh id.
std::vector<CameraFrame> synthesize_camera_tracks(const WorldModel &world, const TrajectorySpec &spec,
                                                  const RigTruth &rig, const CameraModel &camera, double rate,
                                                  double pixel_sigma, double dropout_prob, std::uint64_t seed);

}  // namespace lic
