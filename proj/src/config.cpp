#include "lic/config.hpp"

#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace lic {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

json vec3_to_json(const Eigen::Vector3d &v) { return json{v.x(), v.y(), v.z()}; }
json vec4_to_json(const Eigen::Vector4d &v) { return json{v(0), v(1), v(2), v(3)}; }

Eigen::Vector3d vec3_from_json(const json &j, const Eigen::Vector3d &fallback) {
  if (j.is_null()) return fallback;
  return Eigen::Vector3d(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

Eigen::Vector4d vec4_from_json(const json &j, const Eigen::Vector4d &fallback) {
  if (j.is_null()) return fallback;
  return Eigen::Vector4d(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                         j.at(3).get<double>());
}

json extrinsics_to_json(const SensorExtrinsics &e) {
  return json{{"rotation", vec4_to_json(e.rotation)},
              {"translation", vec3_to_json(e.translation)},
              {"time_offset", e.time_offset}};
}

SensorExtrinsics extrinsics_from_json(const json &j, const SensorExtrinsics &fallback) {
  if (j.is_null()) return fallback;
  SensorExtrinsics e = fallback;
  e.rotation = quat_normalize(vec4_from_json(j.value("rotation", json()), fallback.rotation));
  e.translation = vec3_from_json(j.value("translation", json()), fallback.translation);
  e.time_offset = j.value("time_offset", fallback.time_offset);
  return e;
}

json noise_to_json(const ImuNoiseParams &n) {
  return json{{"gyro_noise_density", n.gyro_noise_density},
              {"accel_noise_density", n.accel_noise_density},
              {"gyro_bias_walk", n.gyro_bias_walk},
              {"accel_bias_walk", n.accel_bias_walk},
              {"gravity", vec3_to_json(n.gravity)}};
}

ImuNoiseParams noise_from_json(const json &j, const ImuNoiseParams &fallback) {
  if (j.is_null()) return fallback;
  ImuNoiseParams n = fallback;
  n.gyro_noise_density = j.value("gyro_noise_density", fallback.gyro_noise_density);
  n.accel_noise_density = j.value("accel_noise_density", fallback.accel_noise_density);
  n.gyro_bias_walk = j.value("gyro_bias_walk", fallback.gyro_bias_walk);
  n.accel_bias_walk = j.value("accel_bias_walk", fallback.accel_bias_walk);
  n.gravity = vec3_from_json(j.value("gravity", json()), fallback.gravity);
  return n;
}

json camera_to_json(const CameraModel &c) {
  return json{{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

CameraModel camera_from_json(const json &j, const CameraModel &fallback) {
  if (j.is_null()) return fallback;
  CameraModel c = fallback;
  c.fx = j.value("fx", fallback.fx);
  c.fy = j.value("fy", fallback.fy);
  c.cx = j.value("cx", fallback.cx);
  c.cy = j.value("cy", fallback.cy);
  c.width = j.value("width", fallback.width);
  c.height = j.value("height", fallback.height);
  return c;
}

void check_schema(const json &j) {
  if (j.contains("schema") && j["schema"].get<int>() != kSchemaVersion) {
    throw std::runtime_error("unsupported config schema version");
  }
}

}  // namespace

SimConfig default_sim_config() {
  SimConfig cfg;
  cfg.trajectory.rest = 2.0;
  cfg.trajectory.ramp = 2.0;
  cfg.rig.cam_calib.rotation = rot_to_quat((Eigen::Matrix3d() << 0, -1, 0, 0, 0, -1, 1, 0, 0).finished());
  cfg.rig.cam_calib.translation = Eigen::Vector3d(0.01, -0.02, 0.03);
  cfg.rig.cam_calib.time_offset = 0.004;
  cfg.rig.lidar_calib.rotation = quat_from_rotvec(Eigen::Vector3d(0.02, -0.015, 0.03));
  cfg.rig.lidar_calib.translation = Eigen::Vector3d(-0.05, 0.02, -0.08);
  cfg.rig.lidar_calib.time_offset = -0.006;
  cfg.rig.gyro_bias = Eigen::Vector3d(0.003, -0.002, 0.001);
  cfg.rig.accel_bias = Eigen::Vector3d(0.02, -0.01, 0.015);
  return cfg;
}

EstimatorConfig default_estimator_config() {
  const SimConfig sim = default_sim_config();
  EstimatorConfig cfg;
  cfg.cam_calib = sim.rig.cam_calib;
  cfg.lidar_calib = sim.rig.lidar_calib;
  cfg.camera = sim.camera;
  cfg.imu_noise = sim.rig.noise;
  cfg.lidar_point_sigma = sim.lidar_point_sigma;
  cfg.pixel_sigma = sim.pixel_sigma;
  return cfg;
}

SimOutput simulate(const SimConfig &config) {
  SimConfig cfg = config;
  if (cfg.noise_free) {
    cfg.rig.noise.gyro_noise_density = 0.0;
    cfg.rig.noise.accel_noise_density = 0.0;
    cfg.rig.noise.gyro_bias_walk = 0.0;
    cfg.rig.noise.accel_bias_walk = 0.0;
    cfg.rig.gyro_bias.setZero();
    cfg.rig.accel_bias.setZero();
    cfg.pixel_sigma = 0.0;
    cfg.lidar_point_sigma = 0.0;
    cfg.track_dropout = 0.0;
  }

  const WorldModel world = make_box_room(cfg.room_size, cfg.landmark_count, cfg.seed);
  SimOutput out;

  const std::vector<ImuSample> imu = synthesize_imu(cfg.trajectory, cfg.rig, cfg.imu_rate, cfg.seed + 1);
  for (const ImuSample &s : imu) {
    out.records.emplace_back(ImuRecord{s.timestamp, s.angular_velocity, s.linear_acceleration});
    TruthSample truth;
    const TrajectorySample traj = trajectory_at(std::min(s.timestamp, cfg.trajectory.start + cfg.trajectory.duration),
                                                cfg.trajectory);
    truth.t = s.timestamp;
    truth.p = traj.position;
    truth.q = traj.orientation;
    truth.v = traj.velocity;
    out.truth.push_back(truth);
  }

  // LiDAR scans are phase-shifted against the camera so the sensor clocks
  // stay asynchronous, as on a real rig.
  std::mt19937_64 lidar_rng(cfg.seed + 2);
  const double lidar_phase = 0.37 / cfg.lidar_rate;
  const int n_scans = static_cast<int>(std::floor((cfg.trajectory.duration - lidar_phase) * cfg.lidar_rate));
  for (int k = 0; k <= n_scans; ++k) {
    const double t = cfg.trajectory.start + lidar_phase + k / cfg.lidar_rate;
    const TrajectorySample pose = trajectory_at(t, cfg.trajectory);
    LidarScan scan = synthesize_lidar_scan(world, pose, cfg.rig, cfg.rings, cfg.lidar_point_sigma, lidar_rng);
    LidarRecord rec;
    rec.t = t - cfg.rig.lidar_calib.time_offset;
    rec.rings = std::move(scan.rings);
    out.records.emplace_back(std::move(rec));
  }

  const std::vector<CameraFrame> frames = synthesize_camera_tracks(
      world, cfg.trajectory, cfg.rig, cfg.camera, cfg.cam_rate, cfg.pixel_sigma, cfg.track_dropout, cfg.seed + 3);
  for (const CameraFrame &f : frames) {
    CamRecord rec;
    rec.t = f.sensor_time;
    for (const CameraFrame::Obs &o : f.tracks) rec.tracks.push_back({o.id, o.u, o.v});
    out.records.emplace_back(std::move(rec));
  }

  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const SensorRecord &a, const SensorRecord &b) { return record_time(a) < record_time(b); });
  return out;
}

std::string sim_config_to_json(const SimConfig &c) {
  json j;
  j["schema"] = kSchemaVersion;
  j["trajectory"] = {{"start", c.trajectory.start},
                     {"duration", c.trajectory.duration},
                     {"rest", c.trajectory.rest},
                     {"ramp", c.trajectory.ramp},
                     {"center", vec3_to_json(c.trajectory.center)},
                     {"pos_amplitude", vec3_to_json(c.trajectory.pos_amplitude)},
                     {"pos_freq", vec3_to_json(c.trajectory.pos_freq)},
                     {"pos_phase", vec3_to_json(c.trajectory.pos_phase)},
                     {"att_amplitude", vec3_to_json(c.trajectory.att_amplitude)},
                     {"att_freq", vec3_to_json(c.trajectory.att_freq)},
                     {"att_phase", vec3_to_json(c.trajectory.att_phase)}};
  j["room_size"] = vec3_to_json(c.room_size);
  j["landmark_count"] = c.landmark_count;
  j["imu_rate"] = c.imu_rate;
  j["lidar_rate"] = c.lidar_rate;
  j["cam_rate"] = c.cam_rate;
  j["rig"] = {{"cam_calib", extrinsics_to_json(c.rig.cam_calib)},
              {"lidar_calib", extrinsics_to_json(c.rig.lidar_calib)},
              {"gyro_bias", vec3_to_json(c.rig.gyro_bias)},
              {"accel_bias", vec3_to_json(c.rig.accel_bias)},
              {"noise", noise_to_json(c.rig.noise)}};
  j["rings"] = {{"count", static_cast<int>(c.rings.elevations.size())},
                {"azimuth_steps", c.rings.azimuth_steps},
                {"min_range", c.rings.min_range},
                {"max_range", c.rings.max_range}};
  j["camera"] = camera_to_json(c.camera);
  j["pixel_sigma"] = c.pixel_sigma;
  j["lidar_point_sigma"] = c.lidar_point_sigma;
  j["track_dropout"] = c.track_dropout;
  j["seed"] = c.seed;
  j["noise_free"] = c.noise_free;
  return j.dump(2);
}

SimConfig sim_config_from_json(const std::string &text) {
  const json j = json::parse(text);
  check_schema(j);
  SimConfig c = default_sim_config();
  if (j.contains("trajectory")) {
    const json t = j["trajectory"];
    c.trajectory.start = t.value("start", c.trajectory.start);
    c.trajectory.duration = t.value("duration", c.trajectory.duration);
    c.trajectory.rest = t.value("rest", c.trajectory.rest);
    c.trajectory.ramp = t.value("ramp", c.trajectory.ramp);
    c.trajectory.center = vec3_from_json(t.value("center", json()), c.trajectory.center);
    c.trajectory.pos_amplitude = vec3_from_json(t.value("pos_amplitude", json()), c.trajectory.pos_amplitude);
    c.trajectory.pos_freq = vec3_from_json(t.value("pos_freq", json()), c.trajectory.pos_freq);
    c.trajectory.pos_phase = vec3_from_json(t.value("pos_phase", json()), c.trajectory.pos_phase);
    c.trajectory.att_amplitude = vec3_from_json(t.value("att_amplitude", json()), c.trajectory.att_amplitude);
    c.trajectory.att_freq = vec3_from_json(t.value("att_freq", json()), c.trajectory.att_freq);
    c.trajectory.att_phase = vec3_from_json(t.value("att_phase", json()), c.trajectory.att_phase);
  }
  c.room_size = vec3_from_json(j.value("room_size", json()), c.room_size);
  c.landmark_count = j.value("landmark_count", c.landmark_count);
  c.imu_rate = j.value("imu_rate", c.imu_rate);
  c.lidar_rate = j.value("lidar_rate", c.lidar_rate);
  c.cam_rate = j.value("cam_rate", c.cam_rate);
  if (j.contains("rig")) {
    const json r = j["rig"];
    c.rig.cam_calib = extrinsics_from_json(r.value("cam_calib", json()), c.rig.cam_calib);
    c.rig.lidar_calib = extrinsics_from_json(r.value("lidar_calib", json()), c.rig.lidar_calib);
    c.rig.gyro_bias = vec3_from_json(r.value("gyro_bias", json()), c.rig.gyro_bias);
    c.rig.accel_bias = vec3_from_json(r.value("accel_bias", json()), c.rig.accel_bias);
    c.rig.noise = noise_from_json(r.value("noise", json()), c.rig.noise);
  }
  if (j.contains("rings")) {
    const json r = j["rings"];
    c.rings = default_ring_geometry(r.value("count", 16));
    c.rings.azimuth_steps = r.value("azimuth_steps", c.rings.azimuth_steps);
    c.rings.min_range = r.value("min_range", c.rings.min_range);
    c.rings.max_range = r.value("max_range", c.rings.max_range);
  }
  c.camera = camera_from_json(j.value("camera", json()), c.camera);
  c.pixel_sigma = j.value("pixel_sigma", c.pixel_sigma);
  c.lidar_point_sigma = j.value("lidar_point_sigma", c.lidar_point_sigma);
  c.track_dropout = j.value("track_dropout", c.track_dropout);
  c.seed = j.value("seed", c.seed);
  c.noise_free = j.value("noise_free", c.noise_free);
  return c;
}

std::string estimator_config_to_json(const EstimatorConfig &c) {
  json j;
  j["schema"] = kSchemaVersion;
  j["max_cam_clones"] = c.max_cam_clones;
  j["max_lidar_clones"] = c.max_lidar_clones;
  j["use_camera"] = c.use_camera;
  j["use_lidar"] = c.use_lidar;
  j["imu_noise"] = noise_to_json(c.imu_noise);
  j["max_imu_gap"] = c.max_imu_gap;
  j["cam_calib"] = extrinsics_to_json(c.cam_calib);
  j["lidar_calib"] = extrinsics_to_json(c.lidar_calib);
  j["init_gyro_bias"] = vec3_to_json(c.init_gyro_bias);
  j["init_accel_bias"] = vec3_to_json(c.init_accel_bias);
  j["camera"] = camera_to_json(c.camera);
  j["extraction"] = {{"curvature_half_window", c.extraction.curvature_half_window},
                     {"edge_threshold", c.extraction.edge_threshold},
                     {"surf_threshold", c.extraction.surf_threshold},
                     {"sectors_per_ring", c.extraction.sectors_per_ring},
                     {"max_edge_per_sector", c.extraction.max_edge_per_sector},
                     {"max_surf_per_sector", c.extraction.max_surf_per_sector},
                     {"min_range", c.extraction.min_range}};
  j["max_correspondence_distance"] = c.correspondence.max_distance;
  j["triangulation"] = {{"max_gauss_newton_iters", c.triangulation.max_gauss_newton_iters},
                        {"min_parallax_deg", c.triangulation.min_parallax_deg},
                        {"min_depth", c.triangulation.min_depth}};
  j["lidar_point_sigma"] = c.lidar_point_sigma;
  j["pixel_sigma"] = c.pixel_sigma;
  j["gating_confidence"] = c.gating_confidence;
  j["gate_lidar"] = c.gate_lidar;
  j["gate_vision"] = c.gate_vision;
  j["min_edge_distance"] = c.min_edge_distance;
  j["priors"] = {{"orientation", c.priors.orientation}, {"position", c.priors.position},
                 {"velocity", c.priors.velocity},       {"gyro_bias", c.priors.gyro_bias},
                 {"accel_bias", c.priors.accel_bias},   {"calib_rot", c.priors.calib_rot},
                 {"calib_trans", c.priors.calib_trans}, {"calib_time", c.priors.calib_time}};
  j["init_mode"] = c.init_mode == InitMode::Static ? "static"
                   : c.init_mode == InitMode::Truth ? "truth"
                                                    : "truth_perturbed";
  j["perturb_calib"] = c.perturb_calib;
  j["static_init_window"] = c.static_init_window;
  j["divergence_position_var"] = c.divergence_position_var;
  j["seed"] = c.seed;
  return j.dump(2);
}

EstimatorConfig estimator_config_from_json(const std::string &text) {
  const json j = json::parse(text);
  check_schema(j);
  EstimatorConfig c = default_estimator_config();
  c.max_cam_clones = j.value("max_cam_clones", c.max_cam_clones);
  c.max_lidar_clones = j.value("max_lidar_clones", c.max_lidar_clones);
  if (c.max_cam_clones < 2 || c.max_lidar_clones < 2) {
    throw std::runtime_error("window sizes must be at least 2");
  }
  c.use_camera = j.value("use_camera", c.use_camera);
  c.use_lidar = j.value("use_lidar", c.use_lidar);
  c.imu_noise = noise_from_json(j.value("imu_noise", json()), c.imu_noise);
  c.max_imu_gap = j.value("max_imu_gap", c.max_imu_gap);
  c.cam_calib = extrinsics_from_json(j.value("cam_calib", json()), c.cam_calib);
  c.lidar_calib = extrinsics_from_json(j.value("lidar_calib", json()), c.lidar_calib);
  c.init_gyro_bias = vec3_from_json(j.value("init_gyro_bias", json()), c.init_gyro_bias);
  c.init_accel_bias = vec3_from_json(j.value("init_accel_bias", json()), c.init_accel_bias);
  c.camera = camera_from_json(j.value("camera", json()), c.camera);
  if (j.contains("extraction")) {
    const json e = j["extraction"];
    c.extraction.curvature_half_window = e.value("curvature_half_window", c.extraction.curvature_half_window);
    c.extraction.edge_threshold = e.value("edge_threshold", c.extraction.edge_threshold);
    c.extraction.surf_threshold = e.value("surf_threshold", c.extraction.surf_threshold);
    c.extraction.sectors_per_ring = e.value("sectors_per_ring", c.extraction.sectors_per_ring);
    c.extraction.max_edge_per_sector = e.value("max_edge_per_sector", c.extraction.max_edge_per_sector);
    c.extraction.max_surf_per_sector = e.value("max_surf_per_sector", c.extraction.max_surf_per_sector);
    c.extraction.min_range = e.value("min_range", c.extraction.min_range);
  }
  c.correspondence.max_distance = j.value("max_correspondence_distance", c.correspondence.max_distance);
  if (j.contains("triangulation")) {
    const json t = j["triangulation"];
    c.triangulation.max_gauss_newton_iters = t.value("max_gauss_newton_iters", c.triangulation.max_gauss_newton_iters);
    c.triangulation.min_parallax_deg = t.value("min_parallax_deg", c.triangulation.min_parallax_deg);
    c.triangulation.min_depth = t.value("min_depth", c.triangulation.min_depth);
  }
  c.lidar_point_sigma = j.value("lidar_point_sigma", c.lidar_point_sigma);
  c.pixel_sigma = j.value("pixel_sigma", c.pixel_sigma);
  c.gating_confidence = j.value("gating_confidence", c.gating_confidence);
  c.gate_lidar = j.value("gate_lidar", c.gate_lidar);
  c.gate_vision = j.value("gate_vision", c.gate_vision);
  c.min_edge_distance = j.value("min_edge_distance", c.min_edge_distance);
  if (j.contains("priors")) {
    const json p = j["priors"];
    c.priors.orientation = p.value("orientation", c.priors.orientation);
    c.priors.position = p.value("position", c.priors.position);
    c.priors.velocity = p.value("velocity", c.priors.velocity);
    c.priors.gyro_bias = p.value("gyro_bias", c.priors.gyro_bias);
    c.priors.accel_bias = p.value("accel_bias", c.priors.accel_bias);
    c.priors.calib_rot = p.value("calib_rot", c.priors.calib_rot);
    c.priors.calib_trans = p.value("calib_trans", c.priors.calib_trans);
    c.priors.calib_time = p.value("calib_time", c.priors.calib_time);
  }
  if (j.contains("init_mode")) {
    const std::string mode = j["init_mode"].get<std::string>();
    if (mode == "static")
      c.init_mode = InitMode::Static;
    else if (mode == "truth")
      c.init_mode = InitMode::Truth;
    else if (mode == "truth_perturbed")
      c.init_mode = InitMode::TruthPerturbed;
    else
      throw std::runtime_error("unknown init_mode '" + mode + "'");
  }
  c.perturb_calib = j.value("perturb_calib", c.perturb_calib);
  c.static_init_window = j.value("static_init_window", c.static_init_window);
  c.divergence_position_var = j.value("divergence_position_var", c.divergence_position_var);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

std::string read_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string &path, const std::string &text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text << "\n";
}

}  // namespace

SimConfig load_sim_config(const std::string &path) { return sim_config_from_json(read_file(path)); }
EstimatorConfig load_estimator_config(const std::string &path) {
  return estimator_config_from_json(read_file(path));
}
void save_sim_config(const std::string &path, const SimConfig &config) {
  write_file(path, sim_config_to_json(config));
}
void save_estimator_config(const std::string &path, const EstimatorConfig &config) {
  write_file(path, estimator_config_to_json(config));
}

}  // namespace lic
