#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "lic/config.hpp"
#include "lic/selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 ok, 1 usage/config, 2 io/parse, 3 estimator failure,
// 4 selftest failure.
enum ExitCode { kOk = 0, kConfigError = 1, kIoError = 2, kRuntimeError = 3, kSelftestError = 4 };

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
}

void write_trajectory_csv(const fs::path &path, const std::vector<lic::PoseSample> &traj) {
  std::ofstream out(path);
  out << "t,px,py,pz,qx,qy,qz,qw\n";
  char buf[256];
  for (const auto &s : traj) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.p.x(), s.p.y(),
                  s.p.z(), s.q(0), s.q(1), s.q(2), s.q(3));
    out << buf;
  }
}

std::vector<lic::PoseSample> read_trajectory_csv(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<lic::PoseSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("t,", 0) == 0) continue;
    lic::PoseSample s;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &s.t, &s.p.x(), &s.p.y(), &s.p.z(),
                    &s.q(0), &s.q(1), &s.q(2), &s.q(3)) != 8) {
      throw std::runtime_error("bad trajectory row: " + line);
    }
    out.push_back(s);
  }
  return out;
}

void write_calibration_csv(const fs::path &path, const std::vector<lic::CalibrationRecord> &cal) {
  std::ofstream out(path);
  out << "t,cam_qx,cam_qy,cam_qz,cam_qw,cam_px,cam_py,cam_pz,cam_td,"
         "lidar_qx,lidar_qy,lidar_qz,lidar_qw,lidar_px,lidar_py,lidar_pz,lidar_td";
  for (const char *n : {"cam_sig_rx", "cam_sig_ry", "cam_sig_rz", "cam_sig_px", "cam_sig_py", "cam_sig_pz",
                        "cam_sig_td", "lidar_sig_rx", "lidar_sig_ry", "lidar_sig_rz", "lidar_sig_px",
                        "lidar_sig_py", "lidar_sig_pz", "lidar_sig_td"}) {
    out << "," << n;
  }
  out << "\n";
  for (const auto &c : cal) {
    out << c.t;
    for (int i = 0; i < 4; ++i) out << "," << c.cam.rotation(i);
    for (int i = 0; i < 3; ++i) out << "," << c.cam.translation(i);
    out << "," << c.cam.time_offset;
    for (int i = 0; i < 4; ++i) out << "," << c.lidar.rotation(i);
    for (int i = 0; i < 3; ++i) out << "," << c.lidar.translation(i);
    out << "," << c.lidar.time_offset;
    for (int i = 0; i < 14; ++i) out << "," << c.sigma(i);
    out << "\n";
  }
}

void write_nees_csv(const fs::path &path, const std::vector<std::pair<double, double>> &nees) {
  std::ofstream out(path);
  out << "t,pose_nees\n";
  for (const auto &[t, v] : nees) out << t << "," << v << "\n";
}

int cmd_simulate(const std::string &config_path, const std::string &out_dir, std::uint64_t seed, bool has_seed) {
  lic::SimConfig cfg = config_path.empty() ? lic::default_sim_config() : lic::load_sim_config(config_path);
  if (has_seed) cfg.seed = seed;
  fs::create_directories(out_dir);
  const lic::SimOutput sim = lic::simulate(cfg);
  lic::write_sensor_log((fs::path(out_dir) / "log.jsonl").string(), sim.records);
  lic::write_truth_csv((fs::path(out_dir) / "truth.csv").string(), sim.truth);
  lic::save_sim_config((fs::path(out_dir) / "sim_config.json").string(), cfg);
  json results;
  results["records"] = sim.records.size();
  results["truth_samples"] = sim.truth.size();
  results["seed"] = cfg.seed;
  write_text(fs::path(out_dir) / "results.json", results.dump(2) + "\n");
  std::cout << "wrote " << sim.records.size() << " records to " << out_dir << "/log.jsonl\n";
  return kOk;
}

int cmd_run(const std::string &config_path, const std::string &log_path, const std::string &truth_path,
            const std::string &out_dir, std::uint64_t seed, bool has_seed) {
  lic::EstimatorConfig cfg =
      config_path.empty() ? lic::default_estimator_config() : lic::load_estimator_config(config_path);
  if (has_seed) cfg.seed = seed;
  const std::vector<lic::SensorRecord> records = lic::read_sensor_log(log_path);
  std::vector<lic::TruthSample> truth;
  if (!truth_path.empty()) truth = lic::read_truth_csv(truth_path);
  const lic::EstimatorOutput out =
      lic::run_estimator(cfg, records, truth.empty() ? nullptr : &truth);

  fs::create_directories(out_dir);
  write_trajectory_csv(fs::path(out_dir) / "trajectory.csv", out.trajectory);
  write_calibration_csv(fs::path(out_dir) / "calibration.csv", out.calibration);
  write_nees_csv(fs::path(out_dir) / "nees.csv", out.nees);

  json results;
  results["ok"] = out.ok;
  results["abort_reason"] = out.abort_reason;
  results["poses"] = out.trajectory.size();
  results["lidar_residuals_accepted"] = out.lidar_residuals_accepted;
  results["lidar_residuals_rejected"] = out.lidar_residuals_rejected;
  results["vision_tracks_used"] = out.vision_tracks_used;
  results["vision_tracks_rejected"] = out.vision_tracks_rejected;
  results["records_dropped"] = out.records_dropped;
  results["failed_updates"] = out.failed_updates;
  write_text(fs::path(out_dir) / "results.json", results.dump(2) + "\n");

  if (!out.ok) {
    std::cerr << "estimator aborted: " << out.abort_reason << "\n";
    return kRuntimeError;
  }
  std::cout << "processed " << out.trajectory.size() << " events, results in " << out_dir << "\n";
  return kOk;
}

int cmd_eval(const std::string &est_path, const std::string &truth_path, const std::string &out_dir) {
  const std::vector<lic::PoseSample> est = read_trajectory_csv(est_path);
  const std::vector<lic::TruthSample> truth = lic::read_truth_csv(truth_path);
  std::vector<lic::PoseSample> gt;
  gt.reserve(truth.size());
  for (const auto &s : truth) gt.push_back({s.t, s.q, s.p});
  const lic::TrajectoryMetrics metrics = lic::compute_metrics(est, gt, true);

  fs::create_directories(out_dir);
  json j;
  j["ate"] = metrics.ate;
  j["start_end"] = metrics.start_end;
  j["gt_loop_closed"] = metrics.gt_loop_closed;
  write_text(fs::path(out_dir) / "metrics.json", j.dump(2) + "\n");
  std::ofstream mse(fs::path(out_dir) / "mse.csv");
  mse << "t,squared_error\n";
  for (const auto &[t, e] : metrics.mse_per_time) mse << t << "," << e << "\n";
  std::cout << "ate " << metrics.ate << " m, start-end " << metrics.start_end << " m\n";
  return kOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"LiDAR-inertial-camera odometry with online spatio-temporal calibration"};
  app.require_subcommand(1);

  std::string config_path, log_path, truth_path, est_path, out_dir = "out";
  std::uint64_t seed = 0;

  auto *sim = app.add_subcommand("simulate", "generate a sensor log and ground truth from a config");
  sim->add_option("--config", config_path, "simulation config JSON");
  sim->add_option("--out", out_dir, "output directory");
  auto *sim_seed = sim->add_option("--seed", seed, "override the config seed");

  auto *run = app.add_subcommand("run", "run the estimator on a sensor log");
  run->add_option("--config", config_path, "estimator config JSON");
  run->add_option("--log", log_path, "sensor log (JSON lines)")->required();
  run->add_option("--truth", truth_path, "ground-truth CSV (enables truth init modes and NEES)");
  run->add_option("--out", out_dir, "output directory");
  auto *run_seed = run->add_option("--seed", seed, "override the config seed");

  auto *eval = app.add_subcommand("eval", "compute trajectory metrics against ground truth");
  eval->add_option("--est", est_path, "estimated trajectory CSV (defaults to <out>/trajectory.csv)");
  eval->add_option("--truth", truth_path, "ground-truth CSV")->required();
  eval->add_option("--out", out_dir, "output directory");

  auto *self = app.add_subcommand("selftest", "run the built-in derivative and oracle checks");
  self->add_option("--seed", seed, "rng seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(config_path, out_dir, seed, !sim_seed->empty());
    if (run->parsed()) return cmd_run(config_path, log_path, truth_path, out_dir, seed, !run_seed->empty());
    if (eval->parsed()) {
      if (est_path.empty()) est_path = (fs::path(out_dir) / "trajectory.csv").string();
      return cmd_eval(est_path, truth_path, out_dir);
    }
    if (self->parsed()) {
      return lic::run_selftest(seed == 0 ? 7 : seed, std::cout) == 0 ? kOk : kSelftestError;
    }
  } catch (const lic::LogParseError &e) {
    std::cerr << "log parse error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
