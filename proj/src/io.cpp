#include "lic/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace lic {

using nlohmann::json;

double record_time(const SensorRecord &rec) {
  return std::visit([](const auto &r) { return r.t; }, rec);
}

namespace {

void require(bool cond, int line, const std::string &msg) {
  if (!cond) throw LogParseError(line, msg);
}

Eigen::Vector3d parse_vec3(const json &j, int line, const char *what) {
  require(j.is_array() && j.size() == 3, line, std::string(what) + " must be a 3-array");
  Eigen::Vector3d v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  require(v.allFinite(), line, std::string(what) + " must be finite");
  return v;
}

}  // namespace

std::vector<SensorRecord> read_sensor_log(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_sensor_log: cannot open " + path);
  std::vector<SensorRecord> out;
  double last_t[3] = {-1e300, -1e300, -1e300};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error &e) {
      throw LogParseError(lineno, e.what());
    }
    require(j.is_object() && j.contains("type") && j.contains("t"), lineno, "record needs type and t");
    const std::string type = j["type"].get<std::string>();
    const double t = j["t"].get<double>();
    require(std::isfinite(t), lineno, "t must be finite");
    if (type == "imu") {
      require(t > last_t[0], lineno, "imu timestamps must be strictly increasing");
      last_t[0] = t;
      ImuRecord r;
      r.t = t;
      r.w = parse_vec3(j.at("w"), lineno, "w");
      r.a = parse_vec3(j.at("a"), lineno, "a");
      out.emplace_back(r);
    } else if (type == "lidar") {
      require(t > last_t[1], lineno, "lidar timestamps must be strictly increasing");
      last_t[1] = t;
      LidarRecord r;
      r.t = t;
      require(j.contains("rings") && j["rings"].is_array(), lineno, "lidar record needs rings");
      for (const json &ring : j["rings"]) {
        require(ring.is_array(), lineno, "ring must be an array");
        std::vector<Eigen::Vector3d> pts;
        pts.reserve(ring.size());
        for (const json &p : ring) pts.push_back(parse_vec3(p, lineno, "point"));
        r.rings.push_back(std::move(pts));
      }
      out.emplace_back(std::move(r));
    } else if (type == "cam") {
      require(t > last_t[2], lineno, "cam timestamps must be strictly increasing");
      last_t[2] = t;
      CamRecord r;
      r.t = t;
      require(j.contains("tracks") && j["tracks"].is_array(), lineno, "cam record needs tracks");
      for (const json &o : j["tracks"]) {
        require(o.is_object() && o.contains("id") && o.contains("u") && o.contains("v"), lineno,
                "track needs id, u, v");
        CamRecord::Obs obs;
        obs.id = o["id"].get<std::uint64_t>();
        obs.u = o["u"].get<double>();
        obs.v = o["v"].get<double>();
        require(std::isfinite(obs.u) && std::isfinite(obs.v), lineno, "u, v must be finite");
        r.tracks.push_back(obs);
      }
      out.emplace_back(std::move(r));
    } else {
      throw LogParseError(lineno, "unknown record type '" + type + "'");
    }
  }
  return out;
}

void write_sensor_log(const std::string &path, const std::vector<SensorRecord> &records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_sensor_log: cannot open " + path);
  for (const SensorRecord &rec : records) {
    json j;
    if (const ImuRecord *r = std::get_if<ImuRecord>(&rec)) {
      j["type"] = "imu";
      j["t"] = r->t;
      j["w"] = {r->w.x(), r->w.y(), r->w.z()};
      j["a"] = {r->a.x(), r->a.y(), r->a.z()};
    } else if (const LidarRecord *r = std::get_if<LidarRecord>(&rec)) {
      j["type"] = "lidar";
      j["t"] = r->t;
      json rings = json::array();
      for (const auto &ring : r->rings) {
        json jr = json::array();
        for (const auto &p : ring) jr.push_back({p.x(), p.y(), p.z()});
        rings.push_back(std::move(jr));
      }
      j["rings"] = std::move(rings);
    } else if (const CamRecord *r = std::get_if<CamRecord>(&rec)) {
      j["type"] = "cam";
      j["t"] = r->t;
      json tracks = json::array();
      for (const auto &o : r->tracks) {
        tracks.push_back(json{{"id", o.id}, {"u", o.u}, {"v", o.v}});
      }
      j["tracks"] = std::move(tracks);
    }
    out << j.dump() << "\n";
  }
}

std::vector<TruthSample> read_truth_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_truth_csv: cannot open " + path);
  std::vector<TruthSample> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("t,", 0) == 0) continue;  // header
    }
    std::stringstream ss(line);
    std::string field;
    std::vector<double> vals;
    while (std::getline(ss, field, ',')) vals.push_back(std::stod(field));
    if (vals.size() != 11) throw std::runtime_error("read_truth_csv: expected 11 columns");
    TruthSample s;
    s.t = vals[0];
    s.p = Eigen::Vector3d(vals[1], vals[2], vals[3]);
    s.q = Eigen::Vector4d(vals[4], vals[5], vals[6], vals[7]);
    s.v = Eigen::Vector3d(vals[8], vals[9], vals[10]);
    out.push_back(s);
  }
  return out;
}

void write_truth_csv(const std::string &path, const std::vector<TruthSample> &truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_truth_csv: cannot open " + path);
  out << "t,px,py,pz,qx,qy,qz,qw,vx,vy,vz\n";
  char buf[512];
  for (const TruthSample &s : truth) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.p.x(),
                  s.p.y(), s.p.z(), s.q(0), s.q(1), s.q(2), s.q(3), s.v.x(), s.v.y(), s.v.z());
    out << buf;
  }
}

TruthSample interpolate_truth(const std::vector<TruthSample> &truth, double t) {
  if (truth.empty()) throw std::runtime_error("interpolate_truth: empty trajectory");
  if (t <= truth.front().t) return truth.front();
  if (t >= truth.back().t) return truth.back();
  auto it = std::lower_bound(truth.begin(), truth.end(), t,
                             [](const TruthSample &s, double v) { return s.t < v; });
  const TruthSample &b = *it;
  const TruthSample &a = *(it - 1);
  const double alpha = (t - a.t) / (b.t - a.t);
  TruthSample out;
  out.t = t;
  out.p = (1.0 - alpha) * a.p + alpha * b.p;
  out.v = (1.0 - alpha) * a.v + alpha * b.v;
  const Eigen::Vector4d dq = quat_multiply(b.q, quat_inverse(a.q));
  out.q = quat_multiply(quat_from_rotvec(alpha * rotvec_from_quat(dq)), a.q);
  return out;
}

}  // namespace lic
