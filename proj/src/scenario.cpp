#include "voi_twin/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "voi_twin/errors.hpp"
#include "voi_twin/linalg.hpp"

namespace voi_twin {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

Vec2 vec2_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw ConfigError("expected a 2-element point");
  return {v[0], v[1]};
}

Vec3 vec3_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw ConfigError("expected a 3-element point");
  return {v[0], v[1], v[2]};
}

std::string nlos_name(NlosMode m) { return m == NlosMode::kExclude ? "exclude" : "inflate"; }
std::string jacobian_name(JacobianMode m) { return m == JacobianMode::kPredictedRange ? "predicted" : "measured"; }

}  // namespace

ProcessModel ScenarioConfig::process_model() const {
  ProcessModel m = ProcessModel::constant_velocity(dt, ProcessModel::white_acceleration_cov(dt, accel_noise_std));
  m.mu_u = process_mean;
  return m;
}

Mat2 ScenarioConfig::imu_cov() const { return imu_noise_std * imu_noise_std * Mat2::Identity(); }

void ScenarioConfig::validate() const {
  room.validate();
  if (anchors.empty()) throw ConfigError("scenario has no anchors");
  validate_agents(anchors);
  if (waypoints.size() < 2) throw ConfigError("trajectory needs at least two waypoints");
  for (const Vec2& w : waypoints) {
    if (!room.contains(w)) throw ConfigError("waypoint outside the room");
  }
  if (!(speed > 0.0)) throw ConfigError("speed must be positive");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(accel_noise_std >= 0.0) || !(imu_noise_std >= 0.0)) throw ConfigError("noise levels must be nonnegative");
  if (!(init_pos_std >= 0.0) || !(init_vel_std >= 0.0)) throw ConfigError("initial uncertainty must be nonnegative");
  if (!(max_accel > 0.0)) throw ConfigError("max_accel must be positive");
  if (!(max_range > 0.0)) throw ConfigError("max_range must be positive");
  if (!(nlos_std_multiplier >= 1.0)) throw ConfigError("nlos_std_multiplier must be at least 1");
  targets.validate();
  if (budget < 0) throw ConfigError("budget C must be nonnegative");
  if (n_qis < 1) throw ConfigError("n_qis must be at least 1");
  if (slots.sensing < 0 || slots.uplink < 0 || slots.config < 0 || slots.downlink < 0) {
    throw ConfigError("slot durations must be nonnegative");
  }
  process_model().validate();
}

ScenarioConfig default_scenario() {
  ScenarioConfig c;
  c.room = Room{11.0, 8.5, 3.3, {}};
  const double z = 2.5;
  const Vec3 positions[] = {{0.5, 0.5, z}, {5.5, 0.3, z}, {10.5, 0.5, z}, {10.5, 8.0, z}, {5.5, 8.2, z}, {0.5, 8.0, z}};
  int id = 1;
  for (const Vec3& p : positions) c.anchors.push_back({id++, p, 0.0, 0.01, true});
  c.waypoints = {{2.0, 2.0}, {9.0, 2.0}, {9.0, 6.5}, {2.0, 6.5}};
  return c;
}

std::string to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::kVoi:
      return "voi";
    case SchedulerKind::kGreedy:
      return "greedy";
    case SchedulerKind::kGnn:
      return "gnn";
  }
  return "voi";
}

SchedulerKind scheduler_kind_from_string(const std::string& s) {
  if (s == "voi") return SchedulerKind::kVoi;
  if (s == "greedy") return SchedulerKind::kGreedy;
  if (s == "gnn") return SchedulerKind::kGnn;
  throw ConfigError("unknown scheduler '" + s + "' (expected voi, greedy or gnn)");
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig c = default_scenario();
  try {
    reject_unknown(j,
                   {"room", "anchors", "trajectory", "dt", "process", "imu", "controller", "initial", "sensing",
                    "targets", "budget", "n_qis", "slots", "scheduler", "seed", "actuation_delay", "gnn"},
                   "scenario");
    if (j.contains("room")) {
      const json& r = j.at("room");
      reject_unknown(r, {"width", "depth", "height", "obstacles"}, "room");
      read_opt(r, "width", c.room.width);
      read_opt(r, "depth", c.room.depth);
      read_opt(r, "height", c.room.height);
      if (r.contains("obstacles")) {
        c.room.obstacles.clear();
        for (const json& o : r.at("obstacles")) {
          const auto v = o.get<std::vector<double>>();
          if (v.size() != 4) throw ConfigError("obstacle must be [xmin, ymin, xmax, ymax]");
          c.room.obstacles.push_back({v[0], v[1], v[2], v[3]});
        }
      }
    }
    if (j.contains("anchors")) {
      c.anchors.clear();
      for (const json& a : j.at("anchors")) {
        reject_unknown(a, {"id", "position", "noise_mean", "noise_std", "noise_var", "active"}, "anchor");
        SensingAgent agent;
        agent.id = a.at("id").get<int>();
        agent.position = vec3_from(a.at("position"));
        read_opt(a, "noise_mean", agent.noise_mean);
        if (a.contains("noise_std") && a.contains("noise_var")) {
          throw ConfigError("anchor " + std::to_string(agent.id) + ": give noise_std or noise_var, not both");
        }
        if (a.contains("noise_std")) {
          const double s = a.at("noise_std").get<double>();
          agent.noise_var = s * s;
        }
        read_opt(a, "noise_var", agent.noise_var);
        read_opt(a, "active", agent.active);
        c.anchors.push_back(agent);
      }
    }
    if (j.contains("trajectory")) {
      const json& t = j.at("trajectory");
      reject_unknown(t, {"waypoints", "speed"}, "trajectory");
      if (t.contains("waypoints")) {
        c.waypoints.clear();
        for (const json& w : t.at("waypoints")) c.waypoints.push_back(vec2_from(w));
      }
      read_opt(t, "speed", c.speed);
    }
    read_opt(j, "dt", c.dt);
    if (j.contains("process")) {
      const json& p = j.at("process");
      reject_unknown(p, {"accel_noise_std", "mean"}, "process");
      read_opt(p, "accel_noise_std", c.accel_noise_std);
      if (p.contains("mean")) {
        const auto v = p.at("mean").get<std::vector<double>>();
        if (v.size() != 4) throw ConfigError("process mean must have 4 entries");
        c.process_mean = StateVec(v[0], v[1], v[2], v[3]);
      }
    }
    if (j.contains("imu")) {
      const json& i = j.at("imu");
      reject_unknown(i, {"enabled", "noise_std"}, "imu");
      read_opt(i, "enabled", c.imu_enabled);
      read_opt(i, "noise_std", c.imu_noise_std);
    }
    if (j.contains("controller")) {
      const json& k = j.at("controller");
      reject_unknown(k, {"kp", "kv", "max_accel"}, "controller");
      read_opt(k, "kp", c.tracking_kp);
      read_opt(k, "kv", c.tracking_kv);
      read_opt(k, "max_accel", c.max_accel);
    }
    if (j.contains("initial")) {
      const json& i = j.at("initial");
      reject_unknown(i, {"pos_std", "vel_std"}, "initial");
      read_opt(i, "pos_std", c.init_pos_std);
      read_opt(i, "vel_std", c.init_vel_std);
    }
    if (j.contains("sensing")) {
      const json& s = j.at("sensing");
      reject_unknown(s, {"z_tag", "max_range", "nlos_mode", "nlos_std_multiplier", "jacobian"}, "sensing");
      read_opt(s, "z_tag", c.z_tag);
      read_opt(s, "max_range", c.max_range);
      read_opt(s, "nlos_std_multiplier", c.nlos_std_multiplier);
      if (s.contains("nlos_mode")) {
        const auto m = s.at("nlos_mode").get<std::string>();
        if (m == "exclude") {
          c.nlos_mode = NlosMode::kExclude;
        } else if (m == "inflate") {
          c.nlos_mode = NlosMode::kInflate;
        } else {
          throw ConfigError("nlos_mode must be 'exclude' or 'inflate'");
        }
      }
      if (s.contains("jacobian")) {
        const auto m = s.at("jacobian").get<std::string>();
        if (m == "predicted") {
          c.jacobian = JacobianMode::kPredictedRange;
        } else if (m == "measured") {
          c.jacobian = JacobianMode::kMeasuredRange;
        } else {
          throw ConfigError("jacobian must be 'predicted' or 'measured'");
        }
      }
    }
    if (j.contains("targets")) {
      const json& t = j.at("targets");
      reject_unknown(t, {"position_threshold", "xi"}, "targets");
      if (t.contains("position_threshold") && t.contains("xi")) {
        throw ConfigError("targets: give position_threshold or xi, not both");
      }
      if (t.contains("position_threshold")) {
        c.targets = QualityTargets::position_threshold(t.at("position_threshold").get<double>());
      }
      if (t.contains("xi")) {
        const auto v = t.at("xi").get<std::vector<double>>();
        if (v.size() != 4) throw ConfigError("targets.xi must have 4 entries");
        c.targets.xi = Eigen::Vector4d(v[0], v[1], v[2], v[3]);
      }
    }
    read_opt(j, "budget", c.budget);
    read_opt(j, "n_qis", c.n_qis);
    if (j.contains("slots")) {
      const json& s = j.at("slots");
      reject_unknown(s, {"sensing", "uplink", "config", "downlink"}, "slots");
      read_opt(s, "sensing", c.slots.sensing);
      read_opt(s, "uplink", c.slots.uplink);
      read_opt(s, "config", c.slots.config);
      read_opt(s, "downlink", c.slots.downlink);
    }
    if (j.contains("scheduler")) c.scheduler = scheduler_kind_from_string(j.at("scheduler").get<std::string>());
    read_opt(j, "seed", c.seed);
    read_opt(j, "actuation_delay", c.actuation_delay);
    if (j.contains("gnn")) {
      const json& g = j.at("gnn");
      reject_unknown(g, {"model", "aggregation", "dataset_along_trajectory"}, "gnn");
      read_opt(g, "model", c.gnn_model_path);
      read_opt(g, "dataset_along_trajectory", c.dataset_along_trajectory);
      if (g.contains("aggregation")) {
        const auto a = g.at("aggregation").get<std::string>();
        if (a != "mean" && a != "sum") throw ConfigError("gnn.aggregation must be 'mean' or 'sum'");
        c.gnn_aggregation = a == "mean" ? gnn::Aggregation::kMean : gnn::Aggregation::kSum;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  c.validate();
  return c;
}

json scenario_to_json(const ScenarioConfig& c) {
  json anchors = json::array();
  for (const SensingAgent& a : c.anchors) {
    anchors.push_back({{"id", a.id},
                       {"position", {a.position.x(), a.position.y(), a.position.z()}},
                       {"noise_mean", a.noise_mean},
                       {"noise_var", a.noise_var},
                       {"active", a.active}});
  }
  json obstacles = json::array();
  for (const Rect& r : c.room.obstacles) obstacles.push_back({r.xmin, r.ymin, r.xmax, r.ymax});
  json waypoints = json::array();
  for (const Vec2& w : c.waypoints) waypoints.push_back({w.x(), w.y()});

  json j;
  j["room"] = {{"width", c.room.width}, {"depth", c.room.depth}, {"height", c.room.height}, {"obstacles", obstacles}};
  j["anchors"] = anchors;
  j["trajectory"] = {{"waypoints", waypoints}, {"speed", c.speed}};
  j["dt"] = c.dt;
  j["process"] = {{"accel_noise_std", c.accel_noise_std},
                  {"mean", {c.process_mean(0), c.process_mean(1), c.process_mean(2), c.process_mean(3)}}};
  j["imu"] = {{"enabled", c.imu_enabled}, {"noise_std", c.imu_noise_std}};
  j["controller"] = {{"kp", c.tracking_kp}, {"kv", c.tracking_kv}, {"max_accel", c.max_accel}};
  j["initial"] = {{"pos_std", c.init_pos_std}, {"vel_std", c.init_vel_std}};
  j["sensing"] = {{"z_tag", c.z_tag},
                  {"max_range", std::isfinite(c.max_range) ? json(c.max_range) : json(nullptr)},
                  {"nlos_mode", nlos_name(c.nlos_mode)},
                  {"nlos_std_multiplier", c.nlos_std_multiplier},
                  {"jacobian", jacobian_name(c.jacobian)}};
  j["targets"] = {{"xi", {c.targets.xi(0), c.targets.xi(1), c.targets.xi(2), c.targets.xi(3)}}};
  j["budget"] = c.budget;
  j["n_qis"] = c.n_qis;
  j["slots"] = {{"sensing", c.slots.sensing},
                {"uplink", c.slots.uplink},
                {"config", c.slots.config},
                {"downlink", c.slots.downlink}};
  j["scheduler"] = to_string(c.scheduler);
  j["seed"] = c.seed;
  j["actuation_delay"] = c.actuation_delay;
  j["gnn"] = {{"model", c.gnn_model_path},
              {"aggregation", c.gnn_aggregation == gnn::Aggregation::kMean ? "mean" : "sum"},
              {"dataset_along_trajectory", c.dataset_along_trajectory}};
  return j;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open scenario '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("scenario '" + path + "' is not valid JSON: " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace voi_twin
