#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "voi_twin/estimator.hpp"
#include "voi_twin/gnn.hpp"
#include "voi_twin/sensing.hpp"
#include "voi_twin/world.hpp"

namespace voi_twin {

enum class SchedulerKind { kVoi, kGreedy, kGnn };
enum class NlosMode { kExclude, kInflate };

struct SlotDurations {
  double sensing = 0.002;     // s
  double uplink = 0.001;      // s per scheduled agent
  double config = 0.005;      // T_config
  double downlink = 0.001;
};

struct ScenarioConfig {
  Room room;
  std::vector<SensingAgent> anchors;
  std::vector<Vec2> waypoints;
  double speed = 0.5;          // m/s
  double dt = 0.1;             // s per QI

  double accel_noise_std = 0.05;   // process noise, m/s^2
  StateVec process_mean = StateVec::Zero();

  bool imu_enabled = true;
  double imu_noise_std = 0.05;     // m/s^2 per axis
  double tracking_kp = 1.0;        // reference-tracking controller gains
  double tracking_kv = 2.0;
  double max_accel = 1.5;          // m/s^2

  double init_pos_std = 0.1;
  double init_vel_std = 0.05;

  double z_tag = 0.3;
  double max_range = std::numeric_limits<double>::infinity();
  NlosMode nlos_mode = NlosMode::kExclude;
  double nlos_std_multiplier = 5.0;
  JacobianMode jacobian = JacobianMode::kPredictedRange;
  bool actuation_delay = false;

  QualityTargets targets = QualityTargets::position_threshold(0.2);
  int budget = 6;
  int n_qis = 300;
  SlotDurations slots;
  SchedulerKind scheduler = SchedulerKind::kVoi;
  std::uint64_t seed = 0;

  // Used by the gnn scheduler kind and the dataset generator.
  std::string gnn_model_path;
  gnn::Aggregation gnn_aggregation = gnn::Aggregation::kMean;
  bool dataset_along_trajectory = false;

  ProcessModel process_model() const;
  Mat2 imu_cov() const;
  void validate() const;
};

// Six anchors around an 11 x 8.5 x 3.3 m hall and a rectangular lap.
ScenarioConfig default_scenario();

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_scenario(const std::string& path);

std::string to_string(SchedulerKind k);
SchedulerKind scheduler_kind_from_string(const std::string& s);

}  // namespace voi_twin
