#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "voi_twin/estimator.hpp"
#include "voi_twin/gnn.hpp"
#include "voi_twin/scenario.hpp"
#include "voi_twin/scheduler.hpp"

namespace voi_twin {

struct QiMetrics {
  int qi = 0;
  StateVec truth = StateVec::Zero();
  StateVec estimate = StateVec::Zero();
  double position_error = 0.0;
  double predicted_position_var = 0.0;  // Psi_11 + Psi_33 after the update
  int n_selected = 0;
  std::vector<int> selected;
  double objective = 0.0;
  double qi_latency = 0.0;
  double nees = 0.0;
};

struct ImuRecord {
  int qi = 0;
  Vec2 accel_local = Vec2::Zero();
  double yaw = 0.0;
};

struct EpisodeResult {
  std::vector<QiMetrics> metrics;
  std::vector<Belief> beliefs;  // posterior per QI
  std::vector<Schedule> schedules;
  std::vector<RangeObservation> uwb_log;
  std::vector<ImuRecord> imu_log;
};

EpisodeResult run_episode(const ScenarioConfig& cfg);

// Same as above with a preloaded model for the gnn scheduler kind.
EpisodeResult run_episode(const ScenarioConfig& cfg, const gnn::GnnModel* model);

// Estimator and scheduler re-run over recorded observations. Scheduled agents
// without a recorded range at that QI contribute nothing.
EpisodeResult replay(const ScenarioConfig& cfg, std::span<const RangeObservation> uwb,
                     std::span<const ImuRecord> imu);

double compute_mse(std::span<const QiMetrics> metrics);
double compute_rmse(std::span<const QiMetrics> metrics);

// sqrt(mean(Psi_11 + Psi_33)).
double predicted_rmse(std::span<const QiMetrics> metrics);
double mean_selected(std::span<const QiMetrics> metrics);
double mean_latency(std::span<const QiMetrics> metrics);
double mean_nees(std::span<const QiMetrics> metrics);

// e^T Psi^-1 e, eigenvalues floored at 1e-12.
double compute_nees(const StateVec& truth, const Belief& belief);

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;
};

std::vector<CdfPoint> empirical_cdf(std::vector<double> errors);
double cdf_at(std::span<const CdfPoint> cdf, double v);

// Labeled samples with noisy ranges from every available anchor.
std::vector<gnn::Sample> generate_gnn_dataset(const ScenarioConfig& cfg, int n_samples);

void write_metrics_csv(std::ostream& os, std::span<const QiMetrics> metrics);
void write_belief_csv(std::ostream& os, std::span<const Belief> beliefs);
void write_schedule_csv(std::ostream& os, std::span<const Schedule> schedules);
void write_uwb_csv(std::ostream& os, std::span<const RangeObservation> obs);
void write_imu_csv(std::ostream& os, std::span<const ImuRecord> obs);
std::vector<RangeObservation> read_uwb_csv(std::istream& is);
std::vector<ImuRecord> read_imu_csv(std::istream& is);

}  // namespace voi_twin
