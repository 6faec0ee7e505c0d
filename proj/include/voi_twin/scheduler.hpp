#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "voi_twin/estimator.hpp"
#include "voi_twin/sensing.hpp"

namespace voi_twin {

struct Schedule {
  int qi = 0;
  std::vector<int> selected;
  Mat4 predicted_cov = Mat4::Zero();
  double objective_value = 0.0;
  // Loop passes taken by the VoI search; zero for the early exit.
  int iterations = 0;
};

struct SchedulerOptions {
  double z_tag = 0.3;
  // Per-agent variance multiplier applied while planning (NLoS inflation).
  // Missing ids use 1.
  std::map<int, double> variance_scale;

  double scale_for(int id) const;
};

// sum_k max([cov]_kk / xi_k^2 - 1, 0)
double voi_objective(const Mat4& cov, const QualityTargets& targets);

// Closest agent to the predicted tag position; ties go to the lowest id.
std::optional<SensingAgent> nearest_available(const Vec2& prior_position, std::span<const SensingAgent> available,
                                              double z_tag);

// Covariance after fusing one range row per agent, in the given order.
Mat4 planned_cov(const Belief& prior, std::span<const SensingAgent> agents, const SchedulerOptions& opts = {});

Schedule schedule_voi(const Belief& prior, std::span<const SensingAgent> available, int budget,
                      const QualityTargets& targets, const SchedulerOptions& opts = {});

// The min(|available|, budget) nearest agents.
Schedule schedule_greedy_all(const Belief& prior, std::span<const SensingAgent> available, int budget,
                             const QualityTargets& targets, const SchedulerOptions& opts = {});

}  // namespace voi_twin
