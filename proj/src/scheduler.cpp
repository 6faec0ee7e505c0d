#include "voi_twin/scheduler.hpp"

#include <algorithm>
#include <string>

#include "voi_twin/errors.hpp"

namespace voi_twin {

namespace {

double planning_distance(const Vec2& p, const SensingAgent& a, double z_tag) {
  return true_range(Vec3(p.x(), p.y(), z_tag), a);
}

void check_budget(int budget) {
  if (budget < 0) throw ConfigError("scheduling budget C must be nonnegative, got " + std::to_string(budget));
}

}  // namespace

double SchedulerOptions::scale_for(int id) const {
  const auto it = variance_scale.find(id);
  return it == variance_scale.end() ? 1.0 : it->second;
}

double voi_objective(const Mat4& cov, const QualityTargets& targets) {
  const Eigen::Vector4d bound = targets.xi_squared();
  double total = 0.0;
  for (int k = 0; k < kStateDim; ++k) total += std::max(cov(k, k) / bound(k) - 1.0, 0.0);
  return total;
}

std::optional<SensingAgent> nearest_available(const Vec2& prior_position, std::span<const SensingAgent> available,
                                              double z_tag) {
  std::optional<SensingAgent> best;
  double best_d = 0.0;
  for (const SensingAgent& a : available) {
    const double d = planning_distance(prior_position, a, z_tag);
    if (!best || d < best_d || (d == best_d && a.id < best->id)) {
      best = a;
      best_d = d;
    }
  }
  return best;
}

Mat4 planned_cov(const Belief& prior, std::span<const SensingAgent> agents, const SchedulerOptions& opts) {
  if (agents.empty()) return prior.cov;
  std::vector<RowInput> rows;
  rows.reserve(agents.size());
  for (const SensingAgent& a : agents) {
    const RangeRow rr = range_jacobian(prior.mean, a, opts.z_tag);
    rows.push_back({rr.row, rr.predicted_range, 0.0, a.noise_var * opts.scale_for(a.id), a.noise_mean});
  }
  const StackedObservation obs = stack(rows);
  return predicted_posterior_cov(prior.cov, obs.H, obs.Cw);
}

Schedule schedule_voi(const Belief& prior, std::span<const SensingAgent> available, int budget,
                      const QualityTargets& targets, const SchedulerOptions& opts) {
  check_budget(budget);
  Schedule out;
  out.qi = prior.qi;
  out.predicted_cov = prior.cov;

  // The prior alone satisfies every certainty bound.
  if (meets_targets(prior.cov, targets).ok) {
    out.objective_value = voi_objective(prior.cov, targets);
    return out;
  }

  const Vec2 position = position_of(prior.mean);
  std::vector<SensingAgent> pool(available.begin(), available.end());
  std::vector<SensingAgent> chosen;
  Mat4 cov = prior.cov;

  while (static_cast<int>(chosen.size()) < budget && !meets_targets(cov, targets).ok) {
    const std::optional<SensingAgent> next = nearest_available(position, pool, opts.z_tag);
    if (!next) break;
    chosen.push_back(*next);
    std::erase_if(pool, [&](const SensingAgent& a) { return a.id == next->id; });
    cov = planned_cov(prior, chosen, opts);
    ++out.iterations;
  }

  out.selected.reserve(chosen.size());
  for (const SensingAgent& a : chosen) out.selected.push_back(a.id);
  out.predicted_cov = cov;
  out.objective_value = voi_objective(cov, targets);
  return out;
}

Schedule schedule_greedy_all(const Belief& prior, std::span<const SensingAgent> available, int budget,
                             const QualityTargets& targets, const SchedulerOptions& opts) {
  check_budget(budget);
  const Vec2 position = position_of(prior.mean);
  std::vector<std::pair<double, SensingAgent>> ranked;
  ranked.reserve(available.size());
  for (const SensingAgent& a : available) ranked.emplace_back(planning_distance(position, a, opts.z_tag), a);
  std::sort(ranked.begin(), ranked.end(), [](const auto& l, const auto& r) {
    return l.first != r.first ? l.first < r.first : l.second.id < r.second.id;
  });
  const std::size_t take = std::min(ranked.size(), static_cast<std::size_t>(budget));

  std::vector<SensingAgent> chosen;
  Schedule out;
  out.qi = prior.qi;
  for (std::size_t i = 0; i < take; ++i) {
    chosen.push_back(ranked[i].second);
    out.selected.push_back(ranked[i].second.id);
  }
  out.predicted_cov = planned_cov(prior, chosen, opts);
  out.objective_value = voi_objective(out.predicted_cov, targets);
  out.iterations = static_cast<int>(take);
  return out;
}

}  // namespace voi_twin
