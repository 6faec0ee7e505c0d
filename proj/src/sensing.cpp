#include "voi_twin/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "voi_twin/errors.hpp"
#include "voi_twin/linalg.hpp"

namespace voi_twin {

double true_range(const Vec3& p_agv, const SensingAgent& anchor) { return (p_agv - anchor.position).norm(); }

RangeObservation sample_uwb(double d, const SensingAgent& agent, Rng& rng, int qi) {
  if (!agent.active) throw UnavailableSensorError("anchor " + std::to_string(agent.id) + " is inactive");
  if (!(d >= 0.0)) throw ContractError("sample_uwb: distance must be nonnegative");
  double w = agent.noise_mean;
  if (agent.noise_var > 0.0) w = rng.normal(agent.noise_mean, std::sqrt(agent.noise_var));
  return {agent.id, std::max(0.0, d + w), qi};
}

Vec2 rotate_imu(const Vec2& a_local, double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * a_local.x() + s * a_local.y(), -s * a_local.x() + c * a_local.y()};
}

ImuObservation sample_imu(const Vec2& a_global_true, const Mat2& cov, Rng& rng, int qi) {
  if (!is_psd(cov)) throw ConfigError("IMU noise covariance is not symmetric positive semidefinite");
  ImuObservation obs;
  obs.accel_local = sample_gaussian(a_global_true, cov, rng);
  obs.noise_cov = cov;
  obs.qi = qi;
  return obs;
}

std::set<int> compute_available_set(const Vec2& belief_position, std::span<const SensingAgent> agents,
                                    const Room& room, double max_range, double z_tag) {
  if (agents.empty()) throw ContractError("compute_available_set: no agents");
  std::set<int> out;
  const Vec3 tag(belief_position.x(), belief_position.y(), z_tag);
  for (const SensingAgent& a : agents) {
    if (!a.active) continue;
    if (los_blocked(belief_position, a.position.head<2>(), room)) continue;
    if (true_range(tag, a) > max_range) continue;
    out.insert(a.id);
  }
  return out;
}

const SensingAgent& find_agent(std::span<const SensingAgent> agents, int id) {
  for (const SensingAgent& a : agents) {
    if (a.id == id) return a;
  }
  throw ContractError("unknown anchor id " + std::to_string(id));
}

void validate_agents(std::span<const SensingAgent> agents) {
  std::set<int> ids;
  for (const SensingAgent& a : agents) {
    if (!ids.insert(a.id).second) throw ConfigError("duplicate anchor id " + std::to_string(a.id));
    if (!(a.noise_var >= 0.0)) throw ConfigError("anchor " + std::to_string(a.id) + ": negative noise variance");
    if (!a.position.allFinite() || !std::isfinite(a.noise_mean)) {
      throw ConfigError("anchor " + std::to_string(a.id) + ": non-finite parameters");
    }
  }
}

}  // namespace voi_twin
