#pragma once

#include <limits>
#include <set>
#include <span>
#include <vector>

#include "voi_twin/random.hpp"
#include "voi_twin/types.hpp"
#include "voi_twin/world.hpp"

namespace voi_twin {

struct SensingAgent {
  int id = 0;
  Vec3 position = Vec3::Zero();
  double noise_mean = 0.0;  // m
  double noise_var = 0.01;  // m^2
  bool active = true;
};

struct RangeObservation {
  int anchor_id = 0;
  double range = 0.0;
  int qi = 0;
};

struct ImuObservation {
  Vec2 accel_local = Vec2::Zero();
  double yaw = 0.0;
  Mat2 noise_cov = Mat2::Zero();
  int qi = 0;
};

double true_range(const Vec3& p_agv, const SensingAgent& anchor);

// range = max(0, d + w), w ~ N(noise_mean, noise_var).
RangeObservation sample_uwb(double d, const SensingAgent& agent, Rng& rng, int qi = 0);

// Global-frame acceleration from the local one:
// [ax; ay]_g = [[cos, sin], [-sin, cos]] [ax; ay]_l.
Vec2 rotate_imu(const Vec2& a_local, double yaw);

// Noisy acceleration sample; the returned observation keeps the sample in
// accel_local and leaves yaw at zero (caller sets the frame).
ImuObservation sample_imu(const Vec2& a_global_true, const Mat2& cov, Rng& rng, int qi = 0);

// Ids of active agents in predicted line of sight within max_range.
std::set<int> compute_available_set(const Vec2& belief_position, std::span<const SensingAgent> agents,
                                    const Room& room,
                                    double max_range = std::numeric_limits<double>::infinity(),
                                    double z_tag = 0.0);

const SensingAgent& find_agent(std::span<const SensingAgent> agents, int id);

void validate_agents(std::span<const SensingAgent> agents);

}  // namespace voi_twin
