#pragma once

#include <span>
#include <vector>

#include "voi_twin/random.hpp"
#include "voi_twin/types.hpp"

namespace voi_twin {

struct ProcessModel {
  double dt = 0.1;
  Mat4 F = Mat4::Identity();
  Mat42 G = Mat42::Zero();
  Mat4 Cu = Mat4::Zero();
  StateVec mu_u = StateVec::Zero();

  // Constant-velocity kinematics with acceleration input.
  static ProcessModel constant_velocity(double dt, const Mat4& Cu = Mat4::Zero());

  // Cu = sigma_a^2 G G^T, the discrete white-noise-acceleration covariance.
  static Mat4 white_acceleration_cov(double dt, double sigma_a);

  void validate() const;
};

struct Rect {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;
};

struct Room {
  double width = 11.0;
  double depth = 8.5;
  double height = 3.3;
  std::vector<Rect> obstacles;

  void validate() const;
  double diagonal() const;
  bool contains(const Vec2& p, double tol = 1e-9) const;
};

StateVec step_truth(const StateVec& s, const Vec2& a_cmd, const ProcessModel& model, Rng& rng);

// Noise-free part of step_truth.
StateVec step_deterministic(const StateVec& s, const Vec2& a_cmd, const ProcessModel& model);

// Piecewise-constant-velocity reference around the closed polygon of
// waypoints, sampled every model.dt. Cycles when n_qis exceeds a lap.
std::vector<StateVec> generate_trajectory(std::span<const Vec2> waypoints, double speed,
                                          const ProcessModel& model, int n_qis);

// True iff the open segment a-b passes through the interior of any obstacle.
bool los_blocked(const Vec2& p_agv, const Vec2& p_anchor, const Room& room);

bool segment_hits_rect(const Vec2& a, const Vec2& b, const Rect& r);

}  // namespace voi_twin
