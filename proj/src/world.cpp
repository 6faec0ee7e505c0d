#include "voi_twin/world.hpp"

#include <cmath>
#include <string>

#include "voi_twin/errors.hpp"
#include "voi_twin/linalg.hpp"

namespace voi_twin {

ProcessModel ProcessModel::constant_velocity(double dt, const Mat4& Cu) {
  ProcessModel m;
  m.dt = dt;
  m.F << 1, dt, 0, 0,
         0, 1, 0, 0,
         0, 0, 1, dt,
         0, 0, 0, 1;
  m.G << 0.5 * dt * dt, 0,
         dt, 0,
         0, 0.5 * dt * dt,
         0, dt;
  m.Cu = Cu;
  return m;
}

Mat4 ProcessModel::white_acceleration_cov(double dt, double sigma_a) {
  const ProcessModel m = constant_velocity(dt);
  return sigma_a * sigma_a * m.G * m.G.transpose();
}

void ProcessModel::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("process model: dt must be positive");
  if (!F.allFinite() || !G.allFinite() || !mu_u.allFinite()) {
    throw ConfigError("process model: non-finite entries");
  }
  if (!is_psd(Cu)) throw ConfigError("process model: Cu is not symmetric positive semidefinite");
}

void Room::validate() const {
  if (!(width > 0 && depth > 0 && height > 0)) throw ConfigError("room dimensions must be positive");
  for (const Rect& r : obstacles) {
    if (!(r.xmin < r.xmax && r.ymin < r.ymax)) throw ConfigError("obstacle rectangle is empty or inverted");
    if (r.xmin < 0 || r.ymin < 0 || r.xmax > width || r.ymax > depth) {
      throw ConfigError("obstacle lies outside the room");
    }
  }
}

double Room::diagonal() const { return std::sqrt(width * width + depth * depth + height * height); }

bool Room::contains(const Vec2& p, double tol) const {
  return p.x() >= -tol && p.y() >= -tol && p.x() <= width + tol && p.y() <= depth + tol;
}

StateVec step_deterministic(const StateVec& s, const Vec2& a_cmd, const ProcessModel& model) {
  return model.F * s + model.G * a_cmd;
}

StateVec step_truth(const StateVec& s, const Vec2& a_cmd, const ProcessModel& model, Rng& rng) {
  if (!a_cmd.allFinite()) throw ContractError("step_truth: non-finite acceleration command");
  const Eigen::VectorXd u = sample_gaussian(model.mu_u, model.Cu, rng);
  return step_deterministic(s, a_cmd, model) + u;
}

std::vector<StateVec> generate_trajectory(std::span<const Vec2> waypoints, double speed,
                                          const ProcessModel& model, int n_qis) {
  if (waypoints.size() < 2) throw ConfigError("trajectory needs at least two waypoints");
  if (!(speed > 0.0)) throw ConfigError("trajectory speed must be positive");
  if (n_qis < 1) throw ConfigError("trajectory needs at least one QI");
  model.validate();

  const std::size_t n = waypoints.size();
  std::vector<double> seg_len(n);
  double lap = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    seg_len[i] = (waypoints[(i + 1) % n] - waypoints[i]).norm();
    if (seg_len[i] <= 1e-12) {
      throw ConfigError("coincident consecutive waypoints at index " + std::to_string(i));
    }
    lap += seg_len[i];
  }

  std::vector<StateVec> out;
  out.reserve(static_cast<std::size_t>(n_qis));
  for (int k = 0; k < n_qis; ++k) {
    double arc = std::fmod(speed * model.dt * k, lap);
    std::size_t seg = 0;
    while (seg + 1 < n && arc >= seg_len[seg]) {
      arc -= seg_len[seg];
      ++seg;
    }
    // fmod rounding can leave arc a hair past the closing segment.
    arc = std::min(arc, seg_len[seg]);
    const Vec2 a = waypoints[seg];
    const Vec2 dir = (waypoints[(seg + 1) % n] - a) / seg_len[seg];
    const Vec2 p = a + arc * dir;
    const Vec2 v = speed * dir;
    out.emplace_back(p.x(), v.x(), p.y(), v.y());
  }
  return out;
}

bool segment_hits_rect(const Vec2& a, const Vec2& b, const Rect& r) {
  // Liang-Barsky clip against the closed rectangle, then require the clipped
  // chord to reach the interior.
  const Vec2 d = b - a;
  double t0 = 0.0;
  double t1 = 1.0;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {a.x() - r.xmin, r.xmax - a.x(), a.y() - r.ymin, r.ymax - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return false;
  }
  if (t1 - t0 <= 1e-12) return false;
  // A chord of a convex set whose midpoint is on the boundary lies on the boundary.
  const Vec2 mid = a + 0.5 * (t0 + t1) * d;
  return mid.x() > r.xmin && mid.x() < r.xmax && mid.y() > r.ymin && mid.y() < r.ymax;
}

bool los_blocked(const Vec2& p_agv, const Vec2& p_anchor, const Room& room) {
  for (const Rect& r : room.obstacles) {
    if (segment_hits_rect(p_agv, p_anchor, r)) return true;
  }
  return false;
}

}  // namespace voi_twin
