#include "doctest.h"

#include <cmath>
#include <numbers>

#include "voi_twin/errors.hpp"
#include "voi_twin/sensing.hpp"

using namespace voi_twin;

namespace {

SensingAgent agent_at(int id, Vec3 p, double var = 0.0, double mean = 0.0) { return {id, p, mean, var, true}; }

}  // namespace

TEST_CASE("true_range") {
  CHECK(true_range({3, 4, 0}, agent_at(1, {0, 0, 0})) == doctest::Approx(5.0));
  CHECK(true_range({1, 2, 3}, agent_at(1, {1, 2, 3})) == 0.0);
  CHECK(true_range({1, 1, 1}, agent_at(1, {2, 2, 2})) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("sample_uwb deterministic cases") {
  Rng rng(3);
  CHECK(sample_uwb(5.0, agent_at(1, {}, 0.0, 0.0), rng).range == 5.0);
  CHECK(sample_uwb(5.0, agent_at(1, {}, 0.0, 0.02), rng).range == doctest::Approx(5.02));
  CHECK(sample_uwb(0.01, agent_at(1, {}, 0.0, -1.0), rng).range == 0.0);  // clamped

  SensingAgent off = agent_at(4, {});
  off.active = false;
  CHECK_THROWS_AS(sample_uwb(5.0, off, rng), UnavailableSensorError);
}

TEST_CASE("sample_uwb Monte Carlo statistics") {
  Rng rng(11);
  const SensingAgent a = agent_at(1, {}, 0.01);
  const int n = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = sample_uwb(5.0, a, rng).range;
    sum += r;
    sq += r * r;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean - 5.0) < 0.002);
  CHECK(std::abs(sd - 0.1) < 0.01);
}

TEST_CASE("rotate_imu examples") {
  CHECK(rotate_imu({1, 0}, 0.0).isApprox(Vec2(1, 0)));
  const Vec2 q = rotate_imu({1, 0}, std::numbers::pi / 2);
  CHECK(q.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.y() == doctest::Approx(-1.0));
  const Vec2 h = rotate_imu({0, 2}, std::numbers::pi);
  CHECK(std::abs(h.x()) < 1e-12);
  CHECK(h.y() == doctest::Approx(-2.0));
}

TEST_CASE("rotate_imu preserves norm and inverts with -yaw") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 a(rng.uniform(-10, 10), rng.uniform(-10, 10));
    const double yaw = rng.uniform(-10, 10);
    CHECK(std::abs(rotate_imu(a, yaw).norm() - a.norm()) < 1e-12);
    CHECK((rotate_imu(rotate_imu(a, yaw), -yaw) - a).norm() < 1e-12);
  }
}

TEST_CASE("sample_imu") {
  Rng rng(9);
  CHECK(sample_imu({0.3, -0.1}, Mat2::Zero(), rng).accel_local.isApprox(Vec2(0.3, -0.1)));

  Mat2 bad;
  bad << 1, 0, 0, -0.5;
  CHECK_THROWS_AS(sample_imu(Vec2::Zero(), bad, rng), ConfigError);

  const double sigma = 0.2;
  const int n = 100000;
  Vec2 sq = Vec2::Zero();
  for (int i = 0; i < n; ++i) sq += sample_imu(Vec2::Zero(), sigma * sigma * Mat2::Identity(), rng).accel_local.cwiseAbs2();
  CHECK(std::abs(std::sqrt(sq.x() / n) - sigma) < 0.05 * sigma);
  CHECK(std::abs(std::sqrt(sq.y() / n) - sigma) < 0.05 * sigma);
}

TEST_CASE("compute_available_set") {
  std::vector<SensingAgent> agents;
  const Vec3 pos[] = {{0, 0, 2}, {5, 0, 2}, {10, 0, 2}, {10, 8, 2}, {5, 8, 2}, {0, 8, 2}};
  for (int i = 0; i < 6; ++i) agents.push_back(agent_at(i + 1, pos[i], 0.01));
  Room room{10, 8, 3, {}};
  const Vec2 p(5, 4);

  CHECK(compute_available_set(p, agents, room).size() == 6);

  room.obstacles = {{4, 1, 6, 2}};  // between p and anchor 2
  const auto blocked = compute_available_set(p, agents, room);
  CHECK(blocked.size() == 5);
  CHECK_FALSE(blocked.count(2));

  agents[0].active = false;
  CHECK_FALSE(compute_available_set(p, agents, Room{10, 8, 3, {}}).count(1));

  // z_tag matters for the range cut: anchor 2 is 4 m away in plan, more in 3D.
  CHECK(compute_available_set(p, agents, Room{10, 8, 3, {}}, 4.1, 2.0).count(2));
  CHECK_FALSE(compute_available_set(p, agents, Room{10, 8, 3, {}}, 4.1, 0.0).count(2));

  CHECK_THROWS_AS(compute_available_set(p, std::vector<SensingAgent>{}, room), ContractError);
}

TEST_CASE("adding an obstacle never enlarges the available set") {
  Rng rng(17);
  std::vector<SensingAgent> agents;
  for (int i = 0; i < 8; ++i) agents.push_back(agent_at(i, {rng.uniform(0, 10), rng.uniform(0, 10), 2.0}, 0.01));
  for (int trial = 0; trial < 200; ++trial) {
    Room room{10, 10, 3, {}};
    const Vec2 p(rng.uniform(0, 10), rng.uniform(0, 10));
    auto before = compute_available_set(p, agents, room);
    for (int k = 0; k < 3; ++k) {
      const double x = rng.uniform(0, 8);
      const double y = rng.uniform(0, 8);
      room.obstacles.push_back({x, y, x + rng.uniform(0.1, 2), y + rng.uniform(0.1, 2)});
      const auto after = compute_available_set(p, agents, room);
      for (int id : after) CHECK(before.count(id));
      before = after;
    }
  }
}
