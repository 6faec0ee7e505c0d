#include "doctest.h"

#include <cmath>
#include <vector>

#include "voi_twin/errors.hpp"
#include "voi_twin/world.hpp"

using namespace voi_twin;

namespace {

// Dense sampling of the open segment; true if any sample is strictly inside r.
bool sampled_hit(const Vec2& a, const Vec2& b, const Rect& r, int samples = 100000) {
  for (int i = 1; i < samples; ++i) {
    const Vec2 p = a + (static_cast<double>(i) / samples) * (b - a);
    if (p.x() > r.xmin && p.x() < r.xmax && p.y() > r.ymin && p.y() < r.ymax) return true;
  }
  return false;
}

ProcessModel unit_model() { return ProcessModel::constant_velocity(1.0); }

}  // namespace

TEST_CASE("step_truth with zero noise is pure kinematics") {
  Rng rng(1);
  const ProcessModel m = unit_model();

  CHECK(step_truth(StateVec(0, 1, 0, 0), Vec2::Zero(), m, rng).isApprox(StateVec(1, 1, 0, 0)));
  CHECK(step_truth(StateVec::Zero(), Vec2(1, 0), m, rng).isApprox(StateVec(0.5, 1, 0, 0)));

  ProcessModel identity = m;
  identity.F = Mat4::Identity();
  CHECK(step_truth(StateVec(2, 0, 3, 0), Vec2::Zero(), identity, rng) == StateVec(2, 0, 3, 0));
}

TEST_CASE("constant-velocity matrices") {
  const ProcessModel m = ProcessModel::constant_velocity(0.1);
  Mat42 G;
  G << 0.005, 0, 0.1, 0, 0, 0.005, 0, 0.1;
  CHECK(m.G.isApprox(G));
  CHECK(m.F(0, 1) == doctest::Approx(0.1));
  CHECK(m.F(2, 3) == doctest::Approx(0.1));
}

TEST_CASE("step_truth rejects non-PSD process noise") {
  ProcessModel m = unit_model();
  m.Cu(0, 0) = -1.0;
  Rng rng(0);
  CHECK_THROWS_AS(step_truth(StateVec::Zero(), Vec2::Zero(), m, rng), ConfigError);
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("process noise sample covariance converges to Cu") {
  Mat4 Cu;
  Cu << 0.04, 0.01, 0.0, 0.0,
        0.01, 0.09, 0.0, 0.02,
        0.0, 0.0, 0.01, 0.0,
        0.0, 0.02, 0.0, 0.05;
  const ProcessModel m = ProcessModel::constant_velocity(0.1, Cu);
  const StateVec s(1, 2, 3, 4);
  const Vec2 a(0.3, -0.2);
  const StateVec det = step_deterministic(s, a, m);
  Rng rng(2024);
  const int n = 100000;
  Mat4 acc = Mat4::Zero();
  StateVec mean = StateVec::Zero();
  std::vector<StateVec> d;
  d.reserve(n);
  for (int i = 0; i < n; ++i) {
    d.push_back(step_truth(s, a, m, rng) - det);
    mean += d.back();
  }
  mean /= n;
  for (const StateVec& v : d) acc += (v - mean) * (v - mean).transpose();
  acc /= (n - 1);
  CHECK((acc - Cu).norm() / Cu.norm() < 0.10);
}

TEST_CASE("generate_trajectory") {
  const ProcessModel m = unit_model();

  SUBCASE("straight segment") {
    const std::vector<Vec2> wp{{0, 0}, {10, 0}};
    const auto t = generate_trajectory(wp, 1.0, m, 3);
    REQUIRE(t.size() == 3);
    CHECK(position_of(t[0]).isApprox(Vec2(0, 0)));
    CHECK(position_of(t[1]).isApprox(Vec2(1, 0)));
    CHECK(position_of(t[2]).isApprox(Vec2(2, 0)));
    CHECK(velocity_of(t[1]).isApprox(Vec2(1, 0)));
  }
  SUBCASE("closed rectangle returns to the start") {
    const std::vector<Vec2> wp{{1, 1}, {9, 1}, {9, 7}, {1, 7}};
    const auto t = generate_trajectory(wp, 1.0, m, 29);  // lap length 28
    CHECK((position_of(t.back()) - Vec2(1, 1)).norm() < 1e-9);
    // Velocities agree with consecutive positions away from corners.
    for (std::size_t k = 0; k + 1 < t.size(); ++k) {
      const Vec2 step = position_of(t[k + 1]) - position_of(t[k]);
      if (std::abs(step.norm() - 1.0) < 1e-9) CHECK((step - velocity_of(t[k])).norm() < 1e-9);
    }
  }
  SUBCASE("single QI") {
    const std::vector<Vec2> wp{{3, 4}, {5, 4}};
    const auto t = generate_trajectory(wp, 2.0, m, 1);
    REQUIRE(t.size() == 1);
    CHECK(position_of(t[0]).isApprox(Vec2(3, 4)));
  }
  SUBCASE("errors") {
    const std::vector<Vec2> dup{{1, 1}, {1, 1}, {3, 3}};
    CHECK_THROWS_AS(generate_trajectory(dup, 1.0, m, 5), ConfigError);
    const std::vector<Vec2> one{{1, 1}};
    CHECK_THROWS_AS(generate_trajectory(one, 1.0, m, 5), ConfigError);
    const std::vector<Vec2> ok{{1, 1}, {2, 2}};
    CHECK_THROWS_AS(generate_trajectory(ok, 0.0, m, 5), ConfigError);
  }
}

TEST_CASE("los_blocked examples") {
  Room room{20, 20, 3, {}};
  CHECK_FALSE(los_blocked({0, 0}, {10, 0}, room));

  room.obstacles = {{4, -1, 6, 1}};
  CHECK(los_blocked({0, 0}, {10, 0}, room));

  const Rect below{4, 0, 6, 1};
  room.obstacles = {below};
  const bool expected = sampled_hit({0, 5}, {10, 5}, below);
  CHECK_FALSE(expected);
  CHECK(los_blocked({0, 5}, {10, 5}, room) == expected);
}

TEST_CASE("los_blocked boundary contact is not a block") {
  const Room room{20, 20, 3, {{4, 0, 6, 1}}};
  CHECK_FALSE(los_blocked({0, 1}, {10, 1}, room));     // along the top edge
  CHECK_FALSE(los_blocked({4, 1}, {0, 5}, room));      // endpoint on the corner
  CHECK_FALSE(los_blocked({3, 0}, {5, 2}, room));      // grazes the corner
  CHECK(los_blocked({5, 0.5}, {10, 10}, room));        // starts inside
}

TEST_CASE("los_blocked agrees with the sampling oracle and is symmetric") {
  Rng rng(7);
  for (int trial = 0; trial < 400; ++trial) {
    const Rect r{rng.uniform(1, 4), rng.uniform(1, 4), rng.uniform(5, 8), rng.uniform(5, 8)};
    const Room room{10, 10, 3, {r}};
    const Vec2 a(rng.uniform(0, 10), rng.uniform(0, 10));
    const Vec2 b(rng.uniform(0, 10), rng.uniform(0, 10));
    const bool got = los_blocked(a, b, room);
    CHECK(got == los_blocked(b, a, room));
    CHECK(got == sampled_hit(a, b, r, 20000));
  }
}

TEST_CASE("room validation") {
  CHECK_THROWS_AS((Room{0, 1, 1, {}}).validate(), ConfigError);
  CHECK_THROWS_AS((Room{5, 5, 3, {{4, 4, 6, 6}}}).validate(), ConfigError);
  CHECK_NOTHROW((Room{11, 8.5, 3.3, {{1, 1, 2, 2}}}).validate());
  CHECK((Room{3, 4, 12, {}}).diagonal() == doctest::Approx(13.0));
}
