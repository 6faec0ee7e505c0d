#pragma once

#include <Eigen/Core>

namespace voi_twin {

// State ordering is [x, vx, y, vy].
inline constexpr int kStateDim = 4;
inline constexpr int kIdxX = 0;
inline constexpr int kIdxVx = 1;
inline constexpr int kIdxY = 2;
inline constexpr int kIdxVy = 3;

using StateVec = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Mat42 = Eigen::Matrix<double, 4, 2>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vec3 = Eigen::Vector3d;

inline Vec2 position_of(const StateVec& s) { return {s(kIdxX), s(kIdxY)}; }
inline Vec2 velocity_of(const StateVec& s) { return {s(kIdxVx), s(kIdxVy)}; }

}  // namespace voi_twin
