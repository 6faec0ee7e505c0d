#pragma once

#include <optional>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "voi_twin/sensing.hpp"
#include "voi_twin/types.hpp"
#include "voi_twin/world.hpp"

namespace voi_twin {

struct Belief {
  StateVec mean = StateVec::Zero();
  Mat4 cov = Mat4::Identity();
  int qi = 0;
};

struct QualityTargets {
  static constexpr double kUnconstrained = 1e6;

  Eigen::Vector4d xi = Eigen::Vector4d::Constant(kUnconstrained);

  // Positional requirement split evenly across x and y: xi_x = xi_y = threshold / sqrt(2).
  static QualityTargets position_threshold(double threshold);
  static QualityTargets unconstrained() { return {}; }

  Eigen::Vector4d xi_squared() const { return xi.cwiseProduct(xi); }
  void validate() const;
};

struct StackedObservation {
  Eigen::MatrixXd H;       // r x 4
  Eigen::MatrixXd Cw;      // r x r
  Eigen::VectorXd o;       // measurements
  Eigen::VectorXd mu_w;    // noise means
  // h(s_pr) - H s_pr. Zero for linear observations; for ranges it carries the
  // first-order expansion o ~ h(s_pr) + H (s - s_pr).
  Eigen::VectorXd offset;

  Eigen::Index rows() const { return H.rows(); }
};

enum class JacobianMode {
  kPredictedRange,  // divide by the range predicted from the prior mean
  kMeasuredRange,   // divide by the measured range
};

struct RangeRow {
  Eigen::Vector4d row = Eigen::Vector4d::Zero();
  double predicted_range = 0.0;
};

struct RowInput {
  Eigen::Vector4d row = Eigen::Vector4d::Zero();
  double predicted_range = 0.0;
  double measurement = 0.0;
  double noise_var = 0.0;
  double noise_mean = 0.0;
};

inline constexpr double kMinRange = 1e-6;

// Prior: cov = F P F^T + Cu (+ G C_imu G^T), mean = F s + G a + mu_u.
Belief predict(const Belief& b, const ProcessModel& model, const std::optional<Vec2>& a_global = std::nullopt,
               const std::optional<Mat2>& imu_cov = std::nullopt);

RangeRow range_jacobian(const StateVec& prior_mean, const SensingAgent& anchor, double z_tag,
                        JacobianMode mode = JacobianMode::kPredictedRange,
                        std::optional<double> measured_range = std::nullopt);

// Rows kept in input order. `prior_mean` fills the linearization offset; pass
// nothing to treat rows as a linear model.
StackedObservation stack(const std::vector<RowInput>& rows,
                         const std::optional<StateVec>& prior_mean = std::nullopt);

Eigen::MatrixXd kalman_gain(const Mat4& prior_cov, const Eigen::MatrixXd& H, const Eigen::MatrixXd& Cw);

// mean = s + K (o - mu_w - H s); cov = (I - K H) P, symmetrized.
Belief posterior_update(const Belief& prior, const Eigen::MatrixXd& K, const Eigen::MatrixXd& H,
                        const Eigen::MatrixXd& Cw, const Eigen::VectorXd& o, const Eigen::VectorXd& mu_w);

Belief posterior_update(const Belief& prior, const Eigen::MatrixXd& K, const StackedObservation& obs);

// Covariance-only update, for planning before any observation arrives.
Mat4 predicted_posterior_cov(const Mat4& prior_cov, const Eigen::MatrixXd& H, const Eigen::MatrixXd& Cw);

struct TargetCheck {
  bool ok = true;
  std::set<int> violating;  // 1-based feature indices
};

// [cov]_kk <= xi_k^2 for every k.
TargetCheck meets_targets(const Mat4& cov, const QualityTargets& targets);

}  // namespace voi_twin
