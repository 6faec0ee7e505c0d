#include "voi_twin/estimator.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "voi_twin/errors.hpp"
#include "voi_twin/linalg.hpp"

namespace voi_twin {

QualityTargets QualityTargets::position_threshold(double threshold) {
  QualityTargets t;
  const double per_axis = threshold / std::sqrt(2.0);
  t.xi(kIdxX) = per_axis;
  t.xi(kIdxY) = per_axis;
  return t;
}

void QualityTargets::validate() const {
  for (int k = 0; k < kStateDim; ++k) {
    if (!(xi(k) > 0.0)) throw ConfigError("quality target xi_" + std::to_string(k + 1) + " must be positive");
  }
}

Belief predict(const Belief& b, const ProcessModel& model, const std::optional<Vec2>& a_global,
               const std::optional<Mat2>& imu_cov) {
  Belief out;
  out.qi = b.qi + 1;
  const Vec2 a = a_global.value_or(Vec2::Zero());
  out.mean = model.F * b.mean + model.G * a + model.mu_u;
  Mat4 q = model.Cu;
  if (imu_cov) q += model.G * (*imu_cov) * model.G.transpose();
  out.cov = model.F * b.cov * model.F.transpose() + q;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

RangeRow range_jacobian(const StateVec& prior_mean, const SensingAgent& anchor, double z_tag, JacobianMode mode,
                        std::optional<double> measured_range) {
  const Vec3 tag(prior_mean(kIdxX), prior_mean(kIdxY), z_tag);
  RangeRow out;
  out.predicted_range = (tag - anchor.position).norm();
  if (out.predicted_range <= kMinRange) {
    throw DegenerateGeometryError("range Jacobian undefined: estimate coincides with anchor " +
                                  std::to_string(anchor.id));
  }
  double denom = out.predicted_range;
  if (mode == JacobianMode::kMeasuredRange) {
    if (!measured_range) throw ContractError("measured-range Jacobian needs a measurement");
    if (*measured_range <= kMinRange) {
      throw DegenerateGeometryError("measured range too small for anchor " + std::to_string(anchor.id));
    }
    denom = *measured_range;
  }
  out.row << (tag.x() - anchor.position.x()) / denom, 0.0, (tag.y() - anchor.position.y()) / denom, 0.0;
  return out;
}

StackedObservation stack(const std::vector<RowInput>& rows, const std::optional<StateVec>& prior_mean) {
  if (rows.empty()) throw EmptyScheduleError("stack: empty schedule");
  const auto r = static_cast<Eigen::Index>(rows.size());
  StackedObservation out;
  out.H.resize(r, kStateDim);
  out.Cw = Eigen::MatrixXd::Zero(r, r);
  out.o.resize(r);
  out.mu_w.resize(r);
  out.offset = Eigen::VectorXd::Zero(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const RowInput& in = rows[static_cast<std::size_t>(i)];
    out.H.row(i) = in.row.transpose();
    out.Cw(i, i) = in.noise_var;
    out.o(i) = in.measurement;
    out.mu_w(i) = in.noise_mean;
    if (prior_mean) out.offset(i) = in.predicted_range - in.row.dot(*prior_mean);
  }
  return out;
}

Eigen::MatrixXd kalman_gain(const Mat4& prior_cov, const Eigen::MatrixXd& H, const Eigen::MatrixXd& Cw) {
  if (H.cols() != kStateDim || Cw.rows() != H.rows() || Cw.cols() != H.rows()) {
    throw ContractError("kalman_gain: shape mismatch");
  }
  const Eigen::MatrixXd HP = H * prior_cov;
  Eigen::MatrixXd S = Cw + HP * H.transpose();
  S = 0.5 * (S + S.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success || !S.allFinite()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    std::ostringstream msg;
    msg << "innovation covariance is singular (eigenvalues in [" << lo << ", " << hi << "], condition "
        << (lo > 0 ? hi / lo : INFINITY) << ")";
    throw NumericalError(msg.str());
  }
  // K = P H^T S^-1  <=>  K^T = S^-1 (H P).
  return llt.solve(HP).transpose();
}

Belief posterior_update(const Belief& prior, const Eigen::MatrixXd& K, const Eigen::MatrixXd& H,
                        const Eigen::MatrixXd& Cw, const Eigen::VectorXd& o, const Eigen::VectorXd& mu_w) {
  const Eigen::Index r = H.rows();
  if (H.cols() != kStateDim || K.rows() != kStateDim || K.cols() != r || Cw.rows() != r || Cw.cols() != r ||
      o.size() != r || mu_w.size() != r) {
    throw ContractError("posterior_update: shape mismatch");
  }
  Belief out;
  out.qi = prior.qi;
  out.mean = prior.mean + K * (o - mu_w - H * prior.mean);
  const Mat4 cov = (Mat4::Identity() - K * H) * prior.cov;
  out.cov = symmetrize_psd(cov);
  return out;
}

Belief posterior_update(const Belief& prior, const Eigen::MatrixXd& K, const StackedObservation& obs) {
  return posterior_update(prior, K, obs.H, obs.Cw, obs.o - obs.offset, obs.mu_w);
}

Mat4 predicted_posterior_cov(const Mat4& prior_cov, const Eigen::MatrixXd& H, const Eigen::MatrixXd& Cw) {
  if (H.rows() == 0) return prior_cov;
  const Eigen::MatrixXd K = kalman_gain(prior_cov, H, Cw);
  return symmetrize_psd((Mat4::Identity() - K * H) * prior_cov);
}

TargetCheck meets_targets(const Mat4& cov, const QualityTargets& targets) {
  TargetCheck out;
  const Eigen::Vector4d bound = targets.xi_squared();
  for (int k = 0; k < kStateDim; ++k) {
    if (!(cov(k, k) <= bound(k))) {
      out.ok = false;
      out.violating.insert(k + 1);
    }
  }
  return out;
}

}  // namespace voi_twin
