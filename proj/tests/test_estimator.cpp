#include "doctest.h"

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "voi_twin/errors.hpp"
#include "voi_twin/estimator.hpp"
#include "voi_twin/linalg.hpp"

using namespace voi_twin;

namespace {

Mat4 random_spd(Rng& rng, double scale = 1.0) {
  Eigen::Matrix4d A;
  for (int i = 0; i < 16; ++i) A(i / 4, i % 4) = rng.normal();
  return scale * (A * A.transpose() + 0.1 * Mat4::Identity());
}

SensingAgent anchor(int id, Vec3 p, double var = 0.01) { return {id, p, 0.0, var, true}; }

}  // namespace

TEST_CASE("predict examples") {
  const ProcessModel unit = ProcessModel::constant_velocity(1.0, Mat4::Identity());

  Belief zero;
  zero.cov = Mat4::Zero();
  CHECK(predict(zero, unit).cov.isApprox(Mat4::Identity()));

  Belief moving;
  moving.mean = StateVec(0, 1, 0, 0);
  moving.cov = Mat4::Zero();
  CHECK(predict(moving, ProcessModel::constant_velocity(1.0)).mean.isApprox(StateVec(1, 1, 0, 0)));

  ProcessModel identity = unit;
  identity.F = Mat4::Identity();
  Belief b;
  b.cov = Mat4::Identity();
  CHECK(predict(b, identity).cov.isApprox(2.0 * Mat4::Identity()));
  CHECK(predict(b, identity).qi == 1);
}

TEST_CASE("predict with IMU input and mean process drift") {
  ProcessModel m = ProcessModel::constant_velocity(0.5);
  m.mu_u = StateVec(0.1, 0, 0, 0);
  Belief b;
  b.cov = Mat4::Zero();
  const Mat2 imu = 0.04 * Mat2::Identity();
  const Belief p = predict(b, m, Vec2(2.0, 0.0), imu);
  CHECK(p.mean.isApprox(StateVec(0.25 + 0.1, 1.0, 0, 0)));
  CHECK(p.cov.isApprox(m.G * imu * m.G.transpose()));
}

TEST_CASE("range_jacobian") {
  const RangeRow r = range_jacobian(StateVec(3, 0, 4, 0), anchor(1, {0, 0, 0}), 0.0);
  CHECK(r.predicted_range == doctest::Approx(5.0));
  CHECK(r.row.isApprox(Eigen::Vector4d(0.6, 0, 0.8, 0)));

  const RangeRow east = range_jacobian(StateVec(1, 0, 0, 0), anchor(1, {0, 0, 0}), 0.0);
  CHECK(east.row.isApprox(Eigen::Vector4d(1, 0, 0, 0)));

  CHECK_THROWS_AS(range_jacobian(StateVec(2, 0, 2, 0), anchor(1, {2, 2, 0.3}), 0.3), DegenerateGeometryError);

  // Literal form divides by the measured range instead.
  const RangeRow lit = range_jacobian(StateVec(3, 0, 4, 0), anchor(1, {0, 0, 0}), 0.0, JacobianMode::kMeasuredRange, 10.0);
  CHECK(lit.row.isApprox(Eigen::Vector4d(0.3, 0, 0.4, 0)));
  CHECK_THROWS_AS(range_jacobian(StateVec(3, 0, 4, 0), anchor(1, {0, 0, 0}), 0.0, JacobianMode::kMeasuredRange),
                  ContractError);
}

TEST_CASE("stack") {
  const RowInput a{{1, 0, 0, 0}, 1.0, 1.1, 0.1, 0.0};
  const RowInput b{{0, 0, 1, 0}, 2.0, 2.2, 0.2, 0.01};
  const RowInput c{{0.6, 0, 0.8, 0}, 3.0, 3.3, 0.3, 0.02};

  const StackedObservation one = stack({a});
  CHECK(one.H.rows() == 1);
  CHECK(one.H.cols() == 4);
  CHECK(one.Cw.rows() == 1);

  const StackedObservation abc = stack({a, b, c});
  CHECK(abc.Cw.isApprox(Eigen::Vector3d(0.1, 0.2, 0.3).asDiagonal().toDenseMatrix()));

  const StackedObservation cab = stack({c, a, b});
  CHECK(cab.H.row(0) == abc.H.row(2));
  CHECK(cab.o(1) == abc.o(0));
  CHECK(cab.Cw(2, 2) == abc.Cw(1, 1));
  CHECK(cab.mu_w(0) == abc.mu_w(2));

  CHECK_THROWS_AS(stack({}), EmptyScheduleError);
}

TEST_CASE("kalman_gain examples") {
  Eigen::MatrixXd H(1, 4);
  H << 1, 0, 0, 0;
  const Eigen::MatrixXd K = kalman_gain(Mat4::Identity(), H, Eigen::MatrixXd::Identity(1, 1));
  CHECK(K.isApprox(Eigen::Vector4d(0.5, 0, 0, 0)));

  const Eigen::MatrixXd big = kalman_gain(Mat4::Identity(), H, 1e12 * Eigen::MatrixXd::Identity(1, 1));
  CHECK(big.norm() < 1e-6);

  const Eigen::MatrixXd K4 = kalman_gain(Mat4::Identity(), Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Identity(4, 4));
  CHECK(K4.isApprox(0.5 * Eigen::MatrixXd::Identity(4, 4)));

  CHECK_THROWS_AS(kalman_gain(Mat4::Zero(), H, Eigen::MatrixXd::Zero(1, 1)), NumericalError);
  CHECK_THROWS_AS(kalman_gain(Mat4::Identity(), H, Eigen::MatrixXd::Identity(2, 2)), ContractError);
}

TEST_CASE("posterior_update examples") {
  Eigen::MatrixXd H(1, 4);
  H << 1, 0, 0, 0;
  const Eigen::MatrixXd Cw = Eigen::MatrixXd::Identity(1, 1);
  Belief prior;
  prior.mean = StateVec(1, 2, 3, 4);
  prior.cov = Mat4::Identity();
  const Eigen::MatrixXd K = kalman_gain(prior.cov, H, Cw);

  Eigen::VectorXd mu(1);
  mu << 0.05;
  Eigen::VectorXd o = H * prior.mean + mu;
  const Belief same = posterior_update(prior, K, H, Cw, o, mu);
  CHECK(same.mean.isApprox(prior.mean));
  CHECK(same.cov(0, 0) == doctest::Approx(0.5));
  CHECK(same.cov(1, 1) == doctest::Approx(1.0));

  CHECK_THROWS_AS(posterior_update(prior, K, H, Cw, Eigen::VectorXd::Zero(2), mu), ContractError);
}

TEST_CASE("two-anchor update equals the information-form batch solution") {
  Rng rng(42);
  Belief prior;
  prior.mean = StateVec(4.0, 0.3, 3.0, -0.2);
  prior.cov = random_spd(rng, 0.05);
  const SensingAgent a1 = anchor(1, {0.5, 0.5, 2.5}, 0.01);
  const SensingAgent a2 = anchor(2, {10.5, 8.0, 2.5}, 0.04);

  std::vector<RowInput> rows;
  for (const SensingAgent& a : {a1, a2}) {
    const RangeRow rr = range_jacobian(prior.mean, a, 0.3);
    rows.push_back({rr.row, rr.predicted_range, rr.predicted_range + rng.normal(0, 0.1), a.noise_var, 0.0});
  }
  const StackedObservation obs = stack(rows);  // linear model: no offset
  const Belief post = posterior_update(prior, kalman_gain(prior.cov, obs.H, obs.Cw), obs);
  const oracle::InfoPosterior ref = oracle::info_update(prior.mean, prior.cov, obs.H, obs.Cw, obs.o - obs.mu_w);
  CHECK((post.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((post.cov - ref.cov).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("linearization offset turns the update into o - h(s)") {
  Belief prior;
  prior.mean = StateVec(3, 0, 4, 0);
  prior.cov = Mat4::Identity();
  const SensingAgent a = anchor(1, {0, 0, 0}, 1.0);
  const RangeRow rr = range_jacobian(prior.mean, a, 0.0);
  const StackedObservation obs = stack({{rr.row, rr.predicted_range, 5.0, 1.0, 0.0}}, prior.mean);
  const Belief post = posterior_update(prior, kalman_gain(prior.cov, obs.H, obs.Cw), obs);
  CHECK((post.mean - prior.mean).norm() < 1e-12);  // measured == predicted range
}

TEST_CASE("covariance properties over random instances") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const Mat4 P = random_spd(rng, rng.uniform(0.01, 2.0));
    const int r = 1 + static_cast<int>(rng.uniform(0, 4));
    Eigen::MatrixXd H(r, 4);
    for (int i = 0; i < r; ++i) {
      const double th = rng.uniform(0, 6.28);
      H.row(i) << std::cos(th), 0, std::sin(th), 0;
    }
    Eigen::MatrixXd Cw = Eigen::MatrixXd::Zero(r, r);
    for (int i = 0; i < r; ++i) Cw(i, i) = rng.uniform(0.001, 0.5);

    const Eigen::MatrixXd K = kalman_gain(P, H, Cw);
    Belief prior;
    prior.cov = P;
    const Belief post = posterior_update(prior, K, H, Cw, Eigen::VectorXd::Zero(r), Eigen::VectorXd::Zero(r));
    for (int k = 0; k < 4; ++k) CHECK(post.cov(k, k) <= P(k, k) + 1e-9);
    CHECK(is_psd(post.cov));

    const Mat4 IKH = Mat4::Identity() - K * H;
    const Mat4 joseph = IKH * P * IKH.transpose() + K * Cw * K.transpose();
    CHECK((post.cov - joseph).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("meets_targets") {
  const Mat4 c = Eigen::Vector4d(0.04, 0.01, 0.04, 0.01).asDiagonal();
  QualityTargets t;
  t.xi = Eigen::Vector4d::Constant(0.2);  // xi^2 = 0.04, inclusive boundary
  CHECK(meets_targets(c, t).ok);

  Mat4 worse = c;
  worse(0, 0) = 0.05;
  const TargetCheck chk = meets_targets(worse, t);
  CHECK_FALSE(chk.ok);
  CHECK(chk.violating == std::set<int>{1});

  CHECK(meets_targets(1e3 * Mat4::Identity(), QualityTargets::unconstrained()).ok);
}

TEST_CASE("position_threshold splits evenly across axes") {
  const QualityTargets t = QualityTargets::position_threshold(0.2);
  CHECK(t.xi(0) * t.xi(0) + t.xi(2) * t.xi(2) == doctest::Approx(0.04));
  CHECK(t.xi(1) == QualityTargets::kUnconstrained);
  QualityTargets bad;
  bad.xi(2) = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
