#include "doctest.h"

#include <cmath>
#include <sstream>
#include <vector>

#include "voi_twin/errors.hpp"
#include "voi_twin/harness.hpp"

using namespace voi_twin;

namespace {

ScenarioConfig short_run(int n_qis = 60) {
  ScenarioConfig cfg = default_scenario();
  cfg.n_qis = n_qis;
  return cfg;
}

QiMetrics with_error(double e) {
  QiMetrics m;
  m.position_error = e;
  return m;
}

}  // namespace

TEST_CASE("mse and rmse") {
  const std::vector<QiMetrics> m{with_error(3), with_error(4)};
  CHECK(compute_mse(m) == doctest::Approx(12.5));
  CHECK(compute_rmse(m) == doctest::Approx(3.5355339));
  CHECK_THROWS_AS(compute_mse(std::vector<QiMetrics>{}), ContractError);
}

TEST_CASE("nees") {
  Belief b;
  b.mean = StateVec::Zero();
  b.cov = Mat4::Identity() * 4.0;
  StateVec truth;
  truth << 2, 0, 0, 0;
  CHECK(compute_nees(truth, b) == doctest::Approx(1.0));
  truth << 2, 2, 2, 2;
  CHECK(compute_nees(truth, b) == doctest::Approx(4.0));

  b.cov = Mat4::Zero();
  b.cov(0, 0) = 1.0;
  truth << 0, 1e-6, 0, 0;
  CHECK(compute_nees(truth, b) == doctest::Approx(1e-12 / 1e-12));
  b.cov(1, 1) = std::nan("");
  CHECK_THROWS_AS(compute_nees(truth, b), NumericalError);
}

TEST_CASE("empirical cdf") {
  const auto cdf = empirical_cdf({0.3, 0.1, 0.2, 0.2});
  REQUIRE(cdf.size() == 3);
  CHECK(cdf[0].value == 0.1);
  CHECK(cdf[0].fraction == 0.25);
  CHECK(cdf[1].fraction == 0.75);
  CHECK(cdf[2].fraction == 1.0);
  CHECK(cdf_at(cdf, 0.05) == 0.0);
  CHECK(cdf_at(cdf, 0.2) == 0.75);
  CHECK(cdf_at(cdf, 10.0) == 1.0);
  CHECK_THROWS_AS(empirical_cdf({}), ContractError);
}

TEST_CASE("noise-free episode with loose targets schedules nothing") {
  ScenarioConfig cfg = short_run(40);
  for (auto& a : cfg.anchors) a.noise_var = 0.0;
  cfg.accel_noise_std = 0.0;
  cfg.imu_noise_std = 0.0;
  cfg.init_pos_std = 1e-6;
  cfg.init_vel_std = 1e-6;
  cfg.targets = QualityTargets::position_threshold(10.0);
  const EpisodeResult r = run_episode(cfg);
  REQUIRE(r.metrics.size() == 40);
  for (const QiMetrics& m : r.metrics) {
    CHECK(m.n_selected == 0);
    CHECK(m.position_error < 1e-3);
  }
  CHECK(r.uwb_log.empty());
}

TEST_CASE("greedy with the full budget takes every anchor") {
  ScenarioConfig cfg = short_run(30);
  cfg.scheduler = SchedulerKind::kGreedy;
  cfg.targets = QualityTargets::position_threshold(1e-4);
  const EpisodeResult r = run_episode(cfg);
  for (const QiMetrics& m : r.metrics) CHECK(m.n_selected == 6);
  CHECK(r.uwb_log.size() == 180);
  CHECK(mean_latency(r.metrics) == doctest::Approx(0.002 + 6 * 0.001 + 0.005 + 0.001));
}

TEST_CASE("episodes are reproducible from the seed") {
  ScenarioConfig cfg = short_run(50);
  const EpisodeResult a = run_episode(cfg);
  const EpisodeResult b = run_episode(cfg);
  std::ostringstream sa, sb;
  write_metrics_csv(sa, a.metrics);
  write_metrics_csv(sb, b.metrics);
  CHECK(sa.str() == sb.str());

  cfg.seed = 1;
  std::ostringstream sc;
  write_metrics_csv(sc, run_episode(cfg).metrics);
  CHECK(sa.str() != sc.str());
}

TEST_CASE("episode invariants") {
  for (int budget : {1, 2, 4}) {
    ScenarioConfig cfg = short_run(80);
    cfg.budget = budget;
    cfg.targets = QualityTargets::position_threshold(0.1);
    const EpisodeResult r = run_episode(cfg);
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
      CHECK(r.metrics[i].n_selected <= budget);
      CHECK(r.beliefs[i].qi == static_cast<int>(i) + 1);
      CHECK(r.beliefs[i].cov.allFinite());
      const Schedule& s = r.schedules[i];
      // If the plan meets the targets, so does the update that follows it.
      if (meets_targets(s.predicted_cov, cfg.targets).ok) {
        CHECK(meets_targets(r.beliefs[i].cov, cfg.targets).ok);
      }
    }
  }
}

TEST_CASE("tighter thresholds buy more anchors") {
  double prev = -1.0;
  for (double t : {0.5, 0.2, 0.1, 0.05}) {
    ScenarioConfig cfg = short_run(100);
    cfg.targets = QualityTargets::position_threshold(t);
    const double sel = mean_selected(run_episode(cfg).metrics);
    CHECK(sel >= prev);
    prev = sel;
  }
}

TEST_CASE("schedulers see the same world for a given seed") {
  ScenarioConfig voi = short_run(40);
  ScenarioConfig greedy = voi;
  greedy.scheduler = SchedulerKind::kGreedy;
  const EpisodeResult a = run_episode(voi);
  const EpisodeResult b = run_episode(greedy);
  for (std::size_t i = 0; i < a.metrics.size(); ++i) CHECK(a.metrics[i].truth == b.metrics[i].truth);
  CHECK(a.beliefs.size() == b.beliefs.size());
}

TEST_CASE("gnn scheduler requires a model") {
  ScenarioConfig cfg = short_run(5);
  cfg.scheduler = SchedulerKind::kGnn;
  CHECK_THROWS_AS(run_episode(cfg), ConfigError);
  const gnn::GnnModel zero = gnn::GnnModel::zeros();
  const EpisodeResult r = run_episode(cfg, &zero);
  // An untrained network parks every estimate at the room centre.
  CHECK(r.metrics.front().estimate(kIdxX) == doctest::Approx(5.5));
  CHECK(r.metrics.front().estimate(kIdxY) == doctest::Approx(4.25));
}

TEST_CASE("replay reproduces the simulated beliefs through the CSV logs") {
  ScenarioConfig cfg = short_run(60);
  cfg.targets = QualityTargets::position_threshold(0.15);
  const EpisodeResult sim = run_episode(cfg);

  std::stringstream uwb, imu;
  write_uwb_csv(uwb, sim.uwb_log);
  write_imu_csv(imu, sim.imu_log);
  const auto ranges = read_uwb_csv(uwb);
  const auto imus = read_imu_csv(imu);
  REQUIRE(ranges.size() == sim.uwb_log.size());

  const EpisodeResult rep = replay(cfg, ranges, imus);
  std::ostringstream a, b;
  write_belief_csv(a, sim.beliefs);
  write_belief_csv(b, rep.beliefs);
  CHECK(a.str() == b.str());
}

TEST_CASE("dataset generation") {
  ScenarioConfig cfg = default_scenario();
  const auto d = generate_gnn_dataset(cfg, 50);
  REQUIRE(d.size() == 50);
  for (const auto& s : d) {
    CHECK(s.anchors.size() == 6);
    CHECK(cfg.room.contains(s.label));
  }
  const auto again = generate_gnn_dataset(cfg, 50);
  CHECK(again[17].anchors[3].range == d[17].anchors[3].range);

  for (auto& a : cfg.anchors) a.noise_var = 0.0;
  const auto clean = generate_gnn_dataset(cfg, 5);
  for (const auto& s : clean) {
    const SensingAgent& a = cfg.anchors.front();
    const double expect = true_range(Vec3(s.label.x(), s.label.y(), cfg.z_tag), a);
    CHECK(s.anchors.front().range == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK_THROWS_AS(generate_gnn_dataset(cfg, 0), ConfigError);
}

TEST_CASE("CSV readers reject malformed rows") {
  std::istringstream uwb("qi,anchor_id,range\n1,2\n");
  CHECK_THROWS_AS(read_uwb_csv(uwb), IoError);
  std::istringstream imu("qi,ax_local,ay_local,yaw\n1,x,0,0\n");
  CHECK_THROWS_AS(read_imu_csv(imu), IoError);
}
