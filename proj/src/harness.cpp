#include "voi_twin/harness.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include <Eigen/Eigenvalues>

#include "voi_twin/csv.hpp"
#include "voi_twin/errors.hpp"
#include "voi_twin/linalg.hpp"

namespace voi_twin {

namespace {

constexpr double kNeesEigenFloor = 1e-12;
constexpr double kStillSpeed = 1e-6;

// Yaw is measured clockwise from +x so that rotate_imu maps the body frame
// into the global frame.
double yaw_from_velocity(const Vec2& v, double previous) {
  if (v.norm() < kStillSpeed) return previous;
  return -std::atan2(v.y(), v.x());
}

Mat2 rotation(double yaw) {
  Mat2 r;
  r << std::cos(yaw), std::sin(yaw), -std::sin(yaw), std::cos(yaw);
  return r;
}

Vec2 tracking_command(const ScenarioConfig& cfg, const StateVec& s, const StateVec& ref) {
  Vec2 a = cfg.tracking_kp * (position_of(ref) - position_of(s)) + cfg.tracking_kv * (velocity_of(ref) - velocity_of(s));
  const double n = a.norm();
  if (n > cfg.max_accel) a *= cfg.max_accel / n;
  return a;
}

Belief initial_belief(const ScenarioConfig& cfg, const StateVec& truth0) {
  Belief b;
  b.qi = 0;
  b.cov = Mat4::Zero();
  b.cov.diagonal() << cfg.init_pos_std * cfg.init_pos_std, cfg.init_vel_std * cfg.init_vel_std,
      cfg.init_pos_std * cfg.init_pos_std, cfg.init_vel_std * cfg.init_vel_std;
  Rng rng(derive_seed(cfg.seed, "initial-belief"));
  b.mean = sample_gaussian(truth0, b.cov, rng);
  return b;
}

struct ImuInput {
  Vec2 accel_local;
  double yaw;
};

// Where the episode loop gets its data from: the simulated world or a log.
struct Sources {
  // IMU reading for QI n, if any.
  std::function<std::optional<ImuInput>(int qi)> imu;
  // Range from agent at QI n; nullopt when nothing was received.
  std::function<std::optional<RangeObservation>(const SensingAgent&, int qi)> uwb;
  // Advances ground truth to QI n; empty in replay.
  std::function<void(int qi)> advance;
  std::function<StateVec()> truth;
  bool has_truth = false;
};

std::vector<SensingAgent> available_agents(const ScenarioConfig& cfg, const Vec2& est, SchedulerOptions& opts) {
  std::vector<SensingAgent> out;
  opts.variance_scale.clear();
  if (cfg.nlos_mode == NlosMode::kExclude) {
    for (int id : compute_available_set(est, cfg.anchors, cfg.room, cfg.max_range, cfg.z_tag)) {
      out.push_back(find_agent(cfg.anchors, id));
    }
    return out;
  }
  const Room open_room{cfg.room.width, cfg.room.depth, cfg.room.height, {}};
  for (int id : compute_available_set(est, cfg.anchors, open_room, cfg.max_range, cfg.z_tag)) {
    const SensingAgent& a = find_agent(cfg.anchors, id);
    if (los_blocked(est, a.position.head<2>(), cfg.room)) {
      opts.variance_scale[id] = cfg.nlos_std_multiplier * cfg.nlos_std_multiplier;
    }
    out.push_back(a);
  }
  return out;
}

EpisodeResult run_loop(const ScenarioConfig& cfg, Sources& src, const gnn::GnnModel* model) {
  cfg.validate();
  const ProcessModel pm = cfg.process_model();
  const std::vector<StateVec> ref = generate_trajectory(cfg.waypoints, cfg.speed, pm, 1);
  Belief belief = initial_belief(cfg, ref.front());

  EpisodeResult res;
  res.metrics.reserve(static_cast<std::size_t>(cfg.n_qis));
  std::vector<int> delayed_selection;
  bool have_delayed = false;

  for (int n = 1; n <= cfg.n_qis; ++n) {
    if (src.advance) src.advance(n);

    std::optional<Vec2> a_global;
    std::optional<Mat2> imu_cov;
    if (cfg.imu_enabled) {
      if (const std::optional<ImuInput> imu = src.imu(n)) {
        a_global = rotate_imu(imu->accel_local, imu->yaw);
        const Mat2 r = rotation(imu->yaw);
        imu_cov = r * cfg.imu_cov() * r.transpose();
        res.imu_log.push_back({n, imu->accel_local, imu->yaw});
      }
    }
    const Belief prior = predict(belief, pm, a_global, imu_cov);

    SchedulerOptions opts;
    opts.z_tag = cfg.z_tag;
    const std::vector<SensingAgent> avail = available_agents(cfg, position_of(prior.mean), opts);

    Schedule sched;
    try {
      sched = cfg.scheduler == SchedulerKind::kVoi ? schedule_voi(prior, avail, cfg.budget, cfg.targets, opts)
                                                   : schedule_greedy_all(prior, avail, cfg.budget, cfg.targets, opts);
    } catch (const TwinError& e) {
      throw NumericalError("QI " + std::to_string(n) + ": scheduling failed: " + e.what());
    }

    std::vector<int> selection = sched.selected;
    if (cfg.actuation_delay) {
      // Act on the previous QI's decision, restricted to what is available now.
      std::vector<int> prev;
      if (have_delayed) {
        for (int id : delayed_selection) {
          if (std::any_of(avail.begin(), avail.end(), [&](const SensingAgent& a) { return a.id == id; })) {
            prev.push_back(id);
          }
        }
      }
      delayed_selection = sched.selected;
      have_delayed = true;
      selection = prev;
      std::vector<SensingAgent> agents;
      for (int id : selection) agents.push_back(find_agent(cfg.anchors, id));
      sched.selected = selection;
      sched.predicted_cov = planned_cov(prior, agents, opts);
      sched.objective_value = voi_objective(sched.predicted_cov, cfg.targets);
    }

    std::vector<RowInput> rows;
    std::vector<std::pair<SensingAgent, RangeObservation>> received;
    for (int id : selection) {
      const SensingAgent& agent = find_agent(cfg.anchors, id);
      const std::optional<RangeObservation> obs = src.uwb(agent, n);
      if (!obs) continue;
      res.uwb_log.push_back(*obs);
      received.emplace_back(agent, *obs);
      try {
        const RangeRow rr = range_jacobian(prior.mean, agent, cfg.z_tag, cfg.jacobian, obs->range);
        rows.push_back({rr.row, rr.predicted_range, obs->range, agent.noise_var * opts.scale_for(id), agent.noise_mean});
      } catch (const TwinError& e) {
        throw NumericalError("QI " + std::to_string(n) + ": " + e.what());
      }
    }

    Belief posterior = prior;
    if (!rows.empty()) {
      try {
        const StackedObservation obs = stack(rows, prior.mean);
        const Eigen::MatrixXd K = kalman_gain(prior.cov, obs.H, obs.Cw);
        posterior = posterior_update(prior, K, obs);
      } catch (const TwinError& e) {
        throw NumericalError("QI " + std::to_string(n) + ": update failed: " + e.what());
      }
    }
    posterior.qi = n;
    belief = posterior;

    QiMetrics m;
    m.qi = n;
    m.estimate = posterior.mean;
    if (cfg.scheduler == SchedulerKind::kGnn && model != nullptr && !received.empty()) {
      const gnn::StarGraph g = gnn::build_star_graph(received, cfg.room);
      const Vec2 p = gnn::Normalizer::for_room(cfg.room).to_meters(gnn::forward(*model, g));
      m.estimate(kIdxX) = p.x();
      m.estimate(kIdxY) = p.y();
    }
    if (src.has_truth) {
      m.truth = src.truth();
      m.position_error = (position_of(m.truth) - position_of(m.estimate)).norm();
      m.nees = compute_nees(m.truth, posterior);
    }
    m.predicted_position_var = posterior.cov(kIdxX, kIdxX) + posterior.cov(kIdxY, kIdxY);
    m.selected = selection;
    m.n_selected = static_cast<int>(selection.size());
    m.objective = sched.objective_value;
    m.qi_latency = cfg.slots.sensing + m.n_selected * cfg.slots.uplink + cfg.slots.config + cfg.slots.downlink;

    sched.qi = n;
    res.metrics.push_back(std::move(m));
    res.beliefs.push_back(posterior);
    res.schedules.push_back(std::move(sched));
  }
  return res;
}

}  // namespace

EpisodeResult run_episode(const ScenarioConfig& cfg) { return run_episode(cfg, nullptr); }

EpisodeResult run_episode(const ScenarioConfig& cfg, const gnn::GnnModel* model) {
  cfg.validate();
  if (cfg.scheduler == SchedulerKind::kGnn && model == nullptr) {
    throw ConfigError("the gnn scheduler needs a trained model");
  }
  const ProcessModel pm = cfg.process_model();
  const std::vector<StateVec> ref = generate_trajectory(cfg.waypoints, cfg.speed, pm, cfg.n_qis + 1);
  StateVec truth = ref.front();
  Vec2 last_accel = Vec2::Zero();
  double yaw = yaw_from_velocity(velocity_of(truth), 0.0);

  Sources src;
  src.has_truth = true;
  src.truth = [&] { return truth; };
  src.advance = [&](int n) {
    last_accel = tracking_command(cfg, truth, ref[static_cast<std::size_t>(n)]);
    Rng rng(derive_seed(cfg.seed, "process", {static_cast<std::uint64_t>(n)}));
    truth = step_truth(truth, last_accel, pm, rng);
    yaw = yaw_from_velocity(velocity_of(truth), yaw);
  };
  src.imu = [&](int n) -> std::optional<ImuInput> {
    // Body-frame reading of the commanded acceleration, noise added in the body frame.
    const Vec2 a_local = rotate_imu(last_accel, -yaw);
    Rng rng(derive_seed(cfg.seed, "imu", {static_cast<std::uint64_t>(n)}));
    const ImuObservation obs = sample_imu(a_local, cfg.imu_cov(), rng, n);
    return ImuInput{obs.accel_local, yaw};
  };
  src.uwb = [&](const SensingAgent& agent, int n) -> std::optional<RangeObservation> {
    const Vec3 tag(truth(kIdxX), truth(kIdxY), cfg.z_tag);
    SensingAgent effective = agent;
    if (los_blocked(position_of(truth), agent.position.head<2>(), cfg.room)) {
      effective.noise_var *= cfg.nlos_std_multiplier * cfg.nlos_std_multiplier;
    }
    Rng rng(derive_seed(cfg.seed, "uwb", {static_cast<std::uint64_t>(agent.id), static_cast<std::uint64_t>(n)}));
    return sample_uwb(true_range(tag, agent), effective, rng, n);
  };
  return run_loop(cfg, src, model);
}

EpisodeResult replay(const ScenarioConfig& cfg, std::span<const RangeObservation> uwb, std::span<const ImuRecord> imu) {
  std::map<std::pair<int, int>, RangeObservation> ranges;
  for (const RangeObservation& o : uwb) ranges[{o.qi, o.anchor_id}] = o;
  std::map<int, ImuRecord> imus;
  for (const ImuRecord& r : imu) imus[r.qi] = r;

  ScenarioConfig c = cfg;
  if (c.scheduler == SchedulerKind::kGnn) c.scheduler = SchedulerKind::kGreedy;

  Sources src;
  src.imu = [&](int n) -> std::optional<ImuInput> {
    const auto it = imus.find(n);
    if (it == imus.end()) return std::nullopt;
    return ImuInput{it->second.accel_local, it->second.yaw};
  };
  src.uwb = [&](const SensingAgent& agent, int n) -> std::optional<RangeObservation> {
    const auto it = ranges.find({n, agent.id});
    if (it == ranges.end()) return std::nullopt;
    return it->second;
  };
  return run_loop(c, src, nullptr);
}

double compute_mse(std::span<const QiMetrics> metrics) {
  if (metrics.empty()) throw ContractError("compute_mse: no metrics");
  double total = 0.0;
  for (const QiMetrics& m : metrics) total += m.position_error * m.position_error;
  return total / static_cast<double>(metrics.size());
}

double compute_rmse(std::span<const QiMetrics> metrics) { return std::sqrt(compute_mse(metrics)); }

double predicted_rmse(std::span<const QiMetrics> metrics) {
  if (metrics.empty()) throw ContractError("predicted_rmse: no metrics");
  double total = 0.0;
  for (const QiMetrics& m : metrics) total += m.predicted_position_var;
  return std::sqrt(total / static_cast<double>(metrics.size()));
}

double mean_selected(std::span<const QiMetrics> metrics) {
  if (metrics.empty()) return 0.0;
  double total = 0.0;
  for (const QiMetrics& m : metrics) total += m.n_selected;
  return total / static_cast<double>(metrics.size());
}

double mean_latency(std::span<const QiMetrics> metrics) {
  if (metrics.empty()) return 0.0;
  double total = 0.0;
  for (const QiMetrics& m : metrics) total += m.qi_latency;
  return total / static_cast<double>(metrics.size());
}

double mean_nees(std::span<const QiMetrics> metrics) {
  if (metrics.empty()) return 0.0;
  double total = 0.0;
  for (const QiMetrics& m : metrics) total += m.nees;
  return total / static_cast<double>(metrics.size());
}

double compute_nees(const StateVec& truth, const Belief& belief) {
  if (!belief.cov.allFinite() || !belief.mean.allFinite()) throw NumericalError("NEES: non-finite belief");
  Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (belief.cov + belief.cov.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError("NEES: eigendecomposition failed");
  const Eigen::Vector4d lambda = es.eigenvalues().cwiseMax(kNeesEigenFloor);
  const Eigen::Vector4d e = es.eigenvectors().transpose() * (truth - belief.mean);
  return (e.array().square() / lambda.array()).sum();
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> errors) {
  if (errors.empty()) throw ContractError("empirical_cdf: no samples");
  std::sort(errors.begin(), errors.end());
  const double n = static_cast<double>(errors.size());
  std::vector<CdfPoint> out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i + 1 < errors.size() && errors[i + 1] == errors[i]) continue;
    out.push_back({errors[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

double cdf_at(std::span<const CdfPoint> cdf, double v) {
  double f = 0.0;
  for (const CdfPoint& p : cdf) {
    if (p.value > v) break;
    f = p.fraction;
  }
  return f;
}

std::vector<gnn::Sample> generate_gnn_dataset(const ScenarioConfig& cfg, int n_samples) {
  cfg.validate();
  if (n_samples < 1) throw ConfigError("dataset needs at least one sample");
  std::vector<StateVec> path;
  if (cfg.dataset_along_trajectory) {
    path = generate_trajectory(cfg.waypoints, cfg.speed, cfg.process_model(), n_samples);
  }

  std::vector<gnn::Sample> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    Rng pos_rng(derive_seed(cfg.seed, "dataset-position", {static_cast<std::uint64_t>(i)}));
    gnn::Sample s;
    s.sample_id = i;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Vec2 p = cfg.dataset_along_trajectory ? position_of(path[static_cast<std::size_t>(i)])
                                            : Vec2(pos_rng.uniform(0.0, cfg.room.width), pos_rng.uniform(0.0, cfg.room.depth));
      const bool inside_obstacle = std::any_of(cfg.room.obstacles.begin(), cfg.room.obstacles.end(), [&](const Rect& r) {
        return p.x() > r.xmin && p.x() < r.xmax && p.y() > r.ymin && p.y() < r.ymax;
      });
      if (inside_obstacle && !cfg.dataset_along_trajectory) continue;
      const std::set<int> ids = compute_available_set(p, cfg.anchors, cfg.room, cfg.max_range, cfg.z_tag);
      if (ids.empty() && !cfg.dataset_along_trajectory) continue;
      s.label = p;
      const Vec3 tag(p.x(), p.y(), cfg.z_tag);
      for (int id : ids) {
        const SensingAgent& a = find_agent(cfg.anchors, id);
        Rng rng(derive_seed(cfg.seed, "dataset-uwb", {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(id)}));
        const RangeObservation obs = sample_uwb(true_range(tag, a), a, rng, i);
        s.anchors.push_back({a.position.x(), a.position.y(), obs.range});
      }
      break;
    }
    if (s.anchors.empty()) throw ConfigError("sample " + std::to_string(i) + " has no anchor in line of sight");
    out.push_back(std::move(s));
  }
  return out;
}

void write_metrics_csv(std::ostream& os, std::span<const QiMetrics> metrics) {
  using csv::format_double;
  os << "qi,x,vx,y,vy,x_hat,vx_hat,y_hat,vy_hat,position_error,predicted_position_var,n_selected,selected_ids,"
        "objective,qi_latency,nees\n";
  for (const QiMetrics& m : metrics) {
    os << m.qi;
    for (int k = 0; k < kStateDim; ++k) os << ',' << format_double(m.truth(k));
    for (int k = 0; k < kStateDim; ++k) os << ',' << format_double(m.estimate(k));
    os << ',' << format_double(m.position_error) << ',' << format_double(m.predicted_position_var) << ','
       << m.n_selected << ',';
    for (std::size_t i = 0; i < m.selected.size(); ++i) os << (i ? ";" : "") << m.selected[i];
    os << ',' << format_double(m.objective) << ',' << format_double(m.qi_latency) << ',' << format_double(m.nees)
       << '\n';
  }
}

void write_belief_csv(std::ostream& os, std::span<const Belief> beliefs) {
  using csv::format_double;
  os << "qi,x_hat,vx_hat,y_hat,vy_hat,psi_11,psi_22,psi_33,psi_44\n";
  for (const Belief& b : beliefs) {
    os << b.qi;
    for (int k = 0; k < kStateDim; ++k) os << ',' << format_double(b.mean(k));
    for (int k = 0; k < kStateDim; ++k) os << ',' << format_double(b.cov(k, k));
    os << '\n';
  }
}

void write_schedule_csv(std::ostream& os, std::span<const Schedule> schedules) {
  using csv::format_double;
  os << "qi,n_selected,ids,objective,predicted_rmse\n";
  for (const Schedule& s : schedules) {
    os << s.qi << ',' << s.selected.size() << ',';
    for (std::size_t i = 0; i < s.selected.size(); ++i) os << (i ? ";" : "") << s.selected[i];
    const double rmse = std::sqrt(s.predicted_cov(kIdxX, kIdxX) + s.predicted_cov(kIdxY, kIdxY));
    os << ',' << format_double(s.objective_value) << ',' << format_double(rmse) << '\n';
  }
}

void write_uwb_csv(std::ostream& os, std::span<const RangeObservation> obs) {
  os << "qi,anchor_id,range\n";
  for (const RangeObservation& o : obs) os << o.qi << ',' << o.anchor_id << ',' << csv::format_double(o.range) << '\n';
}

void write_imu_csv(std::ostream& os, std::span<const ImuRecord> obs) {
  using csv::format_double;
  os << "qi,ax_local,ay_local,yaw\n";
  for (const ImuRecord& r : obs) {
    os << r.qi << ',' << format_double(r.accel_local.x()) << ',' << format_double(r.accel_local.y()) << ','
       << format_double(r.yaw) << '\n';
  }
}

std::vector<RangeObservation> read_uwb_csv(std::istream& is) {
  std::vector<RangeObservation> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 3) throw IoError("UWB CSV line " + std::to_string(line_no) + ": expected 3 fields");
    out.push_back({csv::parse_int(f[1]), csv::parse_double(f[2]), csv::parse_int(f[0])});
  }
  return out;
}

std::vector<ImuRecord> read_imu_csv(std::istream& is) {
  std::vector<ImuRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 4) throw IoError("IMU CSV line " + std::to_string(line_no) + ": expected 4 fields");
    out.push_back({csv::parse_int(f[0]), Vec2(csv::parse_double(f[1]), csv::parse_double(f[2])), csv::parse_double(f[3])});
  }
  return out;
}

}  // namespace voi_twin
