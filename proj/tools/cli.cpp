#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "voi_twin/csv.hpp"
#include "voi_twin/errors.hpp"
#include "voi_twin/gnn.hpp"
#include "voi_twin/harness.hpp"
#include "voi_twin/scenario.hpp"

namespace voi_twin::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class MissingFileError : public TwinError {
 public:
  using TwinError::TwinError;
};

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw TwinError("SHA-256 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

void require_file(const std::string& path) {
  if (path.empty() || !fs::is_regular_file(path)) throw MissingFileError("no such file: '" + path + "'");
}

std::string read_file(const std::string& path) {
  require_file(path);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFileError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Files written by one command, hashed into its manifest.
class Artifacts {
 public:
  explicit Artifacts(fs::path root) : root_(std::move(root)) {}

  void write(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os << bytes;
    if (!os) throw IoError("failed writing '" + path.string() + "'");
    entries_.push_back({fs::relative(path, root_).generic_string(), sha256_hex(bytes), bytes.size()});
  }

  json to_json() const {
    json out = json::array();
    for (const auto& e : entries_) out.push_back({{"path", e.path}, {"sha256", e.hash}, {"bytes", e.size}});
    return out;
  }

 private:
  struct Entry {
    std::string path;
    std::string hash;
    std::size_t size;
  };
  fs::path root_;
  std::vector<Entry> entries_;
};

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::string scheduler;
  std::string format = "csv";
  std::string model;
};

// A manifest is accepted wherever a scenario is, so a recorded run can be
// repeated from its manifest alone.
ScenarioConfig load_config(const Common& c, const CLI::App& sub) {
  ScenarioConfig cfg;
  if (c.config.empty()) {
    cfg = default_scenario();
  } else {
    json j;
    try {
      j = json::parse(read_file(c.config));
    } catch (const json::parse_error& e) {
      throw ConfigError("'" + c.config + "' is not valid JSON: " + e.what());
    }
    if (j.is_object() && j.contains("command") && j.contains("config")) j = j.at("config");
    cfg = scenario_from_json(j);
  }
  if (sub.count("--seed")) cfg.seed = c.seed;
  if (!c.scheduler.empty()) cfg.scheduler = scheduler_kind_from_string(c.scheduler);
  cfg.validate();
  return cfg;
}

std::optional<gnn::GnnModel> load_gnn_if_needed(const ScenarioConfig& cfg, const std::string& flag_path) {
  if (cfg.scheduler != SchedulerKind::kGnn) return std::nullopt;
  const std::string path = flag_path.empty() ? cfg.gnn_model_path : flag_path;
  if (path.empty()) throw ConfigError("the gnn scheduler needs --model or gnn.model in the scenario");
  require_file(path);
  return gnn::load_model(path).model;
}

json summary_of(const ScenarioConfig& cfg, std::span<const QiMetrics> m, bool has_truth) {
  json s{{"scheduler", to_string(cfg.scheduler)},
         {"seed", cfg.seed},
         {"n_qis", m.size()},
         {"predicted_rmse", predicted_rmse(m)},
         {"mean_selected", mean_selected(m)},
         {"total_slots", mean_selected(m) * static_cast<double>(m.size())},
         {"mean_latency", mean_latency(m)}};
  if (has_truth) {
    s["mse"] = compute_mse(m);
    s["rmse"] = compute_rmse(m);
    s["mean_nees"] = mean_nees(m);
  }
  return s;
}

json metrics_json(std::span<const QiMetrics> metrics) {
  json out = json::array();
  for (const QiMetrics& m : metrics) {
    out.push_back({{"qi", m.qi},
                   {"truth", std::vector<double>(m.truth.data(), m.truth.data() + kStateDim)},
                   {"estimate", std::vector<double>(m.estimate.data(), m.estimate.data() + kStateDim)},
                   {"position_error", m.position_error},
                   {"predicted_position_var", m.predicted_position_var},
                   {"n_selected", m.n_selected},
                   {"selected", m.selected},
                   {"objective", m.objective},
                   {"qi_latency", m.qi_latency},
                   {"nees", m.nees}});
  }
  return out;
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

void write_manifest(const fs::path& path, const std::string& command, const ScenarioConfig* cfg, std::uint64_t seed,
                    const std::string& out, const json& options, const Artifacts& artifacts) {
  json m{{"command", command}, {"seed", seed}, {"out", out}, {"options", options}, {"artifacts", artifacts.to_json()}};
  if (cfg) m["config"] = scenario_to_json(*cfg);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write manifest '" + path.string() + "'");
  os << m.dump(2) << '\n';
}

void check_format(const std::string& f) {
  if (f != "csv" && f != "json") throw ConfigError("--format must be csv or json");
}

void write_episode(Artifacts& art, const fs::path& dir, const std::string& format, const EpisodeResult& r,
                   bool with_logs) {
  if (format == "json") {
    art.write(dir / "metrics.json", metrics_json(r.metrics).dump(2) + "\n");
  } else {
    art.write(dir / "metrics.csv", render([&](std::ostream& os) { write_metrics_csv(os, r.metrics); }));
  }
  art.write(dir / "belief.csv", render([&](std::ostream& os) { write_belief_csv(os, r.beliefs); }));
  art.write(dir / "schedule.csv", render([&](std::ostream& os) { write_schedule_csv(os, r.schedules); }));
  if (with_logs) {
    art.write(dir / "uwb.csv", render([&](std::ostream& os) { write_uwb_csv(os, r.uwb_log); }));
    art.write(dir / "imu.csv", render([&](std::ostream& os) { write_imu_csv(os, r.imu_log); }));
  }
}

// Per-episode seed for run i of a multi-run command. Every scheduler and
// threshold gets the same seed list, so they see the same worlds.
std::uint64_t episode_seed(std::uint64_t master, int i) {
  return derive_seed(master, "episode", {static_cast<std::uint64_t>(i)});
}

std::string history_csv(std::span<const gnn::EpochRecord> history) {
  using csv::format_double;
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,train_rmse_m,val_rmse_m,dataset_rmse_m,max_param_change\n";
  for (const auto& e : history) {
    os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
       << format_double(e.train_rmse_m) << ',' << format_double(e.val_rmse_m) << ',' << format_double(e.dataset_rmse_m)
       << ',' << format_double(e.max_param_change) << '\n';
  }
  return os.str();
}

gnn::Aggregation aggregation_from(const std::string& s, gnn::Aggregation fallback) {
  if (s.empty()) return fallback;
  if (s == "mean") return gnn::Aggregation::kMean;
  if (s == "sum") return gnn::Aggregation::kSum;
  throw ConfigError("--aggregation must be mean or sum");
}

struct TrainOptions {
  int epochs = 500;
  int batch = 32;
  double lr = 1e-3;
  std::string aggregation;
};

gnn::TrainResult train_model(const std::vector<gnn::StarGraph>& graphs, const Room& room, std::uint64_t seed,
                             const TrainOptions& o, gnn::Aggregation agg, spdlog::logger& log) {
  gnn::TrainConfig tc;
  tc.max_epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.step_size = o.lr;
  tc.seed = seed;
  const gnn::GnnModel init = gnn::GnnModel::initialized({}, derive_seed(seed, "gnn-init"), agg);
  log.info("training on {} samples, up to {} epochs", graphs.size(), o.epochs);
  gnn::TrainResult r = gnn::train(init, graphs, tc, room);
  const auto& last = r.history.back();
  log.info("stopped after {} epochs ({}), val RMSE {:.4f} m", last.epoch, r.converged ? "converged" : "epoch limit",
           last.val_rmse_m);
  return r;
}

void print_json(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  spdlog::logger log("voi-twin", sink);
  log.set_pattern("[%l] %v");
  log.set_level(spdlog::level::warn);
  if (const char* env = std::getenv("VOI_TWIN_LOG")) log.set_level(spdlog::level::from_str(env));

  CLI::App app{"Digital-twin AGV tracking: EKF, VoI anchor scheduling and a GNN localizer", "voi-twin"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* s, bool dir_out, const std::string& default_out) {
    s->add_option("--config", c.config, "Scenario JSON (or a run manifest)");
    s->add_option("--seed", c.seed, "Master seed (overrides the scenario)");
    c.out = default_out;
    s->add_option("--out", c.out, dir_out ? "Output directory" : "Output file")->capture_default_str();
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one episode and write its traces");
  add_common(sim, true, "out");
  sim->add_option("--scheduler", c.scheduler, "voi, greedy or gnn")->check(CLI::IsMember({"voi", "greedy", "gnn"}));
  sim->add_option("--format", c.format, "Metric trace format: csv or json")->check(CLI::IsMember({"csv", "json"}));
  sim->add_option("--model", c.model, "GNN model for the gnn scheduler");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Mean selected anchors and RMSE against the position threshold");
  add_common(sweep, true, "out");
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.5, 0.75, 1.0};
  int runs = 10;
  sweep->add_option("--thresholds", thresholds, "Position error thresholds in meters")->delimiter(',');
  sweep->add_option("--seeds", runs, "Episodes per threshold")->check(CLI::PositiveNumber);
  sweep->add_option("--scheduler", c.scheduler, "voi or greedy")->check(CLI::IsMember({"voi", "greedy"}));
  sweep->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  // compare
  auto* cmp = app.add_subcommand("compare", "Error CDFs of several schedulers over the same episodes");
  add_common(cmp, true, "out");
  std::vector<std::string> schedulers{"voi", "greedy", "gnn"};
  int samples = 5000;
  TrainOptions topt;
  cmp->add_option("--schedulers", schedulers, "Schedulers to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"voi", "greedy", "gnn"}));
  cmp->add_option("--seeds", runs, "Episodes per scheduler")->check(CLI::PositiveNumber);
  cmp->add_option("--model", c.model, "GNN model; trained from a fresh dataset when absent");
  cmp->add_option("--samples", samples, "Dataset size when training")->check(CLI::PositiveNumber);
  cmp->add_option("--epochs", topt.epochs, "Epoch limit when training")->check(CLI::PositiveNumber);
  cmp->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  // gnn-train
  auto* gtrain = app.add_subcommand("gnn-train", "Train the GNN localizer on a dataset CSV");
  add_common(gtrain, false, "model.bin");
  std::string data;
  gtrain->add_option("--data", data, "Dataset CSV")->required();
  gtrain->add_option("--epochs", topt.epochs, "Epoch limit")->check(CLI::PositiveNumber);
  gtrain->add_option("--batch", topt.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  gtrain->add_option("--lr", topt.lr, "Adam step size")->check(CLI::PositiveNumber);
  gtrain->add_option("--aggregation", topt.aggregation, "mean or sum")->check(CLI::IsMember({"mean", "sum"}));

  // gnn-eval
  auto* geval = app.add_subcommand("gnn-eval", "Report GNN RMSE on a dataset CSV");
  std::string errors_out;
  geval->add_option("--model", c.model, "Model file")->required();
  geval->add_option("--data", data, "Dataset CSV")->required();
  geval->add_option("--out", errors_out, "Optional per-sample error CSV");

  // dataset-gen
  auto* dgen = app.add_subcommand("dataset-gen", "Generate a labeled GNN dataset CSV");
  add_common(dgen, false, "dataset.csv");
  bool along = false;
  dgen->add_option("--samples", samples, "Number of samples")->check(CLI::PositiveNumber);
  dgen->add_flag("--along-trajectory", along, "Sample positions along the lap instead of uniformly");

  // replay
  auto* rep = app.add_subcommand("replay", "Re-run estimator and scheduler over recorded measurements");
  add_common(rep, true, "out");
  std::string uwb_path;
  std::string imu_path;
  rep->add_option("--uwb", uwb_path, "Recorded ranges CSV (qi,anchor_id,range)")->required();
  rep->add_option("--imu", imu_path, "Recorded IMU CSV (qi,ax_local,ay_local,yaw)");
  rep->add_option("--scheduler", c.scheduler, "voi or greedy")->check(CLI::IsMember({"voi", "greedy"}));
  rep->add_option("--format", c.format, "Metric trace format: csv or json")->check(CLI::IsMember({"csv", "json"}));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    check_format(c.format);
    if (sim->parsed()) {
      const ScenarioConfig cfg = load_config(c, *sim);
      const std::optional<gnn::GnnModel> model = load_gnn_if_needed(cfg, c.model);
      log.info("simulating {} QIs with the {} scheduler, seed {}", cfg.n_qis, to_string(cfg.scheduler), cfg.seed);
      const EpisodeResult r = run_episode(cfg, model ? &*model : nullptr);
      const fs::path dir(c.out);
      Artifacts art(dir);
      write_episode(art, dir, c.format, r, true);
      const json summary = summary_of(cfg, r.metrics, true);
      art.write(dir / "summary.json", summary.dump(2) + "\n");
      write_manifest(dir / "manifest.json", "simulate", &cfg, cfg.seed, c.out,
                     {{"scheduler", to_string(cfg.scheduler)}, {"format", c.format}, {"model", c.model}}, art);
      print_json(out, summary);
      return kExitOk;
    }

    if (sweep->parsed()) {
      const ScenarioConfig base = load_config(c, *sweep);
      if (thresholds.empty()) throw ConfigError("--thresholds needs at least one value");
      json rows = json::array();
      std::ostringstream summary_csv;
      std::ostringstream runs_csv;
      summary_csv << "threshold,runs,mean_selected,measured_rmse,predicted_rmse,mse,mean_latency,mean_nees\n";
      runs_csv << "threshold,run,seed,mse,predicted_rmse,mean_selected\n";
      for (double t : thresholds) {
        if (!(t > 0.0)) throw ConfigError("thresholds must be positive");
        double mse = 0.0, pvar = 0.0, sel = 0.0, lat = 0.0, nees = 0.0;
        for (int i = 0; i < runs; ++i) {
          ScenarioConfig cfg = base;
          cfg.targets = QualityTargets::position_threshold(t);
          cfg.seed = episode_seed(base.seed, i);
          const EpisodeResult r = run_episode(cfg);
          const double m = compute_mse(r.metrics);
          const double p = predicted_rmse(r.metrics);
          const double s = mean_selected(r.metrics);
          mse += m;
          pvar += p * p;
          sel += s;
          lat += mean_latency(r.metrics);
          nees += mean_nees(r.metrics);
          runs_csv << csv::format_double(t) << ',' << i << ',' << cfg.seed << ',' << csv::format_double(m) << ','
                   << csv::format_double(p) << ',' << csv::format_double(s) << '\n';
        }
        const double n = runs;
        const json row{{"threshold", t},
                       {"runs", runs},
                       {"mean_selected", sel / n},
                       {"measured_rmse", std::sqrt(mse / n)},
                       {"predicted_rmse", std::sqrt(pvar / n)},
                       {"mse", mse / n},
                       {"mean_latency", lat / n},
                       {"mean_nees", nees / n}};
        summary_csv << csv::format_double(t) << ',' << runs << ',' << csv::format_double(sel / n) << ','
                    << csv::format_double(std::sqrt(mse / n)) << ',' << csv::format_double(std::sqrt(pvar / n)) << ','
                    << csv::format_double(mse / n) << ',' << csv::format_double(lat / n) << ','
                    << csv::format_double(nees / n) << '\n';
        log.info("threshold {} m: {:.3f} anchors/QI, RMSE {:.4f} m", t, sel / n, std::sqrt(mse / n));
        rows.push_back(row);
      }
      const fs::path dir(c.out);
      Artifacts art(dir);
      if (c.format == "json") {
        art.write(dir / "sweep.json", rows.dump(2) + "\n");
      } else {
        art.write(dir / "sweep.csv", summary_csv.str());
      }
      art.write(dir / "sweep_runs.csv", runs_csv.str());
      write_manifest(dir / "manifest.json", "sweep", &base, base.seed, c.out,
                     {{"thresholds", thresholds}, {"seeds", runs}, {"format", c.format}}, art);
      out << summary_csv.str();
      return kExitOk;
    }

    if (cmp->parsed()) {
      const ScenarioConfig base = load_config(c, *cmp);
      const fs::path dir(c.out);
      Artifacts art(dir);
      std::optional<gnn::GnnModel> model;
      if (std::find(schedulers.begin(), schedulers.end(), "gnn") != schedulers.end()) {
        if (!c.model.empty() || !base.gnn_model_path.empty()) {
          const std::string path = c.model.empty() ? base.gnn_model_path : c.model;
          require_file(path);
          model = gnn::load_model(path).model;
        } else {
          ScenarioConfig dcfg = base;
          dcfg.seed = derive_seed(base.seed, "compare-dataset");
          const auto ds = generate_gnn_dataset(dcfg, samples);
          const gnn::TrainResult tr =
              train_model(gnn::to_graphs(ds, base.room), base.room, base.seed, topt, base.gnn_aggregation, log);
          model = tr.model;
          art.write(dir / "model.bin", render([&](std::ostream& os) { gnn::save_model(os, tr.model, base.room); }));
          art.write(dir / "history.csv", history_csv(tr.history));
        }
      }

      json rows = json::array();
      std::ostringstream summary_csv;
      std::ostringstream cdf_csv;
      summary_csv << "scheduler,runs,mse,rmse,total_slots,mean_selected,mean_latency\n";
      cdf_csv << "scheduler,squared_error,fraction\n";
      for (const std::string& name : schedulers) {
        double mse = 0.0, slots = 0.0, sel = 0.0, lat = 0.0;
        std::vector<double> sq;
        for (int i = 0; i < runs; ++i) {
          ScenarioConfig cfg = base;
          cfg.scheduler = scheduler_kind_from_string(name);
          cfg.seed = episode_seed(base.seed, i);
          const EpisodeResult r = run_episode(cfg, model ? &*model : nullptr);
          mse += compute_mse(r.metrics);
          sel += mean_selected(r.metrics);
          slots += mean_selected(r.metrics) * static_cast<double>(r.metrics.size());
          lat += mean_latency(r.metrics);
          for (const QiMetrics& m : r.metrics) sq.push_back(m.position_error * m.position_error);
        }
        const double n = runs;
        for (const CdfPoint& p : empirical_cdf(sq)) {
          cdf_csv << name << ',' << csv::format_double(p.value) << ',' << csv::format_double(p.fraction) << '\n';
        }
        summary_csv << name << ',' << runs << ',' << csv::format_double(mse / n) << ','
                    << csv::format_double(std::sqrt(mse / n)) << ',' << csv::format_double(slots) << ','
                    << csv::format_double(sel / n) << ',' << csv::format_double(lat / n) << '\n';
        rows.push_back({{"scheduler", name},
                        {"runs", runs},
                        {"mse", mse / n},
                        {"rmse", std::sqrt(mse / n)},
                        {"total_slots", slots},
                        {"mean_selected", sel / n},
                        {"mean_latency", lat / n}});
      }
      if (c.format == "json") {
        art.write(dir / "compare.json", rows.dump(2) + "\n");
      } else {
        art.write(dir / "compare.csv", summary_csv.str());
      }
      art.write(dir / "cdf.csv", cdf_csv.str());
      write_manifest(dir / "manifest.json", "compare", &base, base.seed, c.out,
                     {{"schedulers", schedulers}, {"seeds", runs}, {"samples", samples}, {"epochs", topt.epochs},
                      {"model", c.model}, {"format", c.format}},
                     art);
      out << summary_csv.str();
      return kExitOk;
    }

    if (gtrain->parsed()) {
      const ScenarioConfig cfg = load_config(c, *gtrain);
      const std::string text = read_file(data);
      std::istringstream is(text);
      const std::vector<gnn::Sample> ds = gnn::read_dataset_csv(is);
      const gnn::TrainResult tr = train_model(gnn::to_graphs(ds, cfg.room), cfg.room, cfg.seed, topt,
                                              aggregation_from(topt.aggregation, cfg.gnn_aggregation), log);
      const fs::path model_path(c.out);
      const fs::path root = model_path.has_parent_path() ? model_path.parent_path() : fs::path(".");
      Artifacts art(root);
      art.write(model_path, render([&](std::ostream& os) { gnn::save_model(os, tr.model, cfg.room); }));
      art.write(fs::path(c.out + ".history.csv"), history_csv(tr.history));
      write_manifest(fs::path(c.out + ".manifest.json"), "gnn-train", &cfg, cfg.seed, c.out,
                     {{"data", data},
                      {"data_sha256", sha256_hex(text)},
                      {"epochs", topt.epochs},
                      {"batch", topt.batch},
                      {"lr", topt.lr},
                      {"aggregation", topt.aggregation}},
                     art);
      const auto& last = tr.history.back();
      print_json(out, {{"epochs", last.epoch},
                       {"converged", tr.converged},
                       {"train_rmse_m", last.train_rmse_m},
                       {"val_rmse_m", last.val_rmse_m},
                       {"dataset_rmse_m", last.dataset_rmse_m}});
      return kExitOk;
    }

    if (geval->parsed()) {
      require_file(c.model);
      const gnn::LoadedModel loaded = gnn::load_model(c.model);
      std::istringstream is(read_file(data));
      const std::vector<gnn::Sample> ds = gnn::read_dataset_csv(is);
      const gnn::EvalResult r = gnn::evaluate(loaded.model, gnn::to_graphs(ds, loaded.room), loaded.room);
      if (!errors_out.empty()) {
        const fs::path p(errors_out);
        Artifacts art(p.has_parent_path() ? p.parent_path() : fs::path("."));
        std::ostringstream os;
        os << "sample_id,error_m\n";
        for (std::size_t i = 0; i < ds.size(); ++i) os << ds[i].sample_id << ',' << csv::format_double(r.errors_m[i]) << '\n';
        art.write(p, os.str());
        write_manifest(fs::path(errors_out + ".manifest.json"), "gnn-eval", nullptr, 0, errors_out,
                       {{"model", c.model}, {"data", data}}, art);
      }
      out << "samples " << ds.size() << '\n' << "rmse_m " << csv::format_double(r.rmse_m) << '\n';
      return kExitOk;
    }

    if (dgen->parsed()) {
      ScenarioConfig cfg = load_config(c, *dgen);
      if (along) cfg.dataset_along_trajectory = true;
      const std::vector<gnn::Sample> ds = generate_gnn_dataset(cfg, samples);
      const fs::path p(c.out);
      Artifacts art(p.has_parent_path() ? p.parent_path() : fs::path("."));
      art.write(p, render([&](std::ostream& os) { gnn::write_dataset_csv(os, ds); }));
      write_manifest(fs::path(c.out + ".manifest.json"), "dataset-gen", &cfg, cfg.seed, c.out,
                     {{"samples", samples}, {"along_trajectory", cfg.dataset_along_trajectory}}, art);
      out << "samples " << ds.size() << '\n';
      return kExitOk;
    }

    if (rep->parsed()) {
      const ScenarioConfig cfg = load_config(c, *rep);
      std::istringstream uwb_is(read_file(uwb_path));
      const std::vector<RangeObservation> uwb = read_uwb_csv(uwb_is);
      std::vector<ImuRecord> imu;
      if (!imu_path.empty()) {
        std::istringstream imu_is(read_file(imu_path));
        imu = read_imu_csv(imu_is);
      }
      const EpisodeResult r = replay(cfg, uwb, imu);
      const fs::path dir(c.out);
      Artifacts art(dir);
      write_episode(art, dir, c.format, r, false);
      const json summary = summary_of(cfg, r.metrics, false);
      art.write(dir / "summary.json", summary.dump(2) + "\n");
      write_manifest(dir / "manifest.json", "replay", &cfg, cfg.seed, c.out,
                     {{"uwb", uwb_path}, {"imu", imu_path}, {"format", c.format}}, art);
      print_json(out, summary);
      return kExitOk;
    }
  } catch (const MissingFileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitMissingFile;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace voi_twin::cli
