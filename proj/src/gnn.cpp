#include "voi_twin/gnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "voi_twin/csv.hpp"
#include "voi_twin/errors.hpp"
#include "voi_twin/random.hpp"

namespace voi_twin::gnn {

namespace {

constexpr int kDummyWidth = 2;
constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "voi-twin-gnn";

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // per layer, rows = samples
  std::vector<Eigen::MatrixXd> pre;     // pre-activations
  Eigen::MatrixXd output;
};

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::kRelu) return z.cwiseMax(0.0);
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

Activation layer_activation(const Mlp& mlp, std::size_t i) {
  return i + 1 == mlp.layers.size() ? mlp.output_activation : Activation::kRelu;
}

Eigen::MatrixXd mlp_forward(const Mlp& mlp, const Eigen::MatrixXd& x, MlpCache* cache) {
  Eigen::MatrixXd a = x;
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const DenseLayer& layer = mlp.layers[i];
    Eigen::MatrixXd z = a * layer.W.transpose();
    z.rowwise() += layer.b.transpose();
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    a = activate(z, layer_activation(mlp, i));
  }
  if (cache) cache->output = a;
  return a;
}

// Accumulates parameter gradients into `grads` and returns dLoss/dInput.
Eigen::MatrixXd mlp_backward(const Mlp& mlp, const MlpCache& cache, const Eigen::MatrixXd& d_out, Mlp& grads) {
  Eigen::MatrixXd d_a = d_out;
  for (std::size_t k = mlp.layers.size(); k-- > 0;) {
    const Eigen::MatrixXd& z = cache.pre[k];
    Eigen::MatrixXd d_z;
    if (layer_activation(mlp, k) == Activation::kRelu) {
      d_z = d_a.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    } else {
      // Only the output layer can be a sigmoid.
      const Eigen::MatrixXd& s = cache.output;
      d_z = d_a.cwiseProduct(s.cwiseProduct((1.0 - s.array()).matrix()));
    }
    grads.layers[k].W.noalias() += d_z.transpose() * cache.inputs[k];
    grads.layers[k].b.noalias() += d_z.colwise().sum().transpose();
    d_a = d_z * mlp.layers[k].W;
  }
  return d_a;
}

struct GraphCache {
  MlpCache message;
  MlpCache update;
  MlpCache readout;
  Vec2 prediction;
};

Eigen::RowVectorXd with_dummy(const Eigen::RowVectorXd& head, const Vec2& dummy) {
  Eigen::RowVectorXd out(head.size() + kDummyWidth);
  out << head, dummy.transpose();
  return out;
}

Eigen::MatrixXd canonical_rows(const Eigen::MatrixXd& m) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (m(a, c) != m(b, c)) return m(a, c) < m(b, c);
    }
    return false;
  });
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(order[i]);
  return out;
}

Vec2 forward_cached(const GnnModel& model, const StarGraph& g, GraphCache* cache) {
  if (g.anchor_count() < 1) throw GraphError("star graph has no anchor nodes");
  if (g.anchor_feats.cols() != model.message.layers.front().W.cols()) {
    throw ContractError("anchor feature width does not match the message network");
  }
  // Rows in lexicographic order so the aggregate is bitwise independent of
  // the order anchors were listed in.
  const Eigen::MatrixXd feats = canonical_rows(g.anchor_feats);
  const Eigen::MatrixXd messages = mlp_forward(model.message, feats, cache ? &cache->message : nullptr);
  Eigen::RowVectorXd agg = messages.colwise().sum();
  if (model.aggregation == Aggregation::kMean) agg /= static_cast<double>(g.anchor_count());
  const Eigen::MatrixXd upd = mlp_forward(model.update, with_dummy(agg, g.agv_dummy), cache ? &cache->update : nullptr);
  const Eigen::MatrixXd out =
      mlp_forward(model.readout, with_dummy(upd.row(0), g.agv_dummy), cache ? &cache->readout : nullptr);
  Vec2 y(out(0, 0), out(0, 1));
  if (cache) cache->prediction = y;
  return y;
}

template <typename Fn>
void for_each_tensor(GnnModel& m, Fn&& fn) {
  for (Mlp* mlp : {&m.message, &m.update, &m.readout}) {
    for (DenseLayer& l : mlp->layers) {
      fn(l.W, true);
      fn(l.b, false);
    }
  }
}

template <typename Fn>
void for_each_tensor(const GnnModel& m, Fn&& fn) {
  for (const Mlp* mlp : {&m.message, &m.update, &m.readout}) {
    for (const DenseLayer& l : mlp->layers) {
      fn(l.W, true);
      fn(l.b, false);
    }
  }
}

nlohmann::json widths_json(const Widths& w) {
  return {{"message", w.message}, {"update", w.update}, {"readout", w.readout}};
}

}  // namespace

Mlp Mlp::zeros(const std::vector<int>& widths, Activation output) {
  if (widths.size() < 2) throw ConfigError("MLP needs at least an input and an output width");
  Mlp m;
  m.output_activation = output;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] < 1 || widths[i + 1] < 1) throw ConfigError("MLP widths must be positive");
    m.layers.push_back({Eigen::MatrixXd::Zero(widths[i + 1], widths[i]), Eigen::VectorXd::Zero(widths[i + 1])});
  }
  return m;
}

std::vector<int> Mlp::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(static_cast<int>(layers.front().W.cols()));
  for (const DenseLayer& l : layers) w.push_back(static_cast<int>(l.W.rows()));
  return w;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

void Widths::validate() const {
  if (message.size() < 2 || update.size() < 2 || readout.size() < 2) {
    throw ConfigError("each GNN stage needs at least two widths");
  }
  if (message.front() != 3) throw ConfigError("message network input must be 3 wide [x, y, range]");
  if (update.front() != message.back() + kDummyWidth) {
    throw ConfigError("update network input must be message output + 2");
  }
  if (readout.front() != update.back() + kDummyWidth) {
    throw ConfigError("readout network input must be update output + 2");
  }
  if (readout.back() != 2) throw ConfigError("readout network must output 2 values");
}

GnnModel GnnModel::zeros(const Widths& widths, Aggregation agg) {
  widths.validate();
  GnnModel m;
  m.message = Mlp::zeros(widths.message, Activation::kRelu);
  m.update = Mlp::zeros(widths.update, Activation::kRelu);
  m.readout = Mlp::zeros(widths.readout, Activation::kSigmoid);
  m.aggregation = agg;
  return m;
}

GnnModel GnnModel::initialized(const Widths& widths, std::uint64_t seed, Aggregation agg) {
  GnnModel m = zeros(widths, agg);
  Rng rng(derive_seed(seed, "gnn-init"));
  for_each_tensor(m, [&](auto& t, bool is_weight) {
    if (!is_weight) return;
    const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = rng.uniform(-limit, limit);
    }
  });
  return m;
}

Widths GnnModel::widths() const { return {message.widths(), update.widths(), readout.widths()}; }

std::size_t GnnModel::parameter_count() const {
  return message.parameter_count() + update.parameter_count() + readout.parameter_count();
}

Eigen::VectorXd GnnModel::flatten() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index pos = 0;
  for_each_tensor(*this, [&](const auto& t, bool) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) out(pos++) = t(r, c);
    }
  });
  return out;
}

void GnnModel::assign(const Eigen::Ref<const Eigen::VectorXd>& params) {
  if (params.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw ContractError("parameter vector length does not match the model");
  }
  Eigen::Index pos = 0;
  for_each_tensor(*this, [&](auto& t, bool) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = params(pos++);
    }
  });
}

Normalizer Normalizer::for_room(const Room& room) {
  room.validate();
  return {room.width, room.depth, room.diagonal()};
}

StarGraph build_star_graph(std::span<const AnchorRange> anchors, const Room& room, const std::optional<Vec2>& label_m) {
  if (anchors.empty()) throw GraphError("cannot build a star graph without scheduled anchors");
  const Normalizer norm = Normalizer::for_room(room);
  StarGraph g;
  g.anchor_feats.resize(static_cast<Eigen::Index>(anchors.size()), 3);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    g.anchor_feats(r, 0) = anchors[i].x / norm.width;
    g.anchor_feats(r, 1) = anchors[i].y / norm.depth;
    g.anchor_feats(r, 2) = anchors[i].range / norm.diagonal;
  }
  if (label_m) g.label = norm.to_unit(*label_m);
  return g;
}

StarGraph build_star_graph(std::span<const std::pair<SensingAgent, RangeObservation>> selected, const Room& room,
                           const std::optional<Vec2>& label_m) {
  std::vector<AnchorRange> raw;
  raw.reserve(selected.size());
  for (const auto& [agent, obs] : selected) {
    if (agent.id != obs.anchor_id) throw ContractError("observation does not belong to the paired anchor");
    raw.push_back({agent.position.x(), agent.position.y(), obs.range});
  }
  return build_star_graph(raw, room, label_m);
}

Vec2 forward(const GnnModel& model, const StarGraph& g) { return forward_cached(model, g, nullptr); }

double batch_loss(const GnnModel& model, std::span<const StarGraph> batch) {
  if (batch.empty()) throw ContractError("empty batch");
  double total = 0.0;
  for (const StarGraph& g : batch) {
    if (!g.label) throw ContractError("training graph has no label");
    total += (*g.label - forward(model, g)).squaredNorm();
  }
  return total / static_cast<double>(batch.size());
}

LossAndGrad loss_and_gradients(const GnnModel& model, std::span<const StarGraph> batch) {
  if (batch.empty()) throw ContractError("empty batch");
  LossAndGrad out{0.0, GnnModel::zeros(model.widths(), model.aggregation)};
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  GraphCache cache;
  const int message_out = model.message.widths().back();
  const int update_out = model.update.widths().back();

  for (const StarGraph& g : batch) {
    if (!g.label) throw ContractError("training graph has no label");
    const Vec2 y = forward_cached(model, g, &cache);
    const Vec2 err = y - *g.label;
    out.loss += err.squaredNorm() * inv_b;

    Eigen::MatrixXd d_y(1, 2);
    d_y << 2.0 * inv_b * err.x(), 2.0 * inv_b * err.y();
    const Eigen::MatrixXd d_readout_in = mlp_backward(model.readout, cache.readout, d_y, out.grads.readout);
    const Eigen::MatrixXd d_update_out = d_readout_in.leftCols(update_out);
    const Eigen::MatrixXd d_update_in = mlp_backward(model.update, cache.update, d_update_out, out.grads.update);
    Eigen::RowVectorXd d_agg = d_update_in.leftCols(message_out);
    if (model.aggregation == Aggregation::kMean) d_agg /= static_cast<double>(g.anchor_count());
    const Eigen::MatrixXd d_messages = d_agg.replicate(g.anchor_count(), 1);
    mlp_backward(model.message, cache.message, d_messages, out.grads.message);
  }
  return out;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(step_size > 0.0)) throw ConfigError("step size must be positive");
  if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be nonnegative");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must lie in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam decays must lie in [0, 1)");
}

TrainResult train(GnnModel model, std::span<const StarGraph> dataset, const TrainConfig& cfg, const Room& room) {
  cfg.validate();
  if (dataset.size() < static_cast<std::size_t>(cfg.batch_size)) {
    throw ConfigError("dataset has " + std::to_string(dataset.size()) + " samples, fewer than the batch size " +
                      std::to_string(cfg.batch_size));
  }
  for (const StarGraph& g : dataset) {
    if (!g.label) throw ContractError("training graph has no label");
  }

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(cfg.seed, "gnn-split"));
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(dataset.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, dataset.size());

  std::vector<StarGraph> train_set;
  std::vector<StarGraph> val_set;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train_set : val_set).push_back(dataset[order[i]]);
  }

  TrainResult result;
  Eigen::VectorXd params = model.flatten();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(params.size());
  long step = 0;

  auto split_metrics = [&](std::span<const StarGraph> set) -> std::pair<double, double> {
    if (set.empty()) return {0.0, 0.0};
    return {batch_loss(model, set), evaluate(model, set, room).rmse_m};
  };

  std::vector<std::size_t> idx(train_set.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<StarGraph> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));

  for (int epoch = 1; epoch <= cfg.max_epochs && !result.converged; ++epoch) {
    Rng epoch_rng(derive_seed(cfg.seed, "gnn-epoch", {static_cast<std::uint64_t>(epoch)}));
    std::shuffle(idx.begin(), idx.end(), epoch_rng);
    double epoch_max_change = 0.0;

    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[idx[i]]);

      const LossAndGrad lg = loss_and_gradients(model, batch);
      const Eigen::VectorXd grad = lg.grads.flatten();
      ++step;
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      const Eigen::VectorXd delta =
          cfg.step_size * (m1 / c1).array() / ((m2 / c2).array().sqrt() + cfg.adam_eps);
      params -= delta;
      model.assign(params);

      const double change = delta.size() ? delta.cwiseAbs().maxCoeff() : 0.0;
      epoch_max_change = std::max(epoch_max_change, change);
      if (change < cfg.tolerance) {
        result.converged = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.max_param_change = epoch_max_change;
    std::tie(rec.train_loss, rec.train_rmse_m) = split_metrics(train_set);
    std::tie(rec.val_loss, rec.val_rmse_m) = split_metrics(val_set);
    rec.dataset_rmse_m = evaluate(model, dataset, room).rmse_m;
    result.history.push_back(rec);
  }
  result.model = std::move(model);
  return result;
}

EvalResult evaluate(const GnnModel& model, std::span<const StarGraph> dataset, const Room& room) {
  const Normalizer norm = Normalizer::for_room(room);
  EvalResult out;
  out.errors_m.reserve(dataset.size());
  double sq = 0.0;
  for (const StarGraph& g : dataset) {
    if (!g.label) throw ContractError("evaluation graph has no label");
    const double e = (norm.to_meters(forward(model, g)) - norm.to_meters(*g.label)).norm();
    out.errors_m.push_back(e);
    sq += e * e;
  }
  out.rmse_m = dataset.empty() ? 0.0 : std::sqrt(sq / static_cast<double>(dataset.size()));
  return out;
}

void save_model(std::ostream& os, const GnnModel& model, const Room& room) {
  nlohmann::json header = {
      {"format", kFormatName},
      {"version", kFormatVersion},
      {"widths", widths_json(model.widths())},
      {"aggregation", model.aggregation == Aggregation::kMean ? "mean" : "sum"},
      {"room", {{"width", room.width}, {"depth", room.depth}, {"height", room.height}}},
      {"parameter_count", model.parameter_count()},
  };
  os << header.dump() << '\n';
  const Eigen::VectorXd params = model.flatten();
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(params(i));
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
    os.write(bytes, 8);
  }
  if (!os) throw IoError("failed writing model parameters");
}

void save_model(const std::string& path, const GnnModel& model, const Room& room) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  save_model(os, model, room);
}

LoadedModel load_model(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("model file is empty");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model header is not valid JSON: ") + e.what());
  }
  if (header.value("format", "") != kFormatName) throw IoError("not a GNN model file");
  if (header.value("version", 0) != kFormatVersion) {
    throw IoError("unsupported model format version " + header.value("version", nlohmann::json()).dump());
  }
  Widths w;
  w.message = header.at("widths").at("message").get<std::vector<int>>();
  w.update = header.at("widths").at("update").get<std::vector<int>>();
  w.readout = header.at("widths").at("readout").get<std::vector<int>>();
  const std::string agg = header.value("aggregation", "mean");
  if (agg != "mean" && agg != "sum") throw IoError("unknown aggregation '" + agg + "'");

  LoadedModel out;
  out.model = GnnModel::zeros(w, agg == "mean" ? Aggregation::kMean : Aggregation::kSum);
  out.room.width = header.at("room").at("width").get<double>();
  out.room.depth = header.at("room").at("depth").get<double>();
  out.room.height = header.at("room").at("height").get<double>();

  const auto n = static_cast<Eigen::Index>(out.model.parameter_count());
  if (header.value("parameter_count", std::size_t{0}) != static_cast<std::size_t>(n)) {
    throw IoError("parameter count in header disagrees with the widths");
  }
  Eigen::VectorXd params(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    unsigned char bytes[8];
    if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("model file truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    params(i) = std::bit_cast<double>(bits);
  }
  out.model.assign(params);
  return out;
}

LoadedModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model '" + path + "'");
  return load_model(is);
}

void write_dataset_csv(std::ostream& os, std::span<const Sample> samples) {
  os << "sample_id,L,x_l,y_l,range_l...,label_x,label_y\n";
  for (const Sample& s : samples) {
    os << s.sample_id << ',' << s.anchors.size();
    for (const AnchorRange& a : s.anchors) {
      os << ',' << csv::format_double(a.x) << ',' << csv::format_double(a.y) << ',' << csv::format_double(a.range);
    }
    os << ',' << csv::format_double(s.label.x()) << ',' << csv::format_double(s.label.y()) << '\n';
  }
}

std::vector<Sample> read_dataset_csv(std::istream& is) {
  std::vector<Sample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line_no == 1) continue;
    const std::vector<std::string> f = csv::split(line);
    if (f.size() < 2) throw IoError("dataset line " + std::to_string(line_no) + ": too few fields");
    Sample s;
    s.sample_id = csv::parse_int(f[0]);
    const int L = csv::parse_int(f[1]);
    if (L < 0 || f.size() != static_cast<std::size_t>(2 + 3 * L + 2)) {
      throw IoError("dataset line " + std::to_string(line_no) + ": field count does not match L");
    }
    for (int l = 0; l < L; ++l) {
      const std::size_t base = 2 + 3 * static_cast<std::size_t>(l);
      s.anchors.push_back({csv::parse_double(f[base]), csv::parse_double(f[base + 1]), csv::parse_double(f[base + 2])});
    }
    s.label = {csv::parse_double(f[f.size() - 2]), csv::parse_double(f[f.size() - 1])};
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<StarGraph> to_graphs(std::span<const Sample> samples, const Room& room) {
  std::vector<StarGraph> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(build_star_graph(s.anchors, room, s.label));
  return out;
}

}  // namespace voi_twin::gnn
