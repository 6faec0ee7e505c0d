#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voi_twin/sensing.hpp"
#include "voi_twin/types.hpp"
#include "voi_twin/world.hpp"

namespace voi_twin::gnn {

enum class Activation { kRelu, kSigmoid };

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
};

struct Mlp {
  std::vector<DenseLayer> layers;
  Activation output_activation = Activation::kRelu;

  // widths = {in, hidden..., out}; hidden layers are always ReLU.
  static Mlp zeros(const std::vector<int>& widths, Activation output);
  std::vector<int> widths() const;
  std::size_t parameter_count() const;
};

enum class Aggregation { kMean, kSum };

struct Widths {
  std::vector<int> message{3, 16, 64};
  std::vector<int> update{66, 32, 16};
  std::vector<int> readout{18, 8, 2};

  // Smaller network with the same wiring, for finite-difference checks.
  static Widths reduced() { return {{3, 4, 8}, {10, 4, 4}, {6, 4, 2}}; }
  void validate() const;
  bool operator==(const Widths&) const = default;
};

struct GnnModel {
  Mlp message;
  Mlp update;
  Mlp readout;
  Aggregation aggregation = Aggregation::kMean;

  static GnnModel zeros(const Widths& widths = {}, Aggregation agg = Aggregation::kMean);
  // Glorot-uniform weights, zero biases.
  static GnnModel initialized(const Widths& widths, std::uint64_t seed, Aggregation agg = Aggregation::kMean);

  Widths widths() const;
  std::size_t parameter_count() const;
  // Declaration order: message, update, readout; per layer W row-major then b.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::Ref<const Eigen::VectorXd>& params);
};

// Raw anchor position and measured range, meters.
struct AnchorRange {
  double x = 0.0;
  double y = 0.0;
  double range = 0.0;
};

struct StarGraph {
  Eigen::MatrixXd anchor_feats;  // L x 3, normalized [x, y, range]
  Vec2 agv_dummy{0.5, 0.5};
  std::optional<Vec2> label;     // normalized [x, y]

  int anchor_count() const { return static_cast<int>(anchor_feats.rows()); }
  int node_count() const { return anchor_count() + 1; }
  int edge_count() const { return anchor_count(); }
};

struct Normalizer {
  double width = 11.0;
  double depth = 8.5;
  double diagonal = 1.0;

  static Normalizer for_room(const Room& room);
  Vec2 to_unit(const Vec2& p) const { return {p.x() / width, p.y() / depth}; }
  Vec2 to_meters(const Vec2& u) const { return {u.x() * width, u.y() * depth}; }
};

StarGraph build_star_graph(std::span<const AnchorRange> anchors, const Room& room,
                           const std::optional<Vec2>& label_m = std::nullopt);

StarGraph build_star_graph(std::span<const std::pair<SensingAgent, RangeObservation>> selected, const Room& room,
                           const std::optional<Vec2>& label_m = std::nullopt);

Vec2 forward(const GnnModel& model, const StarGraph& g);

struct LossAndGrad {
  double loss = 0.0;
  GnnModel grads;
};

// Mean over the batch of ||label - prediction||^2 in normalized units.
double batch_loss(const GnnModel& model, std::span<const StarGraph> batch);
LossAndGrad loss_and_gradients(const GnnModel& model, std::span<const StarGraph> batch);

struct TrainConfig {
  int batch_size = 32;
  double step_size = 1e-3;
  double tolerance = 1e-6;
  int max_epochs = 500;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_rmse_m = 0.0;
  double val_rmse_m = 0.0;
  double dataset_rmse_m = 0.0;  // whole dataset, train + validation
  double max_param_change = 0.0;
};

struct TrainResult {
  GnnModel model;
  std::vector<EpochRecord> history;
  bool converged = false;  // stopped on the tolerance rather than max_epochs
};

TrainResult train(GnnModel model, std::span<const StarGraph> dataset, const TrainConfig& cfg, const Room& room);

struct EvalResult {
  double rmse_m = 0.0;
  std::vector<double> errors_m;
};

EvalResult evaluate(const GnnModel& model, std::span<const StarGraph> dataset, const Room& room);

// Model file: one JSON header line, then little-endian float64 parameters.
void save_model(std::ostream& os, const GnnModel& model, const Room& room);
void save_model(const std::string& path, const GnnModel& model, const Room& room);

struct LoadedModel {
  GnnModel model;
  Room room;
};

LoadedModel load_model(std::istream& is);
LoadedModel load_model(const std::string& path);

struct Sample {
  int sample_id = 0;
  std::vector<AnchorRange> anchors;
  Vec2 label = Vec2::Zero();  // meters
};

void write_dataset_csv(std::ostream& os, std::span<const Sample> samples);
std::vector<Sample> read_dataset_csv(std::istream& is);

std::vector<StarGraph> to_graphs(std::span<const Sample> samples, const Room& room);

}  // namespace voi_twin::gnn
