#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sjreuse/embedding.hpp"

namespace sjreuse {

inline constexpr std::size_t kFeatureDim = 8;
using Features = std::array<double, kFeatureDim>;

/// Shape and location of one affine layer inside the flat parameter vector.
/// Weights are row-major (out x in) followed by the bias.
struct LayerShape {
  std::string_view name;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

/// Twin-branch network. Five feature groups go through their own two-layer
/// ReLU MLPs (count 1-8-4, area 1-8-4, centroid 2-16-8, bbox 4-32-16,
/// compactness 1-8-4); the 36 concatenated outputs pass a 36-16-8 ReLU
/// fusion MLP. Both twins evaluate this one parameter set.
class SiameseModel {
 public:
  static const std::vector<LayerShape>& layout();
  static std::size_t parameter_count();

  /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
  static SiameseModel initialize(std::uint64_t seed, double coord_scale = kDefaultCoordScale);
  static SiameseModel zeros(double coord_scale = kDefaultCoordScale);

  Features forward(const DatasetEmbedding& e) const;

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  double coord_scale() const { return coord_scale_; }
  void set_coord_scale(double s) { coord_scale_ = s; }

  friend bool operator==(const SiameseModel&, const SiameseModel&) = default;

 private:
  std::vector<double> params_;
  double coord_scale_ = kDefaultCoordScale;
};

/// d / (1 + d).
inline double clamp_distance(double d) { return d / (1.0 + d); }

double feature_distance(const Features& a, const Features& b);

/// Clamped feature-space distance in [0, 1).
double predict_distance(const SiameseModel& m, const DatasetEmbedding& a,
                        const DatasetEmbedding& b);

/// Squared error between the predicted distance and the target divergence.
double pair_loss(const SiameseModel& m, const DatasetEmbedding& a, const DatasetEmbedding& b,
                 double target);

/// Loss of one pair; adds scale * dloss/dparam into `grad`. Pairs whose
/// features coincide contribute no gradient.
double pair_loss_gradient(const SiameseModel& m, const DatasetEmbedding& a,
                          const DatasetEmbedding& b, double target, std::span<double> grad,
                          double scale = 1.0);

struct TrainPair {
  DatasetEmbedding a;
  DatasetEmbedding b;
  double target = 0.0;
};

struct TrainConfig {
  std::vector<double> lr_grid{0.0001, 0.0003, 0.001, 0.003, 0.01};
  std::vector<double> weight_decay_grid{0.0, 0.0001};
  std::size_t batch_size = 24;
  int max_epochs = 50;
  int patience = 10;
  int folds = 5;
  double validation_fraction = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  double coord_scale = kDefaultCoordScale;
};

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct GridPoint {
  double lr = 0.0;
  double weight_decay = 0.0;
  double mean_val_mse = 0.0;
};

struct TrainReport {
  double lr = 0.0;
  double weight_decay = 0.0;
  std::vector<GridPoint> grid;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double train_mse = 0.0;  // over every pair, with the restored best weights
  double val_mse = 0.0;    // early-stopping slice
  std::size_t pairs = 0;
};

struct TrainResult {
  SiameseModel model;
  TrainReport report;
};

double mean_loss(const SiameseModel& m, std::span<const TrainPair> pairs);

/// Adam with L2 weight decay on the gradient, minibatches over a seeded
/// shuffle, early stopping on the last validation_fraction of a seeded
/// permutation (the training MSE is monitored when that slice is empty).
/// Initial draws whose output layer is silent on every training embedding
/// are redrawn from derived seeds.
SiameseModel fit(std::span<const TrainPair> pairs, double lr, double weight_decay,
                 const TrainConfig& cfg, std::vector<EpochRecord>* epochs = nullptr,
                 int* best_epoch = nullptr);

/// k-fold grid search over (lr, weight_decay), then a final fit on all pairs.
TrainResult train(std::span<const TrainPair> pairs, const TrainConfig& cfg);

nlohmann::ordered_json model_to_json(const SiameseModel& m);
SiameseModel model_from_json(const nlohmann::json& j);
void save_model(const SiameseModel& m, const std::filesystem::path& file);
SiameseModel load_model(const std::filesystem::path& file);

nlohmann::ordered_json report_to_json(const TrainReport& r);

}  // namespace sjreuse
