#include "sjreuse/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "json_util.hpp"
#include "sjreuse/error.hpp"
#include "sjreuse/random.hpp"

namespace sjreuse {

namespace {

constexpr std::string_view kCheckpointFormat = "sjreuse.siamese.v1";
constexpr std::size_t kLayers = 12;
constexpr std::size_t kFusionIn = 36;

struct Branch {
  std::size_t first_layer;
  std::size_t input_offset;
  std::size_t input_dim;
  std::size_t concat_offset;
};

// count, area, centroid, bbox, compactness
constexpr std::array<Branch, 5> kBranches = {{
    {0, 0, 1, 0},
    {2, 1, 1, 4},
    {4, 2, 2, 8},
    {6, 4, 4, 16},
    {8, 8, 1, 32},
}};
constexpr std::size_t kFusionLayer = 10;

std::vector<LayerShape> make_layout() {
  const std::array<std::tuple<std::string_view, std::size_t, std::size_t>, kLayers> dims = {{
      {"count.0", 1, 8},     {"count.1", 8, 4},   {"area.0", 1, 8},    {"area.1", 8, 4},
      {"centroid.0", 2, 16}, {"centroid.1", 16, 8}, {"bbox.0", 4, 32}, {"bbox.1", 32, 16},
      {"compactness.0", 1, 8}, {"compactness.1", 8, 4}, {"fusion.0", kFusionIn, 16},
      {"fusion.1", 16, kFeatureDim},
  }};
  std::vector<LayerShape> layout;
  std::size_t offset = 0;
  for (const auto& [name, in, out] : dims) {
    LayerShape s{name, in, out, offset, offset + in * out};
    offset = s.bias_offset + out;
    layout.push_back(s);
  }
  return layout;
}

/// Inputs and pre-activations of every layer for one forward pass.
struct Trace {
  std::array<std::vector<double>, kLayers> input;
  std::array<std::vector<double>, kLayers> pre;
  Features out{};
};

void dense_relu(std::span<const double> params, const LayerShape& s, Trace& t, std::size_t layer,
                std::span<const double> in, std::span<double> act) {
  t.input[layer].assign(in.begin(), in.end());
  auto& pre = t.pre[layer];
  pre.resize(s.out);
  for (std::size_t o = 0; o < s.out; ++o) {
    double z = params[s.bias_offset + o];
    const double* w = params.data() + s.weight_offset + o * s.in;
    for (std::size_t i = 0; i < s.in; ++i) z += w[i] * in[i];
    pre[o] = z;
    act[o] = z > 0.0 ? z : 0.0;
  }
}

void run_forward(std::span<const double> params, const DatasetEmbedding& e, Trace& t) {
  const auto& layout = SiameseModel::layout();
  std::array<double, kFusionIn> concat{};
  std::array<double, 32> hidden{};
  for (const Branch& b : kBranches) {
    const LayerShape& l0 = layout[b.first_layer];
    const LayerShape& l1 = layout[b.first_layer + 1];
    dense_relu(params, l0, t, b.first_layer, std::span(e.v).subspan(b.input_offset, b.input_dim),
               std::span(hidden).first(l0.out));
    dense_relu(params, l1, t, b.first_layer + 1, std::span(hidden).first(l0.out),
               std::span(concat).subspan(b.concat_offset, l1.out));
  }
  std::array<double, 16> fused{};
  dense_relu(params, layout[kFusionLayer], t, kFusionLayer, concat, fused);
  dense_relu(params, layout[kFusionLayer + 1], t, kFusionLayer + 1, fused, t.out);
}

/// Backpropagates dL/d(layer output) through one ReLU layer; accumulates
/// parameter gradients and returns dL/d(layer input).
std::vector<double> dense_relu_backward(std::span<const double> params, const LayerShape& s,
                                        const Trace& t, std::size_t layer,
                                        std::span<const double> grad_out,
                                        std::span<double> grad) {
  std::vector<double> grad_in(s.in, 0.0);
  const auto& in = t.input[layer];
  const auto& pre = t.pre[layer];
  for (std::size_t o = 0; o < s.out; ++o) {
    if (!(pre[o] > 0.0)) continue;
    const double g = grad_out[o];
    if (g == 0.0) continue;
    grad[s.bias_offset + o] += g;
    const std::size_t row = s.weight_offset + o * s.in;
    for (std::size_t i = 0; i < s.in; ++i) {
      grad[row + i] += g * in[i];
      grad_in[i] += g * params[row + i];
    }
  }
  return grad_in;
}

void run_backward(std::span<const double> params, const Trace& t, std::span<const double> grad_out,
                  std::span<double> grad) {
  const auto& layout = SiameseModel::layout();
  const auto g_fused = dense_relu_backward(params, layout[kFusionLayer + 1], t, kFusionLayer + 1,
                                           grad_out, grad);
  const auto g_concat =
      dense_relu_backward(params, layout[kFusionLayer], t, kFusionLayer, g_fused, grad);
  for (const Branch& b : kBranches) {
    const LayerShape& l1 = layout[b.first_layer + 1];
    const auto g_hidden = dense_relu_backward(
        params, l1, t, b.first_layer + 1,
        std::span(g_concat).subspan(b.concat_offset, l1.out), grad);
    dense_relu_backward(params, layout[b.first_layer], t, b.first_layer, g_hidden, grad);
  }
}

void check_target(double target) {
  if (!(target >= 0.0 && target <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "target divergence outside [0, 1]");
  }
}

class Adam {
 public:
  Adam(std::size_t n, double lr, double weight_decay, const TrainConfig& cfg)
      : m_(n, 0.0), v_(n, 0.0), lr_(lr), wd_(weight_decay), cfg_(cfg) {}

  void step(std::span<double> params, std::span<double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grad[i] + wd_ * params[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
    }
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double lr_;
  double wd_;
  const TrainConfig& cfg_;
  int t_ = 0;
};

std::vector<TrainPair> gather(std::span<const TrainPair> pairs,
                              std::span<const std::size_t> idx) {
  std::vector<TrainPair> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(pairs[i]);
  return out;
}

}  // namespace

const std::vector<LayerShape>& SiameseModel::layout() {
  static const std::vector<LayerShape> layout = make_layout();
  return layout;
}

std::size_t SiameseModel::parameter_count() {
  const LayerShape& last = layout().back();
  return last.bias_offset + last.out;
}

SiameseModel SiameseModel::initialize(std::uint64_t seed, double coord_scale) {
  SiameseModel m = zeros(coord_scale);
  Rng rng(seed);
  for (const LayerShape& s : layout()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
    for (std::size_t k = 0; k < s.in * s.out; ++k) {
      m.params_[s.weight_offset + k] = rng.uniform(-limit, limit);
    }
  }
  return m;
}

SiameseModel SiameseModel::zeros(double coord_scale) {
  SiameseModel m;
  m.params_.assign(parameter_count(), 0.0);
  m.coord_scale_ = coord_scale;
  return m;
}

Features SiameseModel::forward(const DatasetEmbedding& e) const {
  Trace t;
  run_forward(params_, e, t);
  return t.out;
}

double feature_distance(const Features& a, const Features& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < kFeatureDim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

double predict_distance(const SiameseModel& m, const DatasetEmbedding& a,
                        const DatasetEmbedding& b) {
  return clamp_distance(feature_distance(m.forward(a), m.forward(b)));
}

double pair_loss(const SiameseModel& m, const DatasetEmbedding& a, const DatasetEmbedding& b,
                 double target) {
  const double diff = predict_distance(m, a, b) - target;
  return diff * diff;
}

double pair_loss_gradient(const SiameseModel& m, const DatasetEmbedding& a,
                          const DatasetEmbedding& b, double target, std::span<double> grad,
                          double scale) {
  Trace ta;
  Trace tb;
  run_forward(m.params(), a, ta);
  run_forward(m.params(), b, tb);
  const double d = feature_distance(ta.out, tb.out);
  const double pred = clamp_distance(d);
  const double loss = (pred - target) * (pred - target);
  if (d == 0.0) return loss;  // identical features: no defined direction

  // dL/dd = 2 (pred - target) / (1 + d)^2, dd/df_a = (f_a - f_b) / d
  const double dl_dd = 2.0 * (pred - target) / ((1.0 + d) * (1.0 + d));
  Features ga{};
  Features gb{};
  for (std::size_t k = 0; k < kFeatureDim; ++k) {
    ga[k] = scale * dl_dd * (ta.out[k] - tb.out[k]) / d;
    gb[k] = -ga[k];
  }
  run_backward(m.params(), ta, ga, grad);
  run_backward(m.params(), tb, gb, grad);
  return loss;
}

double mean_loss(const SiameseModel& m, std::span<const TrainPair> pairs) {
  if (pairs.empty()) return 0.0;
  double s = 0.0;
  for (const TrainPair& p : pairs) s += pair_loss(m, p.a, p.b, p.target);
  return s / static_cast<double>(pairs.size());
}

namespace {

/// Output units that fire on at least one training embedding.
std::size_t live_outputs(const SiameseModel& m, std::span<const TrainPair> pairs) {
  std::array<bool, kFeatureDim> live{};
  for (const TrainPair& p : pairs) {
    for (const DatasetEmbedding* e : {&p.a, &p.b}) {
      const Features f = m.forward(*e);
      for (std::size_t k = 0; k < kFeatureDim; ++k) live[k] = live[k] || f[k] > 0.0;
    }
  }
  return static_cast<std::size_t>(std::count(live.begin(), live.end(), true));
}

/// With the ReLU on the output layer, a draw whose outputs are all zero on
/// the data maps every dataset to one point and never receives a gradient.
/// Redraw until every output unit fires somewhere, keeping the liveliest.
SiameseModel initialize_live(std::span<const TrainPair> pairs, const TrainConfig& cfg) {
  SiameseModel best = SiameseModel::initialize(cfg.seed, cfg.coord_scale);
  std::size_t best_live = live_outputs(best, pairs);
  for (std::uint64_t attempt = 1; attempt <= 64 && best_live < kFeatureDim; ++attempt) {
    SiameseModel m = SiameseModel::initialize(derive_seed(cfg.seed, 100 + attempt), cfg.coord_scale);
    const std::size_t live = live_outputs(m, pairs);
    if (live > best_live) {
      best = std::move(m);
      best_live = live;
    }
  }
  return best;
}

}  // namespace

SiameseModel fit(std::span<const TrainPair> pairs, double lr, double weight_decay,
                 const TrainConfig& cfg, std::vector<EpochRecord>* epochs, int* best_epoch) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "no training pairs");
  if (cfg.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be > 0");
  for (const TrainPair& p : pairs) check_target(p.target);

  Rng rng(derive_seed(cfg.seed, 1));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));
  const auto n_val = static_cast<std::size_t>(
      std::floor(static_cast<double>(pairs.size()) * cfg.validation_fraction));
  const std::vector<TrainPair> train_set =
      gather(pairs, std::span(order).first(order.size() - n_val));
  const std::vector<TrainPair> val_set = gather(pairs, std::span(order).last(n_val));

  SiameseModel model = initialize_live(pairs, cfg);
  SiameseModel best = model;
  double best_score = mean_loss(model, val_set.empty() ? train_set : val_set);
  int best_at = 0;
  int stale = 0;
  Adam adam(model.params().size(), lr, weight_decay, cfg);
  std::vector<double> grad(model.params().size());
  std::vector<std::size_t> batch_order(train_set.size());
  std::iota(batch_order.begin(), batch_order.end(), std::size_t{0});
  std::size_t batch_index = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span(batch_order));
    for (std::size_t start = 0; start < batch_order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, batch_order.size());
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const TrainPair& p = train_set[batch_order[k]];
        batch_loss += pair_loss_gradient(model, p.a, p.b, p.target, grad, scale);
      }
      batch_loss *= scale;
      const bool finite = std::isfinite(batch_loss) &&
                          std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); });
      if (!finite) {
        throw Error(ErrorCode::kNonFiniteLoss,
                    "non-finite loss at batch " + std::to_string(batch_index));
      }
      adam.step(model.params(), grad);
      ++batch_index;
    }
    const double train_mse = mean_loss(model, train_set);
    const double val_mse = val_set.empty() ? train_mse : mean_loss(model, val_set);
    if (epochs != nullptr) epochs->push_back({epoch, train_mse, val_mse});
    if (val_mse < best_score) {
      best_score = val_mse;
      best = model;
      best_at = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (best_epoch != nullptr) *best_epoch = best_at;
  return best;
}

TrainResult train(std::span<const TrainPair> pairs, const TrainConfig& cfg) {
  if (pairs.empty()) throw Error(ErrorCode::kInvalidArgument, "no training pairs");
  if (cfg.lr_grid.empty() || cfg.weight_decay_grid.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "empty hyperparameter grid");
  }
  for (const TrainPair& p : pairs) check_target(p.target);

  TrainReport report;
  report.pairs = pairs.size();
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(cfg.folds, 1)),
                                                1, pairs.size());
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng fold_rng(derive_seed(cfg.seed, 2));
  fold_rng.shuffle(std::span(order));

  double best_mse = 0.0;
  bool have_best = false;
  for (double lr : cfg.lr_grid) {
    for (double wd : cfg.weight_decay_grid) {
      double sum = 0.0;
      std::size_t used = 0;
      for (std::size_t fold = 0; fold < k && k > 1; ++fold) {
        std::vector<std::size_t> tr;
        std::vector<std::size_t> va;
        for (std::size_t i = 0; i < order.size(); ++i) {
          (i % k == fold ? va : tr).push_back(order[i]);
        }
        const auto train_part = gather(pairs, tr);
        const auto val_part = gather(pairs, va);
        const SiameseModel m = fit(train_part, lr, wd, cfg);
        sum += mean_loss(m, val_part);
        ++used;
      }
      const double mean = used > 0 ? sum / static_cast<double>(used) : 0.0;
      report.grid.push_back({lr, wd, mean});
      if (!have_best || mean < best_mse) {
        best_mse = mean;
        report.lr = lr;
        report.weight_decay = wd;
        have_best = true;
      }
    }
  }

  TrainResult result{SiameseModel::zeros(cfg.coord_scale), {}};
  result.model = fit(pairs, report.lr, report.weight_decay, cfg, &report.epochs,
                     &report.best_epoch);
  report.train_mse = mean_loss(result.model, pairs);
  report.val_mse = report.best_epoch > 0 && report.best_epoch <= static_cast<int>(report.epochs.size())
                       ? report.epochs[static_cast<std::size_t>(report.best_epoch - 1)].val_mse
                       : report.train_mse;
  result.report = std::move(report);
  return result;
}

nlohmann::ordered_json model_to_json(const SiameseModel& m) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["feature_order"] = std::vector<std::string>(kFeatureOrder.begin(), kFeatureOrder.end());
  j["coord_scale"] = m.coord_scale();
  auto layers = nlohmann::ordered_json::array();
  const auto params = m.params();
  for (const LayerShape& s : SiameseModel::layout()) {
    nlohmann::ordered_json l;
    l["name"] = s.name;
    l["in"] = s.in;
    l["out"] = s.out;
    l["weights"] = std::vector<double>(params.begin() + static_cast<std::ptrdiff_t>(s.weight_offset),
                                       params.begin() + static_cast<std::ptrdiff_t>(s.bias_offset));
    l["bias"] = std::vector<double>(
        params.begin() + static_cast<std::ptrdiff_t>(s.bias_offset),
        params.begin() + static_cast<std::ptrdiff_t>(s.bias_offset + s.out));
    layers.push_back(std::move(l));
  }
  j["layers"] = std::move(layers);
  return j;
}

SiameseModel model_from_json(const nlohmann::json& j) {
  if (json_util::get<std::string>(j, "format") != kCheckpointFormat) {
    throw Error(ErrorCode::kFormat, "unknown checkpoint format");
  }
  const auto order = json_util::get<std::vector<std::string>>(j, "feature_order");
  if (!std::equal(order.begin(), order.end(), kFeatureOrder.begin(), kFeatureOrder.end())) {
    throw Error(ErrorCode::kShapeMismatch, "checkpoint feature order differs");
  }
  SiameseModel m = SiameseModel::zeros(json_util::get<double>(j, "coord_scale"));
  if (!(m.coord_scale() > 0.0)) throw Error(ErrorCode::kFormat, "coord_scale must be > 0");
  const auto& layers = json_util::field(j, "layers");
  const auto& layout = SiameseModel::layout();
  if (!layers.is_array() || layers.size() != layout.size()) {
    throw Error(ErrorCode::kShapeMismatch, "checkpoint has a different layer count");
  }
  auto params = m.params();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const LayerShape& s = layout[i];
    const auto& l = layers[i];
    const auto name = json_util::get<std::string>(l, "name");
    const auto in = json_util::get<std::size_t>(l, "in");
    const auto out = json_util::get<std::size_t>(l, "out");
    const auto w = json_util::get<std::vector<double>>(l, "weights");
    const auto b = json_util::get<std::vector<double>>(l, "bias");
    if (name != s.name || in != s.in || out != s.out || w.size() != s.in * s.out ||
        b.size() != s.out) {
      throw Error(ErrorCode::kShapeMismatch,
                  "layer " + std::string(s.name) + " expects " + std::to_string(s.in) + "x" +
                      std::to_string(s.out) + ", checkpoint has " + name + " " +
                      std::to_string(in) + "x" + std::to_string(out));
    }
    std::copy(w.begin(), w.end(), params.begin() + static_cast<std::ptrdiff_t>(s.weight_offset));
    std::copy(b.begin(), b.end(), params.begin() + static_cast<std::ptrdiff_t>(s.bias_offset));
  }
  return m;
}

void save_model(const SiameseModel& m, const std::filesystem::path& file) {
  json_util::write_atomic(file, model_to_json(m).dump(1) + "\n");
}

SiameseModel load_model(const std::filesystem::path& file) {
  return model_from_json(json_util::parse_file(file));
}

nlohmann::ordered_json report_to_json(const TrainReport& r) {
  nlohmann::ordered_json j;
  j["lr"] = r.lr;
  j["weight_decay"] = r.weight_decay;
  j["pairs"] = r.pairs;
  j["best_epoch"] = r.best_epoch;
  j["train_mse"] = r.train_mse;
  j["val_mse"] = r.val_mse;
  auto grid = nlohmann::ordered_json::array();
  for (const GridPoint& g : r.grid) {
    grid.push_back({{"lr", g.lr}, {"weight_decay", g.weight_decay}, {"mean_val_mse", g.mean_val_mse}});
  }
  j["grid"] = std::move(grid);
  auto epochs = nlohmann::ordered_json::array();
  for (const EpochRecord& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_mse", e.train_mse}, {"val_mse", e.val_mse}});
  }
  j["epochs"] = std::move(epochs);
  return j;
}

}  // namespace sjreuse
