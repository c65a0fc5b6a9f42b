#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sjreuse/error.hpp"
#include "sjreuse/random.hpp"
#include "sjreuse/siamese.hpp"
#include "unit/support.hpp"

using namespace sjreuse;

namespace {

DatasetEmbedding random_embedding(Rng& rng) {
  DatasetEmbedding e;
  for (double& v : e.v) v = rng.uniform(-1.0, 2.0);
  return e;
}

// Straight-line re-implementation: parameters are laid out layer by layer as
// row-major weights followed by biases, in the order count, area, centroid,
// bbox, compactness, fusion.
std::vector<double> layer(const double*& p, std::size_t in, std::size_t out,
                          const std::vector<double>& x) {
  std::vector<double> y(out);
  const double* w = p;
  const double* b = p + in * out;
  for (std::size_t o = 0; o < out; ++o) {
    double z = b[o];
    for (std::size_t i = 0; i < in; ++i) z += w[o * in + i] * x[i];
    y[o] = std::max(0.0, z);
  }
  p += in * out + out;
  return y;
}

std::vector<double> oracle_forward(std::span<const double> params, const DatasetEmbedding& e) {
  const double* p = params.data();
  const auto& v = e.v;
  std::vector<double> cat;
  auto branch = [&](std::vector<double> x, std::size_t h, std::size_t o) {
    const auto a = layer(p, x.size(), h, x);
    const auto b = layer(p, h, o, a);
    cat.insert(cat.end(), b.begin(), b.end());
  };
  branch({v[0]}, 8, 4);
  branch({v[1]}, 8, 4);
  branch({v[2], v[3]}, 16, 8);
  branch({v[4], v[5], v[6], v[7]}, 32, 16);
  branch({v[8]}, 8, 4);
  REQUIRE(cat.size() == 36);
  const auto f = layer(p, 36, 16, cat);
  return layer(p, 16, 8, f);
}

SiameseModel perturbed(std::uint64_t seed) {
  SiameseModel m = SiameseModel::initialize(seed);
  Rng rng(seed + 1000);
  for (double& w : m.params()) w += rng.uniform(0.0, 0.05);  // keep units alive
  return m;
}

}  // namespace

TEST_CASE("layout dimensions") {
  const std::size_t expected = (1 * 8 + 8 + 8 * 4 + 4) * 3 + (2 * 16 + 16 + 16 * 8 + 8) +
                               (4 * 32 + 32 + 32 * 16 + 16) + (36 * 16 + 16 + 16 * 8 + 8);
  CHECK(SiameseModel::parameter_count() == expected);
  CHECK(SiameseModel::layout().size() == 12);
  CHECK(SiameseModel::layout()[10].in == 36);
  CHECK(SiameseModel::layout()[11].out == 8);
}

TEST_CASE("forward matches a straight-line oracle") {
  Rng rng(5);
  const DatasetEmbedding z = random_embedding(rng);
  for (double v : SiameseModel::zeros().forward(z)) CHECK(v == 0.0);
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const SiameseModel m = perturbed(s);
    for (int t = 0; t < 20; ++t) {
      const DatasetEmbedding e = random_embedding(rng);
      const Features got = m.forward(e);
      const auto want = oracle_forward(m.params(), e);
      for (std::size_t k = 0; k < 8; ++k) {
        CHECK(got[k] >= 0.0);
        CHECK(std::abs(got[k] - want[k]) <= 1e-9);
      }
    }
  }
  CHECK(SiameseModel::initialize(3).forward(z) == SiameseModel::initialize(3).forward(z));
}

TEST_CASE("predicted distance") {
  Rng rng(8);
  const SiameseModel m = perturbed(2);
  CHECK(clamp_distance(1.0) == 0.5);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_embedding(rng), b = random_embedding(rng), c = random_embedding(rng);
    CHECK(predict_distance(m, a, a) == 0.0);
    const double d = predict_distance(m, a, b);
    CHECK(d == predict_distance(m, b, a));
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
    const auto fa = oracle_forward(m.params(), a), fb = oracle_forward(m.params(), b);
    double s = 0;
    for (std::size_t k = 0; k < 8; ++k) s += (fa[k] - fb[k]) * (fa[k] - fb[k]);
    CHECK(d == doctest::Approx(std::sqrt(s) / (1 + std::sqrt(s))).epsilon(1e-12));
    const Features xa = m.forward(a), xb = m.forward(b), xc = m.forward(c);
    CHECK(feature_distance(xa, xc) <= feature_distance(xa, xb) + feature_distance(xb, xc) + 1e-12);
  }
  const auto e = random_embedding(rng);
  CHECK(pair_loss(SiameseModel::zeros(), e, random_embedding(rng), 0.0154) ==
        doctest::Approx(2.3716e-4).epsilon(1e-10));
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(21);
  const SiameseModel base = perturbed(7);
  for (int t = 0; t < 3; ++t) {
    const auto a = random_embedding(rng), b = random_embedding(rng);
    const double target = rng.uniform(0, 1);
    REQUIRE(predict_distance(base, a, b) > 0.0);
    std::vector<double> grad(SiameseModel::parameter_count(), 0.0);
    pair_loss_gradient(base, a, b, target, grad);
    SiameseModel m = base;
    const double h = 1e-5;
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double w = m.params()[i];
      m.params()[i] = w + h;
      const double up = pair_loss(m, a, b, target);
      m.params()[i] = w - h;
      const double down = pair_loss(m, a, b, target);
      m.params()[i] = w;
      const double fd = (up - down) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
      CHECK(std::abs(fd - grad[i]) / scale <= 1e-4);
      nonzero += grad[i] != 0.0 ? 1 : 0;
    }
    CHECK(nonzero > grad.size() / 4);
  }
  // Identical embeddings contribute nothing.
  const auto e = random_embedding(rng);
  std::vector<double> grad(SiameseModel::parameter_count(), 0.0);
  CHECK(pair_loss_gradient(base, e, e, 0.0, grad) == 0.0);
  CHECK(std::all_of(grad.begin(), grad.end(), [](double g) { return g == 0.0; }));
}

TEST_CASE("checkpoint round trip and shape checks") {
  const SiameseModel m = perturbed(4);
  const auto dir = testing::scratch("siamese");
  save_model(m, dir / "m.json");
  const SiameseModel back = load_model(dir / "m.json");
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_embedding(rng), b = random_embedding(rng);
    CHECK(std::abs(predict_distance(m, a, b) - predict_distance(back, a, b)) <= 1e-12);
  }

  auto j = nlohmann::json::parse(testing::read_text(dir / "m.json"));
  j["layers"][10]["in"] = 35;
  j["layers"][10]["weights"] = std::vector<double>(35 * 16, 0.0);
  try {
    model_from_json(j);
    FAIL("expected a shape mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
  }

  auto k = nlohmann::json::parse(testing::read_text(dir / "m.json"));
  k["coord_scale"] = 1000.0;
  CHECK(model_from_json(k).coord_scale() == 1000.0);
}

TEST_CASE("training") {
  TrainConfig cfg;
  cfg.lr_grid = {0.003, 0.01};
  cfg.weight_decay_grid = {0.0};
  cfg.folds = 3;
  cfg.seed = 11;

  Rng rng(3);
  std::vector<TrainPair> self;
  for (int i = 0; i < 12; ++i) {
    const auto e = random_embedding(rng);
    self.push_back({e, e, 0.0});
  }
  CHECK(train(self, cfg).report.train_mse <= 1e-6);

  // Two separated clusters: targets 0 within and 0.9 across.
  std::vector<DatasetEmbedding> ea, eb;
  for (int i = 0; i < 8; ++i) {
    DatasetEmbedding a, b;
    for (std::size_t k = 0; k < 9; ++k) {
      a.v[k] = 0.2 + rng.uniform(-0.05, 0.05);
      b.v[k] = 1.5 + rng.uniform(-0.05, 0.05);
    }
    ea.push_back(a);
    eb.push_back(b);
  }
  std::vector<TrainPair> pairs;
  for (int i = 0; i < 8; ++i) {
    for (int j = i + 1; j < 8; ++j) {
      pairs.push_back({ea[i], ea[j], 0.0});
      pairs.push_back({eb[i], eb[j], 0.0});
    }
    for (int j = 0; j < 8; ++j) pairs.push_back({ea[i], eb[j], 0.9});
  }
  const TrainResult r = train(pairs, cfg);
  CHECK(r.report.grid.size() == 2);
  CHECK(std::isfinite(r.report.train_mse));
  CHECK(r.report.train_mse < mean_loss(SiameseModel::initialize(cfg.seed), pairs));
  double within = 0, across = 0;
  int nw = 0, na = 0;
  for (const auto& p : pairs) {
    const double d = predict_distance(r.model, p.a, p.b);
    (p.target == 0.0 ? within : across) += d;
    (p.target == 0.0 ? nw : na) += 1;
  }
  CHECK(within / nw < across / na);

  CHECK(train(pairs, cfg).model == r.model);
  CHECK_THROWS_AS(train(std::vector<TrainPair>{}, cfg), Error);
}
