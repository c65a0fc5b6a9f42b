#include <doctest.h>

#include <cmath>

#include "sjreuse/forest.hpp"
#include "sjreuse/random.hpp"
#include "unit/support.hpp"

using namespace sjreuse;

namespace {

DecisionTree constant_tree(int cls) {
  DecisionTree t;
  t.nodes.push_back({0.0, -1, -1, cls});
  return t;
}

}  // namespace

TEST_CASE("label rule") {
  CHECK(DecisionSample::make(0.9, 1.0, 2.0).label == 1);
  CHECK(DecisionSample::make(0.9, 2.0, 2.0).label == 0);
  CHECK(DecisionSample::make(0.9, 3.0, 2.0).label == 0);
  const auto f = DecisionSample::failed_reuse(0.5, 1.0);
  CHECK(f.label == 0);
  CHECK(std::isinf(f.t1));
}

TEST_CASE("separable samples") {
  Rng rng(9);
  std::vector<DecisionSample> s;
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0, 1);
    s.push_back({x, 0, 0, x > 0.7 ? 1 : 0});
  }
  const auto f = DecisionForest::fit(s, {100, 5, 3});
  CHECK(f.trees().size() == 100);
  CHECK_FALSE(f.degenerate());
  int correct = 0;
  for (const auto& x : s) correct += (f.predict(x.sim_max) == Decision::kReuse) == (x.label == 1);
  CHECK(correct >= 190);
  CHECK(f.predict(1.0) == Decision::kReuse);
  CHECK(f.predict(0.0) == Decision::kRepartition);
  // Votes rise with similarity on a monotone task.
  double prev = -1;
  for (double x = 0; x <= 1.0; x += 0.01) {
    const double v = f.reuse_votes(x);
    CHECK(v >= prev - 0.05);
    prev = std::max(prev, v);
  }
  for (const auto& t : f.trees()) {
    // Depth bound: walk every node depth.
    std::vector<int> depth(t.nodes.size(), 0);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      if (t.nodes[i].leaf_class < 0) {
        depth[static_cast<std::size_t>(t.nodes[i].left)] = depth[i] + 1;
        depth[static_cast<std::size_t>(t.nodes[i].right)] = depth[i] + 1;
      }
      CHECK(depth[i] <= 5);
    }
  }
  CHECK(DecisionForest::fit(s, {100, 5, 3}) == f);
  CHECK_FALSE(DecisionForest::fit(s, {100, 5, 4}) == f);
}

TEST_CASE("tie and degenerate forests") {
  std::vector<DecisionTree> trees;
  for (int i = 0; i < 50; ++i) trees.push_back(constant_tree(1));
  for (int i = 0; i < 50; ++i) trees.push_back(constant_tree(0));
  const auto tie = DecisionForest::from_trees(trees, {100, 5, 0});
  CHECK(tie.reuse_votes(0.5) == 0.5);
  CHECK(tie.predict(0.5) == Decision::kRepartition);

  std::vector<DecisionSample> ones{{0.1, 0, 1, 1}, {0.5, 0, 1, 1}, {0.9, 0, 1, 1}};
  const auto c = DecisionForest::fit(ones, {10, 5, 1});
  CHECK(c.degenerate());
  CHECK(c.predict(0.0) == Decision::kReuse);
  const auto single = DecisionForest::fit(std::vector<DecisionSample>{{0.3, 1, 0, 0}}, {10, 5, 1});
  CHECK(single.degenerate());
  CHECK(single.predict(1.0) == Decision::kRepartition);
}

TEST_CASE("forest round trip") {
  Rng rng(2);
  std::vector<DecisionSample> s;
  for (int i = 0; i < 60; ++i) {
    const double x = rng.uniform(0, 1);
    s.push_back({x, 0, 0, rng.uniform(0, 1) < x ? 1 : 0});
  }
  const auto f = DecisionForest::fit(s, {20, 4, 5});
  const auto dir = testing::scratch("forest");
  f.save(dir / "f.json");
  const auto back = DecisionForest::load(dir / "f.json");
  CHECK(back == f);
  for (double x = 0; x <= 1.0; x += 0.05) CHECK(back.reuse_votes(x) == f.reuse_votes(x));
  CHECK(decision_name(Decision::kReuse) != std::string(decision_name(Decision::kRepartition)));
}
