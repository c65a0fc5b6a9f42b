#include "sjreuse/forest.hpp"

#include <algorithm>
#include <utility>

#include "json_util.hpp"
#include "sjreuse/error.hpp"
#include "sjreuse/log.hpp"
#include "sjreuse/random.hpp"

namespace sjreuse {

namespace {

using Labelled = std::pair<double, int>;

double gini(std::size_t n0, std::size_t n1) {
  const double n = static_cast<double>(n0 + n1);
  if (n == 0.0) return 0.0;
  const double p0 = static_cast<double>(n0) / n;
  const double p1 = static_cast<double>(n1) / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

int majority(std::size_t n0, std::size_t n1) { return n1 > n0 ? 1 : 0; }

/// Grows a subtree over data[lo, hi), which is sorted by sim_max.
int grow(DecisionTree& tree, std::span<const Labelled> data, int depth, int max_depth) {
  std::size_t n1 = 0;
  for (const auto& s : data) n1 += static_cast<std::size_t>(s.second);
  const std::size_t n0 = data.size() - n1;
  const int node = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({0.0, -1, -1, majority(n0, n1)});
  if (n0 == 0 || n1 == 0 || depth >= max_depth || data.size() < 2) return node;

  const double parent = gini(n0, n1);
  const double total = static_cast<double>(data.size());
  double best = parent;
  std::size_t best_split = 0;
  std::size_t left1 = 0;
  for (std::size_t i = 1; i < data.size(); ++i) {
    left1 += static_cast<std::size_t>(data[i - 1].second);
    if (data[i].first == data[i - 1].first) continue;
    const std::size_t left0 = i - left1;
    const std::size_t right1 = n1 - left1;
    const std::size_t right0 = n0 - left0;
    const double w = (static_cast<double>(i) * gini(left0, left1) +
                      static_cast<double>(data.size() - i) * gini(right0, right1)) /
                     total;
    if (w < best - 1e-12) {
      best = w;
      best_split = i;
    }
  }
  if (best_split == 0) return node;

  const double threshold = 0.5 * (data[best_split - 1].first + data[best_split].first);
  const int left = grow(tree, data.first(best_split), depth + 1, max_depth);
  const int right = grow(tree, data.subspan(best_split), depth + 1, max_depth);
  tree.nodes[static_cast<std::size_t>(node)] = {threshold, left, right, -1};
  return node;
}

}  // namespace

const char* decision_name(Decision d) {
  return d == Decision::kReuse ? "reuse" : "repartition";
}

int DecisionTree::predict(double sim_max) const {
  std::size_t n = 0;
  while (nodes[n].leaf_class < 0) {
    n = static_cast<std::size_t>(sim_max <= nodes[n].threshold ? nodes[n].left : nodes[n].right);
  }
  return nodes[n].leaf_class;
}

DecisionForest DecisionForest::fit(std::span<const DecisionSample> samples,
                                   const ForestParams& params) {
  if (params.n_trees < 1 || params.max_depth < 0) {
    throw Error(ErrorCode::kInvalidArgument, "forest needs n_trees >= 1 and max_depth >= 0");
  }
  DecisionForest f;
  f.params_ = params;
  std::size_t n1 = 0;
  for (const auto& s : samples) n1 += s.label == 1 ? 1 : 0;
  const std::size_t n0 = samples.size() - n1;
  if (samples.size() < 2 || n0 == 0 || n1 == 0) {
    log_warning("decision forest trained without both classes; it predicts a constant");
    f.degenerate_ = true;
    const int cls = majority(n0, n1);
    f.trees_.assign(static_cast<std::size_t>(params.n_trees),
                    DecisionTree{{TreeNode{0.0, -1, -1, cls}}});
    return f;
  }

  std::vector<Labelled> boot(samples.size());
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
    for (auto& b : boot) {
      const DecisionSample& s = samples[rng.uniform_index(samples.size())];
      b = {s.sim_max, s.label == 1 ? 1 : 0};
    }
    std::sort(boot.begin(), boot.end());
    DecisionTree tree;
    grow(tree, boot, 0, params.max_depth);
    f.trees_.push_back(std::move(tree));
  }
  return f;
}

DecisionForest DecisionForest::from_trees(std::vector<DecisionTree> trees, ForestParams params) {
  if (trees.empty()) throw Error(ErrorCode::kInvalidArgument, "forest without trees");
  DecisionForest f;
  params.n_trees = static_cast<int>(trees.size());
  f.params_ = params;
  f.trees_ = std::move(trees);
  return f;
}

double DecisionForest::reuse_votes(double sim_max) const {
  std::size_t votes = 0;
  for (const auto& t : trees_) votes += t.predict(sim_max) == 1 ? 1 : 0;
  return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

Decision DecisionForest::predict(double sim_max) const {
  std::size_t votes = 0;
  for (const auto& t : trees_) votes += t.predict(sim_max) == 1 ? 1 : 0;
  return 2 * votes > trees_.size() ? Decision::kReuse : Decision::kRepartition;
}

nlohmann::ordered_json DecisionForest::to_json() const {
  nlohmann::ordered_json j;
  j["n_trees"] = params_.n_trees;
  j["max_depth"] = params_.max_depth;
  j["degenerate"] = degenerate_;
  auto trees = nlohmann::ordered_json::array();
  for (const auto& t : trees_) {
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : t.nodes) {
      nlohmann::ordered_json node;
      if (n.leaf_class >= 0) {
        node["leaf_class"] = n.leaf_class;
      } else {
        node["threshold"] = n.threshold;
        node["left"] = n.left;
        node["right"] = n.right;
      }
      nodes.push_back(std::move(node));
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  j["trees"] = std::move(trees);
  j["seed"] = params_.seed;
  return j;
}

DecisionForest DecisionForest::from_json(const nlohmann::json& j) {
  DecisionForest f;
  f.params_.n_trees = json_util::get<int>(j, "n_trees");
  f.params_.max_depth = json_util::get<int>(j, "max_depth");
  f.params_.seed = json_util::get<std::uint64_t>(j, "seed");
  if (j.contains("degenerate")) f.degenerate_ = j.at("degenerate").get<bool>();
  const auto& trees = json_util::field(j, "trees");
  if (!trees.is_array() || trees.size() != static_cast<std::size_t>(f.params_.n_trees) ||
      trees.empty()) {
    throw Error(ErrorCode::kFormat, "field 'trees' does not hold n_trees entries");
  }
  for (const auto& t : trees) {
    DecisionTree tree;
    const auto& nodes = json_util::field(t, "nodes");
    for (const auto& n : nodes) {
      TreeNode node;
      if (n.contains("leaf_class")) {
        node.leaf_class = json_util::get<int>(n, "leaf_class");
        if (node.leaf_class != 0 && node.leaf_class != 1) {
          throw Error(ErrorCode::kFormat, "field 'leaf_class' must be 0 or 1");
        }
      } else {
        node.threshold = json_util::get<double>(n, "threshold");
        node.left = json_util::get<int>(n, "left");
        node.right = json_util::get<int>(n, "right");
      }
      tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) throw Error(ErrorCode::kFormat, "tree without nodes");
    // Children must point forward so prediction always terminates.
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& n = tree.nodes[i];
      if (n.leaf_class >= 0) continue;
      const auto size = static_cast<int>(tree.nodes.size());
      if (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) || n.left >= size ||
          n.right >= size) {
        throw Error(ErrorCode::kFormat, "tree node has an invalid child index");
      }
    }
    f.trees_.push_back(std::move(tree));
  }
  return f;
}

void DecisionForest::save(const std::filesystem::path& file) const {
  json_util::write_atomic(file, to_json().dump(1) + "\n");
}

DecisionForest DecisionForest::load(const std::filesystem::path& file) {
  return from_json(json_util::parse_file(file));
}

}  // namespace sjreuse
