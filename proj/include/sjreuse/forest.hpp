#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include <json.hpp>

namespace sjreuse {

/// One labelled observation of a training join: cost of running it on the
/// best-matching stored partitioner (t1) versus a fresh one (t2).
struct DecisionSample {
  double sim_max = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;
  int label = 0;

  /// Label rule: 1 iff reuse was strictly cheaper.
  static DecisionSample make(double sim_max, double t1, double t2) {
    return {sim_max, t1, t2, t1 < t2 ? 1 : 0};
  }
  /// A reuse attempt that failed outright.
  static DecisionSample failed_reuse(double sim_max, double t2) {
    return {sim_max, std::numeric_limits<double>::infinity(), t2, 0};
  }
};

enum class Decision { kRepartition = 0, kReuse = 1 };

const char* decision_name(Decision d);

struct TreeNode {
  double threshold = 0.0;  // go left when sim_max <= threshold
  int left = -1;
  int right = -1;
  int leaf_class = -1;  // 0/1 on leaves, -1 on split nodes
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int predict(double sim_max) const;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 5;
  std::uint64_t seed = 0;
};

/// Bagged Gini trees over the single feature sim_max.
class DecisionForest {
 public:
  /// Each tree sees a bootstrap resample of |samples| draws. Splits sit on
  /// midpoints between sorted distinct values. With fewer than two samples
  /// or a single class, every tree is the constant majority leaf and
  /// degenerate() reports it.
  static DecisionForest fit(std::span<const DecisionSample> samples, const ForestParams& params);

  /// Majority vote; an exact tie falls back to repartitioning.
  Decision predict(double sim_max) const;
  /// Fraction of trees voting for reuse.
  double reuse_votes(double sim_max) const;

  bool degenerate() const { return degenerate_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }

  /// {n_trees, max_depth, trees:[{nodes:[...]}], seed}
  nlohmann::ordered_json to_json() const;
  static DecisionForest from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& file) const;
  static DecisionForest load(const std::filesystem::path& file);

  /// Assembles a forest from explicit trees (used to pin vote ties in tests).
  static DecisionForest from_trees(std::vector<DecisionTree> trees, ForestParams params);

  friend bool operator==(const DecisionForest& a, const DecisionForest& b) {
    return a.to_json() == b.to_json();
  }

 private:
  std::vector<DecisionTree> trees_;
  ForestParams params_;
  bool degenerate_ = false;
};

}  // namespace sjreuse
