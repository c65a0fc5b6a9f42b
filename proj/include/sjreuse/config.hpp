#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "sjreuse/geometry.hpp"
#include "sjreuse/histogram.hpp"
#include "sjreuse/quadtree.hpp"

namespace sjreuse {

enum class LabelClock { kWork, kWall };

/// Engine settings, read from a flat `key = value` file. `#` starts a
/// comment. Relative directories resolve against the config file's folder.
struct EngineConfig {
  std::filesystem::path repo_dir = "repo";
  std::filesystem::path data_dir = "data";
  Rect partition_domain = kWorldExtent;
  std::optional<Rect> histogram_domain;  // empty: corpus bbox padded by 1%
  int histogram_resolution = kDefaultHistogramResolution;
  double coord_scale = 1e6;
  int workers = 1;
  int user_max_depth = 8;
  std::size_t node_capacity = 0;
  std::size_t sample_cap = 10'000;
  std::size_t capacity_cap = 5'000'000;
  double theta = 1000.0;
  std::uint64_t seed_ingest = 1;
  std::uint64_t seed_train = 2;
  std::uint64_t seed_forest = 3;
  std::uint64_t seed_workload = 4;
  LabelClock label_clock = LabelClock::kWork;
  int forest_trees = 100;
  int forest_depth = 5;
  /// Test hook: "retrain_before_swap" aborts retraining right before the
  /// checkpoint swap.
  std::string fault = "";

  /// Throws InvalidArgument on an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  /// Every key with its effective value, one per line.
  std::string to_text() const;

  static EngineConfig parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static EngineConfig load(const std::filesystem::path& file);
};

}  // namespace sjreuse
