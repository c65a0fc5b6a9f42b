#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sjreuse/dataset.hpp"
#include "sjreuse/quadtree.hpp"

namespace sjreuse {

/// Wall-clock seconds per join phase. The partitioning phase is everything
/// up to and including routing.
struct PhaseTimings {
  double lookup = 0.0;  // best-match search plus reuse decision (online path only)
  double sample_scan = 0.0;
  double partitioner_build = 0.0;
  double partitioner_load = 0.0;
  double routing = 0.0;
  double local_join = 0.0;
  double merge = 0.0;

  double partitioning() const {
    return lookup + sample_scan + partitioner_build + partitioner_load + routing;
  }
  double total() const { return partitioning() + local_join + merge; }
};

struct JoinStats {
  PhaseTimings seconds;
  std::size_t data_passes_r = 0;
  std::size_t data_passes_s = 0;
  /// Passes over R spent on building a partitioner (0 on reuse).
  std::size_t construction_passes_r = 0;
  std::vector<std::uint64_t> block_r_counts;
  std::vector<std::uint64_t> block_s_counts;
  bool reused_partitioner = false;
  std::optional<std::string> matched_dataset_id;
  std::uint64_t candidates = 0;
  std::uint64_t result_pairs = 0;
  /// Deterministic cost proxy: records scanned and routed, sample points
  /// inserted, leaves loaded, plus the simulated makespan of the local joins
  /// over the worker pool.
  std::uint64_t work_units = 0;
  /// The share of work_units spent up to and including routing.
  std::uint64_t partition_work_units = 0;

  nlohmann::ordered_json to_json(bool with_timings = true) const;
};

using PairIndex = std::pair<std::uint32_t, std::uint32_t>;

struct JoinResult {
  std::vector<PairIndex> pairs;  // sorted, unique
  JoinStats stats;
};

struct ExecOptions {
  int workers = 1;
  /// Largest number of R+S records a single block may hold.
  std::size_t capacity_cap = 5'000'000;
};

/// How a fresh partitioner is built for the left input.
struct PartitionerSpec {
  Rect domain = kWorldExtent;
  QuadtreeBuildParams params;
  std::size_t sample_cap = kDefaultSampleCap;
  std::uint64_t seed = 0;
};

/// Repartition path: one sampling pass over R, then a quadtree over the sample.
QuadtreePartitioner build_partitioner(PointSource& r, const PartitionerSpec& spec,
                                      JoinStats& stats, std::string id = {});

/// Reuse path: loads a stored partitioner without touching R.
QuadtreePartitioner fetch_partitioner(const std::filesystem::path& file, JoinStats& stats,
                                      std::optional<std::string> matched_id = {});

/// Distance join: R routed to one block each, S replicated to every block
/// within theta, plane sweep per block on `workers` threads, sorted merge.
/// Throws CapacityError when a block exceeds options.capacity_cap.
JoinResult execute(PointSource& r, PointSource& s, double theta, const QuadtreePartitioner& p,
                   const ExecOptions& options, JoinStats stats = {});

/// Sweep join of two point lists carrying their record indices; appends to
/// `out` and returns the number of exact distance checks.
struct IndexedPoint {
  double x;
  double y;
  std::uint32_t index;
};
std::uint64_t plane_sweep_join(std::vector<IndexedPoint>& r, std::vector<IndexedPoint>& s,
                               double theta, std::vector<PairIndex>& out);

struct Speedup {
  double overall = 1.0;
  double partitioning = 1.0;
};

/// fresh / reused for the whole join and for the partitioning phase.
Speedup speedup_report(const JoinStats& fresh, const JoinStats& reused);

void write_pairs_csv(const std::filesystem::path& file, const std::vector<PairIndex>& pairs);

}  // namespace sjreuse
