#include "sjreuse/join.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "json_util.hpp"
#include "sjreuse/error.hpp"

namespace sjreuse {

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

bool sweep_less(const IndexedPoint& a, const IndexedPoint& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.index < b.index;
}

/// Longest-processing-time assignment of block costs to `workers` lanes.
std::uint64_t simulated_makespan(std::vector<std::uint64_t> costs, int workers) {
  std::sort(costs.begin(), costs.end(), std::greater<>());
  std::vector<std::uint64_t> lanes(static_cast<std::size_t>(std::max(workers, 1)), 0);
  for (std::uint64_t c : costs) *std::min_element(lanes.begin(), lanes.end()) += c;
  return *std::max_element(lanes.begin(), lanes.end());
}

double ratio(double num, double den) {
  if (den > 0.0) return num / den;
  return num > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

}  // namespace

nlohmann::ordered_json JoinStats::to_json(bool with_timings) const {
  nlohmann::ordered_json j;
  if (with_timings) {
    nlohmann::ordered_json t;
    t["lookup"] = seconds.lookup;
    t["sample_scan"] = seconds.sample_scan;
    t["partitioner_build"] = seconds.partitioner_build;
    t["partitioner_load"] = seconds.partitioner_load;
    t["routing"] = seconds.routing;
    t["local_join"] = seconds.local_join;
    t["merge"] = seconds.merge;
    t["partitioning"] = seconds.partitioning();
    t["total"] = seconds.total();
    j["seconds"] = std::move(t);
  }
  j["data_passes_r"] = data_passes_r;
  j["data_passes_s"] = data_passes_s;
  j["construction_passes_r"] = construction_passes_r;
  j["reused_partitioner"] = reused_partitioner;
  j["matched_dataset_id"] = matched_dataset_id ? nlohmann::ordered_json(*matched_dataset_id)
                                               : nlohmann::ordered_json(nullptr);
  j["blocks"] = block_r_counts.size();
  j["block_r_counts"] = block_r_counts;
  j["block_s_counts"] = block_s_counts;
  j["candidates"] = candidates;
  j["result_pairs"] = result_pairs;
  j["work_units"] = work_units;
  j["partition_work_units"] = partition_work_units;
  return j;
}

QuadtreePartitioner build_partitioner(PointSource& r, const PartitionerSpec& spec,
                                      JoinStats& stats, std::string id) {
  const std::size_t before = r.passes();
  Stopwatch scan;
  std::size_t count = 0;
  const std::vector<Point> sample = reservoir_sample(r, spec.sample_cap, spec.seed, &count);
  stats.seconds.sample_scan += scan.seconds();

  Stopwatch build;
  QuadtreePartitioner p = QuadtreePartitioner::build(sample, spec.domain, spec.params, std::move(id));
  stats.seconds.partitioner_build += build.seconds();

  const std::size_t passes = r.passes() - before;
  stats.construction_passes_r += passes;
  stats.data_passes_r += passes;
  stats.reused_partitioner = false;
  stats.work_units += count + sample.size();
  stats.partition_work_units += count + sample.size();
  return p;
}

QuadtreePartitioner fetch_partitioner(const std::filesystem::path& file, JoinStats& stats,
                                      std::optional<std::string> matched_id) {
  Stopwatch load;
  QuadtreePartitioner p = QuadtreePartitioner::load(file);
  stats.seconds.partitioner_load += load.seconds();
  stats.reused_partitioner = true;
  stats.matched_dataset_id = std::move(matched_id);
  stats.work_units += p.block_count();
  stats.partition_work_units += p.block_count();
  return p;
}

std::uint64_t plane_sweep_join(std::vector<IndexedPoint>& r, std::vector<IndexedPoint>& s,
                               double theta, std::vector<PairIndex>& out) {
  std::sort(r.begin(), r.end(), sweep_less);
  std::sort(s.begin(), s.end(), sweep_less);
  std::uint64_t checks = 0;
  std::size_t lo = 0;
  for (const IndexedPoint& a : r) {
    // Differences, not shifted bounds, so the window agrees with the predicate.
    while (lo < s.size() && a.x - s[lo].x > theta) ++lo;
    for (std::size_t j = lo; j < s.size() && s[j].x - a.x <= theta; ++j) {
      ++checks;
      if (distance({a.x, a.y}, {s[j].x, s[j].y}) <= theta) out.emplace_back(a.index, s[j].index);
    }
  }
  return checks;
}

JoinResult execute(PointSource& r, PointSource& s, double theta, const QuadtreePartitioner& p,
                   const ExecOptions& options, JoinStats stats) {
  if (!(theta >= 0.0) || !std::isfinite(theta)) {
    throw Error(ErrorCode::kInvalidArgument, "theta must be finite and >= 0");
  }
  if (options.workers < 1) throw Error(ErrorCode::kInvalidArgument, "workers must be >= 1");
  const std::size_t blocks = p.block_count();
  std::vector<std::vector<IndexedPoint>> r_blocks(blocks);
  std::vector<std::vector<IndexedPoint>> s_blocks(blocks);

  Stopwatch routing;
  const std::size_t r_before = r.passes();
  const std::size_t s_before = s.passes();
  std::uint64_t routed = 0;
  r.scan([&](std::uint32_t idx, Point pt) {
    r_blocks[p.route(pt)].push_back({pt.x, pt.y, idx});
    ++routed;
  });
  std::vector<std::uint32_t> targets;
  s.scan([&](std::uint32_t idx, Point pt) {
    p.route_expanded(pt, theta, targets);
    for (std::uint32_t b : targets) s_blocks[b].push_back({pt.x, pt.y, idx});
    routed += targets.size();
  });
  stats.data_passes_r += r.passes() - r_before;
  stats.data_passes_s += s.passes() - s_before;
  stats.seconds.routing += routing.seconds();
  stats.work_units += routed;
  stats.partition_work_units += routed;

  stats.block_r_counts.resize(blocks);
  stats.block_s_counts.resize(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    stats.block_r_counts[b] = r_blocks[b].size();
    stats.block_s_counts[b] = s_blocks[b].size();
    if (r_blocks[b].size() + s_blocks[b].size() > options.capacity_cap) {
      throw Error(ErrorCode::kCapacity, "block " + std::to_string(b) + " holds " +
                                            std::to_string(r_blocks[b].size() + s_blocks[b].size()) +
                                            " records, above the cap of " +
                                            std::to_string(options.capacity_cap));
    }
  }

  Stopwatch local;
  std::vector<std::vector<PairIndex>> block_pairs(blocks);
  std::vector<std::uint64_t> block_checks(blocks, 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t b = next++; b < blocks; b = next++) {
      if (r_blocks[b].empty() || s_blocks[b].empty()) continue;
      block_checks[b] = plane_sweep_join(r_blocks[b], s_blocks[b], theta, block_pairs[b]);
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(
      static_cast<std::size_t>(options.workers), std::max<std::size_t>(blocks, 1)));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  stats.seconds.local_join += local.seconds();

  std::vector<std::uint64_t> costs(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    stats.candidates += block_checks[b];
    costs[b] = r_blocks[b].size() + s_blocks[b].size() + block_checks[b];
  }
  stats.work_units += simulated_makespan(std::move(costs), options.workers);

  Stopwatch merge;
  JoinResult result;
  std::size_t total = 0;
  for (const auto& bp : block_pairs) total += bp.size();
  result.pairs.reserve(total);
  for (auto& bp : block_pairs) {
    result.pairs.insert(result.pairs.end(), bp.begin(), bp.end());
    std::vector<PairIndex>().swap(bp);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  stats.seconds.merge += merge.seconds();
  stats.result_pairs = result.pairs.size();
  stats.work_units += result.pairs.size();
  result.stats = std::move(stats);
  return result;
}

Speedup speedup_report(const JoinStats& fresh, const JoinStats& reused) {
  return {ratio(fresh.seconds.total(), reused.seconds.total()),
          ratio(fresh.seconds.partitioning(), reused.seconds.partitioning())};
}

void write_pairs_csv(const std::filesystem::path& file, const std::vector<PairIndex>& pairs) {
  std::string out = "r_index,s_index\n";
  out.reserve(out.size() + pairs.size() * 16);
  char buf[24];
  for (const auto& [a, b] : pairs) {
    out.append(buf, std::to_chars(buf, buf + sizeof buf, a).ptr);
    out += ',';
    out.append(buf, std::to_chars(buf, buf + sizeof buf, b).ptr);
    out += '\n';
  }
  json_util::write_atomic(file, out);
}

}  // namespace sjreuse
