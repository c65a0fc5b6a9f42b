#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sjreuse/geometry.hpp"

namespace sjreuse {

namespace detail {

/// Incremental parser over an in-memory CSV buffer of `x,y` rows. Blank lines
/// are skipped and a header is accepted only as the first non-blank line.
class CsvCursor {
 public:
  CsvCursor(std::string_view text, std::string source_name);

  /// Parses the next record; false at end of input. Throws ParseError.
  bool next(Point& out);

 private:
  std::string_view text_;
  std::string source_name_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
  bool seen_content_ = false;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace detail

/// A dataset carrier that counts how many full passes were made over it.
/// File-backed sources re-read and re-parse the file on every pass.
class PointSource {
 public:
  static PointSource file(std::filesystem::path path);
  static PointSource memory(std::span<const Point> points);

  /// One full pass; calls fn(record_index, point) in file order.
  template <class Fn>
  void scan(Fn&& fn) {
    ++passes_;
    std::uint32_t index = 0;
    if (in_memory_) {
      for (const Point& p : points_) fn(index++, p);
      return;
    }
    const std::string text = detail::read_file(path_);
    detail::CsvCursor cursor(text, path_.string());
    Point p;
    while (cursor.next(p)) fn(index++, p);
  }

  std::size_t passes() const { return passes_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::span<const Point> points_;
  bool in_memory_ = false;
  std::size_t passes_ = 0;
};

/// Loads every record of a CSV file (one pass).
std::vector<Point> read_points_csv(const std::filesystem::path& path);

/// Writes `x,y` rows with a header, shortest round-trip decimal formatting.
void write_points_csv(const std::filesystem::path& path, std::span<const Point> points);

struct DatasetMetadata {
  std::size_t n_points = 0;
  Polygon covering;
  double area = 0.0;
  double perimeter = 0.0;
  Point centroid;
  Rect bbox;
  double compactness = 0.0;
};

struct Dataset {
  std::string id;
  std::filesystem::path path;
  std::size_t count = 0;
  std::vector<Point> sample;
  DatasetMetadata metadata;
};

inline constexpr std::size_t kDefaultSampleCap = 10'000;

/// Metadata of a point set: convex hull covering plus its metrics.
DatasetMetadata compute_metadata(std::span<const Point> sample, std::size_t count);

/// Single pass: counts records, keeps a seeded reservoir sample of at most
/// sample_cap points and derives the metadata from the sample's hull.
Dataset ingest(PointSource& source, std::string id, std::size_t sample_cap, std::uint64_t seed);
Dataset ingest(const std::filesystem::path& path, std::string id,
               std::size_t sample_cap = kDefaultSampleCap, std::uint64_t seed = 0);

/// Reservoir sample (algorithm R) drawn during one pass over the source.
std::vector<Point> reservoir_sample(PointSource& source, std::size_t cap, std::uint64_t seed,
                                    std::size_t* count_out = nullptr);

/// Sidecar JSON: {id, path, count, area, centroid, bbox, compactness, hull}.
nlohmann::ordered_json metadata_to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::json& j);
void save_metadata(const Dataset& d, const std::filesystem::path& file);
Dataset load_metadata(const std::filesystem::path& file);

/// Draws target_count points i.i.d. from the resolution x resolution
/// histogram of `source` over its bounding box: bin with probability
/// proportional to its count, position uniform inside the bin.
std::vector<Point> enlarge_points(std::span<const Point> source, std::size_t target_count,
                                  int resolution, std::uint64_t seed);

/// Reads d.path, writes the synthetic points to `out` and ingests them.
Dataset enlarge(const Dataset& d, std::size_t target_count, int resolution, std::uint64_t seed,
                const std::filesystem::path& out, std::string out_id,
                std::size_t sample_cap = kDefaultSampleCap);

std::vector<Point> generate_uniform(const Rect& region, std::size_t n, std::uint64_t seed);

/// Isotropic Gaussian blob; draws falling outside `clip` are redrawn.
std::vector<Point> generate_gaussian(Point center, double sigma, std::size_t n,
                                     std::uint64_t seed, const Rect& clip);

struct JoinPair {
  std::string left;
  std::string right;

  friend bool operator==(const JoinPair&, const JoinPair&) = default;
};

/// Seeded disjoint split; both sides get at least one element.
std::pair<std::vector<std::string>, std::vector<std::string>> split_workload(
    std::vector<std::string> ids, double train_fraction, std::uint64_t seed);

/// |ids| random joins in which every id appears at least once: a seeded
/// permutation closed into a cycle.
std::vector<JoinPair> pair_joins(std::vector<std::string> ids, std::uint64_t seed);

}  // namespace sjreuse
