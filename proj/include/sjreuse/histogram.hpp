#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sjreuse/dataset.hpp"
#include "sjreuse/geometry.hpp"

namespace sjreuse {

inline constexpr int kDefaultHistogramResolution = 8192;

/// The shared support of every histogram: a global domain cut into W x W cells.
struct GridSpec {
  Rect domain;
  int resolution = kDefaultHistogramResolution;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Sparse W x W counts. Bins are (row-major key, count) pairs sorted by key;
/// key = row * W + col with col indexing x and row indexing y. Empty bins are
/// absent.
struct GridHistogram {
  GridSpec grid;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> bins;
  std::uint64_t total = 0;
  /// Points that fell outside the domain and were clamped into edge bins.
  std::uint64_t out_of_domain = 0;

  std::uint64_t count(int row, int col) const;
};

/// Sparse probability vector over the same keys as its source histogram.
struct ProbVector {
  GridSpec grid;
  std::vector<std::pair<std::uint64_t, double>> probs;
};

struct Divergence {
  double kld_p = 0.0;  // KLD(p || m)
  double kld_q = 0.0;  // KLD(q || m)
  double jsd = 0.0;
};

/// Row-major key of the cell holding p; points outside the domain are
/// clamped and flagged. The domain's max edges fall into the last cell.
std::uint64_t bin_key(const GridSpec& grid, Point p, bool* outside = nullptr);

GridHistogram build_histogram(std::span<const Point> points, const GridSpec& grid);
GridHistogram build_histogram(PointSource& source, const GridSpec& grid);

/// Histogram from a dense row-major count vector of length W*W.
GridHistogram histogram_from_dense(const GridSpec& grid, std::span<const std::uint64_t> counts);

ProbVector normalize(const GridHistogram& h);

/// Jensen-Shannon divergence with log base 2 and 0*log(0/x) = 0; in [0, 1].
Divergence jsd_terms(const ProbVector& p, const ProbVector& q);
double jsd(const ProbVector& p, const ProbVector& q);

nlohmann::ordered_json histogram_to_json(const GridHistogram& h);
GridHistogram histogram_from_json(const nlohmann::json& j);

/// Per-dataset histogram files under `dir`, keyed by id, domain and resolution.
class HistogramCache {
 public:
  explicit HistogramCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  GridHistogram get(const std::string& id, const std::filesystem::path& data,
                    const GridSpec& grid) const;

 private:
  std::filesystem::path dir_;
};

struct DatasetRef {
  std::string id;
  std::filesystem::path path;
};

/// Symmetric JSD matrix with a zero diagonal.
struct JsdMatrix {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> values;

  double at(std::size_t i, std::size_t j) const { return values[i][j]; }
};

/// All pairwise divergences. With a cache directory, histograms and the
/// finished matrix are persisted and reused when the key matches.
JsdMatrix ground_truth_matrix(std::span<const DatasetRef> datasets, const GridSpec& grid,
                              const std::optional<std::filesystem::path>& cache_dir = {});

/// Matrix over in-memory point sets (no caching).
JsdMatrix ground_truth_matrix(std::span<const std::vector<Point>> datasets,
                              std::span<const std::string> ids, const GridSpec& grid);

}  // namespace sjreuse
