#include "sjreuse/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "json_util.hpp"
#include "sjreuse/error.hpp"

namespace sjreuse {

namespace {

void check_grid(const GridSpec& grid) {
  if (grid.resolution < 1) throw Error(ErrorCode::kInvalidArgument, "resolution must be >= 1");
  if (!(grid.domain.width() > 0.0 && grid.domain.height() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "histogram domain is degenerate");
  }
}

std::uint64_t cell_index(double v, double lo, double extent, int resolution, bool& clamped) {
  const double t = (v - lo) / extent * static_cast<double>(resolution);
  if (t < 0.0) {
    clamped = true;
    return 0;
  }
  const auto last = static_cast<std::uint64_t>(resolution - 1);
  if (t >= static_cast<double>(resolution)) {
    if (v > lo + extent) clamped = true;
    return last;
  }
  return std::min(static_cast<std::uint64_t>(t), last);
}

class Builder {
 public:
  explicit Builder(const GridSpec& grid) : grid_(grid) { check_grid(grid); }

  void add(Point p) {
    bool outside = false;
    ++counts_[bin_key(grid_, p, &outside)];
    if (outside) ++out_of_domain_;
    ++total_;
  }

  GridHistogram finish() {
    GridHistogram h;
    h.grid = grid_;
    h.bins.assign(counts_.begin(), counts_.end());
    std::sort(h.bins.begin(), h.bins.end());
    h.total = total_;
    h.out_of_domain = out_of_domain_;
    return h;
  }

 private:
  GridSpec grid_;
  std::unordered_map<std::uint64_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::uint64_t out_of_domain_ = 0;
};

nlohmann::ordered_json grid_key(const std::vector<std::string>& ids, const GridSpec& grid) {
  nlohmann::ordered_json key;
  key["ids"] = ids;
  key["domain"] = json_util::rect(grid.domain);
  key["resolution"] = grid.resolution;
  return key;
}

JsdMatrix matrix_from_histograms(std::vector<std::string> ids,
                                 const std::vector<GridHistogram>& histograms) {
  if (histograms.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "ground truth needs >= 2 datasets");
  }
  std::vector<ProbVector> probs;
  probs.reserve(histograms.size());
  for (const auto& h : histograms) probs.push_back(normalize(h));
  JsdMatrix m;
  m.ids = std::move(ids);
  const std::size_t n = probs.size();
  m.values.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      m.values[i][j] = m.values[j][i] = jsd(probs[i], probs[j]);
    }
  }
  return m;
}

}  // namespace

std::uint64_t GridHistogram::count(int row, int col) const {
  const std::uint64_t key =
      static_cast<std::uint64_t>(row) * static_cast<std::uint64_t>(grid.resolution) +
      static_cast<std::uint64_t>(col);
  const auto it = std::lower_bound(bins.begin(), bins.end(), std::pair{key, std::uint64_t{0}});
  return it != bins.end() && it->first == key ? it->second : 0;
}

std::uint64_t bin_key(const GridSpec& grid, Point p, bool* outside) {
  bool clamped = false;
  const std::uint64_t col =
      cell_index(p.x, grid.domain.min_x, grid.domain.width(), grid.resolution, clamped);
  const std::uint64_t row =
      cell_index(p.y, grid.domain.min_y, grid.domain.height(), grid.resolution, clamped);
  if (outside != nullptr) *outside = clamped;
  return row * static_cast<std::uint64_t>(grid.resolution) + col;
}

GridHistogram build_histogram(std::span<const Point> points, const GridSpec& grid) {
  Builder b(grid);
  for (const Point& p : points) b.add(p);
  return b.finish();
}

GridHistogram build_histogram(PointSource& source, const GridSpec& grid) {
  Builder b(grid);
  source.scan([&](std::uint32_t, Point p) { b.add(p); });
  return b.finish();
}

GridHistogram histogram_from_dense(const GridSpec& grid, std::span<const std::uint64_t> counts) {
  const auto w = static_cast<std::size_t>(grid.resolution);
  if (grid.resolution < 1 || counts.size() != w * w) {
    throw Error(ErrorCode::kInvalidArgument, "dense counts do not match the grid");
  }
  GridHistogram h;
  h.grid = grid;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    h.bins.emplace_back(k, counts[k]);
    h.total += counts[k];
  }
  return h;
}

ProbVector normalize(const GridHistogram& h) {
  if (h.total == 0) throw Error(ErrorCode::kEmptyHistogram, "histogram has no points");
  ProbVector p;
  p.grid = h.grid;
  p.probs.reserve(h.bins.size());
  const double total = static_cast<double>(h.total);
  for (const auto& [key, count] : h.bins) {
    p.probs.emplace_back(key, static_cast<double>(count) / total);
  }
  return p;
}

Divergence jsd_terms(const ProbVector& p, const ProbVector& q) {
  if (!(p.grid == q.grid)) {
    throw Error(ErrorCode::kDomainMismatch, "histograms use different grids");
  }
  Divergence d;
  auto a = p.probs.begin();
  auto b = q.probs.begin();
  while (a != p.probs.end() || b != q.probs.end()) {
    if (b == q.probs.end() || (a != p.probs.end() && a->first < b->first)) {
      d.kld_p += a->second;  // m = p/2, log2(2) = 1
      ++a;
    } else if (a == p.probs.end() || b->first < a->first) {
      d.kld_q += b->second;
      ++b;
    } else {
      const double m = 0.5 * (a->second + b->second);
      d.kld_p += a->second * std::log2(a->second / m);
      d.kld_q += b->second * std::log2(b->second / m);
      ++a;
      ++b;
    }
  }
  d.jsd = std::clamp(0.5 * d.kld_p + 0.5 * d.kld_q, 0.0, 1.0);
  return d;
}

double jsd(const ProbVector& p, const ProbVector& q) { return jsd_terms(p, q).jsd; }

nlohmann::ordered_json histogram_to_json(const GridHistogram& h) {
  nlohmann::ordered_json j;
  j["domain"] = json_util::rect(h.grid.domain);
  j["resolution"] = h.grid.resolution;
  auto entries = nlohmann::ordered_json::array();
  const auto w = static_cast<std::uint64_t>(h.grid.resolution);
  for (const auto& [key, count] : h.bins) {
    entries.push_back(nlohmann::ordered_json::array({key / w, key % w, count}));
  }
  j["entries"] = std::move(entries);
  j["total"] = h.total;
  j["out_of_domain"] = h.out_of_domain;
  return j;
}

GridHistogram histogram_from_json(const nlohmann::json& j) {
  GridHistogram h;
  h.grid.domain = json_util::to_rect(json_util::field(j, "domain"), "domain");
  h.grid.resolution = json_util::get<int>(j, "resolution");
  if (h.grid.resolution < 1) throw Error(ErrorCode::kFormat, "field 'resolution' must be >= 1");
  const auto w = static_cast<std::uint64_t>(h.grid.resolution);
  std::uint64_t sum = 0;
  for (const auto& e : json_util::field(j, "entries")) {
    if (!e.is_array() || e.size() != 3) throw Error(ErrorCode::kFormat, "malformed 'entries' row");
    const auto row = e[0].get<std::uint64_t>();
    const auto col = e[1].get<std::uint64_t>();
    const auto count = e[2].get<std::uint64_t>();
    if (row >= w || col >= w || count == 0) {
      throw Error(ErrorCode::kFormat, "'entries' row outside the grid or zero");
    }
    h.bins.emplace_back(row * w + col, count);
    sum += count;
  }
  std::sort(h.bins.begin(), h.bins.end());
  h.total = json_util::get<std::uint64_t>(j, "total");
  if (sum != h.total) throw Error(ErrorCode::kFormat, "field 'total' disagrees with entries");
  if (j.contains("out_of_domain")) h.out_of_domain = j.at("out_of_domain").get<std::uint64_t>();
  return h;
}

GridHistogram HistogramCache::get(const std::string& id, const std::filesystem::path& data,
                                  const GridSpec& grid) const {
  const std::string key = grid_key({id}, grid).dump();
  const std::filesystem::path file = dir_ / ("hist_" + id + "_" + json_util::fnv1a_hex(key) + ".json");
  if (std::filesystem::exists(file)) {
    try {
      GridHistogram h = histogram_from_json(json_util::parse_file(file));
      if (h.grid == grid) return h;
    } catch (const Error&) {
      // Stale or damaged cache entries are rebuilt.
    }
  }
  PointSource source = PointSource::file(data);
  GridHistogram h = build_histogram(source, grid);
  json_util::write_atomic(file, histogram_to_json(h).dump() + "\n");
  return h;
}

JsdMatrix ground_truth_matrix(std::span<const DatasetRef> datasets, const GridSpec& grid,
                              const std::optional<std::filesystem::path>& cache_dir) {
  check_grid(grid);
  std::vector<std::string> ids;
  for (const auto& d : datasets) ids.push_back(d.id);

  std::filesystem::path matrix_file;
  if (cache_dir) {
    const auto key = grid_key(ids, grid);
    matrix_file = *cache_dir / ("gt_" + json_util::fnv1a_hex(key.dump()) + ".json");
    if (std::filesystem::exists(matrix_file)) {
      try {
        const auto j = json_util::parse_file(matrix_file);
        if (j.at("key") == nlohmann::json::parse(key.dump())) {
          JsdMatrix m;
          m.ids = ids;
          m.values = j.at("matrix").get<std::vector<std::vector<double>>>();
          if (m.values.size() == ids.size()) return m;
        }
      } catch (const std::exception&) {
        // Rebuild below.
      }
    }
  }

  std::vector<GridHistogram> histograms;
  histograms.reserve(datasets.size());
  for (const auto& d : datasets) {
    if (cache_dir) {
      histograms.push_back(HistogramCache(*cache_dir).get(d.id, d.path, grid));
    } else {
      PointSource source = PointSource::file(d.path);
      histograms.push_back(build_histogram(source, grid));
    }
  }
  JsdMatrix m = matrix_from_histograms(ids, histograms);

  if (cache_dir) {
    nlohmann::ordered_json j;
    j["key"] = grid_key(ids, grid);
    j["ids"] = ids;
    j["matrix"] = m.values;
    json_util::write_atomic(matrix_file, j.dump(1) + "\n");
  }
  return m;
}

JsdMatrix ground_truth_matrix(std::span<const std::vector<Point>> datasets,
                              std::span<const std::string> ids, const GridSpec& grid) {
  if (datasets.size() != ids.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one id per dataset required");
  }
  std::vector<GridHistogram> histograms;
  for (const auto& pts : datasets) histograms.push_back(build_histogram(pts, grid));
  return matrix_from_histograms({ids.begin(), ids.end()}, histograms);
}

}  // namespace sjreuse
