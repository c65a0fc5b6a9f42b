#include "sjreuse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "sjreuse/error.hpp"
#include "sjreuse/random.hpp"

namespace sjreuse {

namespace detail {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view field, double& out) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return false;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace

CsvCursor::CsvCursor(std::string_view text, std::string source_name)
    : text_(text), source_name_(std::move(source_name)) {}

bool CsvCursor::next(Point& out) {
  while (pos_ < text_.size()) {
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    const std::string_view line = trim(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    ++line_;
    if (line.empty()) continue;

    const std::size_t comma = line.find(',');
    const bool two_fields =
        comma != std::string_view::npos && line.find(',', comma + 1) == std::string_view::npos;
    double x = 0.0;
    double y = 0.0;
    const bool ok_x = two_fields && parse_double(line.substr(0, comma), x);
    const bool ok_y = two_fields && parse_double(line.substr(comma + 1), y);
    const bool first = !seen_content_;
    seen_content_ = true;
    if (ok_x && ok_y) {
      if (!std::isfinite(x) || !std::isfinite(y)) {
        throw Error(ErrorCode::kParse,
                    source_name_ + ":" + std::to_string(line_) + ": non-finite coordinate");
      }
      out = {x, y};
      return true;
    }
    double ignored = 0.0;
    const bool looks_numeric = parse_double(line.substr(0, comma), ignored) ||
                               (comma != std::string_view::npos &&
                                parse_double(line.substr(comma + 1), ignored));
    if (first && !looks_numeric) continue;  // header row
    throw Error(ErrorCode::kParse, source_name_ + ":" + std::to_string(line_) +
                                       ": expected two numeric columns x,y");
  }
  return false;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::string text;
  in.seekg(0, std::ios::end);
  text.resize(static_cast<std::size_t>(in.tellg()));
  in.seekg(0, std::ios::beg);
  in.read(text.data(), static_cast<std::streamsize>(text.size()));
  if (!in) throw Error(ErrorCode::kIo, "read failed on " + path.string());
  return text;
}

}  // namespace detail

PointSource PointSource::file(std::filesystem::path path) {
  PointSource s;
  s.path_ = std::move(path);
  return s;
}

PointSource PointSource::memory(std::span<const Point> points) {
  PointSource s;
  s.points_ = points;
  s.in_memory_ = true;
  return s;
}

std::vector<Point> read_points_csv(const std::filesystem::path& path) {
  std::vector<Point> points;
  PointSource::file(path).scan([&](std::uint32_t, Point p) { points.push_back(p); });
  return points;
}

void write_points_csv(const std::filesystem::path& path, std::span<const Point> points) {
  std::string out = "x,y\n";
  out.reserve(points.size() * 40 + 4);
  char buf[64];
  for (const Point& p : points) {
    auto r = std::to_chars(buf, buf + sizeof buf, p.x);
    *r.ptr++ = ',';
    r = std::to_chars(r.ptr, buf + sizeof buf, p.y);
    *r.ptr++ = '\n';
    out.append(buf, r.ptr);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(ErrorCode::kIo, "write failed on " + path.string());
}

DatasetMetadata compute_metadata(std::span<const Point> sample, std::size_t count) {
  DatasetMetadata m;
  m.n_points = count;
  m.covering = convex_hull(sample);
  const PolygonMetrics pm = polygon_metrics(m.covering);
  m.area = pm.area;
  m.perimeter = pm.perimeter;
  m.centroid = pm.centroid;
  m.compactness = pm.compactness;
  m.bbox = bounding_box(m.covering.vertices);
  return m;
}

std::vector<Point> reservoir_sample(PointSource& source, std::size_t cap, std::uint64_t seed,
                                    std::size_t* count_out) {
  Rng rng(seed);
  std::vector<Point> reservoir;
  reservoir.reserve(cap);
  std::size_t seen = 0;
  source.scan([&](std::uint32_t, Point p) {
    if (reservoir.size() < cap) {
      reservoir.push_back(p);
    } else {
      const std::uint64_t j = rng.uniform_index(seen + 1);
      if (j < cap) reservoir[j] = p;
    }
    ++seen;
  });
  if (count_out != nullptr) *count_out = seen;
  return reservoir;
}

Dataset ingest(PointSource& source, std::string id, std::size_t sample_cap, std::uint64_t seed) {
  if (sample_cap < 3) throw Error(ErrorCode::kInvalidArgument, "sample_cap must be >= 3");
  Dataset d;
  d.id = std::move(id);
  d.path = source.path();
  d.sample = reservoir_sample(source, sample_cap, seed, &d.count);
  d.metadata = compute_metadata(d.sample, d.count);
  return d;
}

Dataset ingest(const std::filesystem::path& path, std::string id, std::size_t sample_cap,
               std::uint64_t seed) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kNotFound, "no such file: " + path.string());
  }
  PointSource source = PointSource::file(std::filesystem::absolute(path));
  return ingest(source, std::move(id), sample_cap, seed);
}

nlohmann::ordered_json metadata_to_json(const Dataset& d) {
  nlohmann::ordered_json j;
  j["id"] = d.id;
  j["path"] = d.path.string();
  j["count"] = d.count;
  j["area"] = d.metadata.area;
  j["perimeter"] = d.metadata.perimeter;
  j["centroid"] = json_util::point(d.metadata.centroid);
  j["bbox"] = json_util::rect(d.metadata.bbox);
  j["compactness"] = d.metadata.compactness;
  auto hull = nlohmann::ordered_json::array();
  for (const Point& p : d.metadata.covering.vertices) hull.push_back(json_util::point(p));
  j["hull"] = std::move(hull);
  return j;
}

Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset d;
  d.id = json_util::get<std::string>(j, "id");
  d.path = json_util::get<std::string>(j, "path");
  d.count = json_util::get<std::size_t>(j, "count");
  auto& m = d.metadata;
  m.n_points = d.count;
  m.area = json_util::get<double>(j, "area");
  m.perimeter = json_util::get<double>(j, "perimeter");
  m.centroid = json_util::to_point(json_util::field(j, "centroid"), "centroid");
  m.bbox = json_util::to_rect(json_util::field(j, "bbox"), "bbox");
  m.compactness = json_util::get<double>(j, "compactness");
  for (const auto& v : json_util::field(j, "hull")) {
    m.covering.vertices.push_back(json_util::to_point(v, "hull"));
  }
  return d;
}

void save_metadata(const Dataset& d, const std::filesystem::path& file) {
  json_util::write_atomic(file, metadata_to_json(d).dump(2) + "\n");
}

Dataset load_metadata(const std::filesystem::path& file) {
  return dataset_from_json(json_util::parse_file(file));
}

std::vector<Point> enlarge_points(std::span<const Point> source, std::size_t target_count,
                                  int resolution, std::uint64_t seed) {
  if (source.empty()) throw Error(ErrorCode::kEmptySample, "enlarge of an empty dataset");
  if (resolution < 1) throw Error(ErrorCode::kInvalidArgument, "resolution must be >= 1");
  const Rect box = bounding_box(source);
  const auto w = static_cast<std::size_t>(resolution);
  const double cell_w = box.width() / static_cast<double>(resolution);
  const double cell_h = box.height() / static_cast<double>(resolution);
  auto bin_of = [&](double v, double lo, double extent) {
    if (!(extent > 0.0)) return std::size_t{0};
    const double t = (v - lo) / extent * static_cast<double>(resolution);
    return std::min(static_cast<std::size_t>(std::max(t, 0.0)), w - 1);
  };

  std::vector<std::uint64_t> counts(w * w, 0);
  for (const Point& p : source) {
    ++counts[bin_of(p.y, box.min_y, box.height()) * w + bin_of(p.x, box.min_x, box.width())];
  }
  std::vector<std::size_t> bins;
  std::vector<std::uint64_t> cumulative;
  std::uint64_t running = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) continue;
    running += counts[k];
    bins.push_back(k);
    cumulative.push_back(running);
  }

  Rng rng(seed);
  std::vector<Point> out;
  out.reserve(target_count);
  for (std::size_t i = 0; i < target_count; ++i) {
    const std::uint64_t r = rng.uniform_index(running);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    const std::size_t bin = bins[static_cast<std::size_t>(it - cumulative.begin())];
    const double row = static_cast<double>(bin / w);
    const double col = static_cast<double>(bin % w);
    Point p{box.min_x + (col + rng.uniform01()) * cell_w,
            box.min_y + (row + rng.uniform01()) * cell_h};
    out.push_back(box.clamp(p));
  }
  return out;
}

Dataset enlarge(const Dataset& d, std::size_t target_count, int resolution, std::uint64_t seed,
                const std::filesystem::path& out, std::string out_id, std::size_t sample_cap) {
  if (target_count < d.count) {
    throw Error(ErrorCode::kInvalidArgument, "enlarge target below the source count");
  }
  const std::vector<Point> source = read_points_csv(d.path);
  write_points_csv(out, enlarge_points(source, target_count, resolution, seed));
  return ingest(out, std::move(out_id), sample_cap, seed);
}

std::vector<Point> generate_uniform(const Rect& region, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> out(n);
  for (Point& p : out) {
    p.x = rng.uniform(region.min_x, region.max_x);
    p.y = rng.uniform(region.min_y, region.max_y);
  }
  return out;
}

std::vector<Point> generate_gaussian(Point center, double sigma, std::size_t n,
                                     std::uint64_t seed, const Rect& clip) {
  if (!clip.contains(center)) {
    throw Error(ErrorCode::kInvalidArgument, "gaussian center outside clip region");
  }
  Rng rng(seed);
  std::vector<Point> out;
  out.reserve(n);
  while (out.size() < n) {
    const Point p{center.x + sigma * rng.normal(), center.y + sigma * rng.normal()};
    if (clip.contains(p)) out.push_back(p);
  }
  return out;
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_workload(
    std::vector<std::string> ids, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "train_fraction must lie in (0, 1)");
  }
  if (ids.size() < 2) throw Error(ErrorCode::kInvalidArgument, "split needs >= 2 datasets");
  Rng rng(seed);
  rng.shuffle(std::span(ids));
  const double n = static_cast<double>(ids.size());
  // The epsilon absorbs 1 - 0.8 = 0.19999999999999996.
  auto n_test = static_cast<std::size_t>(std::floor(n * (1.0 - train_fraction) + 1e-9));
  n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);
  std::vector<std::string> test(ids.end() - static_cast<std::ptrdiff_t>(n_test), ids.end());
  ids.resize(ids.size() - n_test);
  return {std::move(ids), std::move(test)};
}

std::vector<JoinPair> pair_joins(std::vector<std::string> ids, std::uint64_t seed) {
  if (ids.size() < 2) throw Error(ErrorCode::kInvalidArgument, "pairing needs >= 2 datasets");
  Rng rng(seed);
  rng.shuffle(std::span(ids));
  std::vector<JoinPair> joins;
  joins.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    joins.push_back({ids[i], ids[(i + 1) % ids.size()]});
  }
  return joins;
}

}  // namespace sjreuse
