#include "sjreuse/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

#include "json_util.hpp"
#include "sjreuse/error.hpp"

namespace sjreuse {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view want) {
  throw Error(ErrorCode::kInvalidArgument,
              "config key '" + std::string(key) + "': '" + std::string(value) + "' is not " +
                  std::string(want));
}

template <class T>
T parse_int(std::string_view key, std::string_view v, T min) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || out < min) {
    bad(key, v, "an integer >= " + std::to_string(min));
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) bad(key, v, "a number");
  return out;
}

Rect parse_rect(std::string_view key, std::string_view v) {
  std::vector<double> xs;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto part = trim(v.substr(start, comma == std::string_view::npos ? v.npos : comma - start));
    xs.push_back(parse_double(key, part));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (xs.size() != 4) bad(key, v, "world or min_x,min_y,max_x,max_y");
  Rect r{xs[0], xs[1], xs[2], xs[3]};
  if (!(r.min_x < r.max_x && r.min_y < r.max_y)) bad(key, v, "a box with positive extent");
  return r;
}

std::string fmt(double d) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, res.ptr);
}

std::string fmt(const Rect& r) {
  return fmt(r.min_x) + "," + fmt(r.min_y) + "," + fmt(r.max_x) + "," + fmt(r.max_y);
}

}  // namespace

void EngineConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "repo_dir") {
    repo_dir = std::string(value);
  } else if (key == "data_dir") {
    data_dir = std::string(value);
  } else if (key == "partition_domain") {
    partition_domain = value == "world" ? kWorldExtent : parse_rect(key, value);
  } else if (key == "histogram_domain") {
    if (value == "auto") {
      histogram_domain.reset();
    } else {
      histogram_domain = value == "world" ? kWorldExtent : parse_rect(key, value);
    }
  } else if (key == "histogram_resolution") {
    histogram_resolution = parse_int<int>(key, value, 1);
  } else if (key == "coord_scale") {
    coord_scale = parse_double(key, value);
    if (coord_scale <= 0.0) bad(key, value, "positive");
  } else if (key == "workers") {
    workers = parse_int<int>(key, value, 1);
  } else if (key == "user_max_depth") {
    user_max_depth = parse_int<int>(key, value, 1);
  } else if (key == "node_capacity") {
    node_capacity = parse_int<std::size_t>(key, value, 0);
  } else if (key == "sample_cap") {
    sample_cap = parse_int<std::size_t>(key, value, 1);
  } else if (key == "capacity_cap") {
    capacity_cap = parse_int<std::size_t>(key, value, 1);
  } else if (key == "theta") {
    theta = parse_double(key, value);
    if (theta < 0.0) bad(key, value, "non-negative");
  } else if (key == "seed_ingest") {
    seed_ingest = parse_int<std::uint64_t>(key, value, 0);
  } else if (key == "seed_train") {
    seed_train = parse_int<std::uint64_t>(key, value, 0);
  } else if (key == "seed_forest") {
    seed_forest = parse_int<std::uint64_t>(key, value, 0);
  } else if (key == "seed_workload") {
    seed_workload = parse_int<std::uint64_t>(key, value, 0);
  } else if (key == "label_clock") {
    if (value == "work") {
      label_clock = LabelClock::kWork;
    } else if (value == "wall") {
      label_clock = LabelClock::kWall;
    } else {
      bad(key, value, "work or wall");
    }
  } else if (key == "forest_trees") {
    forest_trees = parse_int<int>(key, value, 1);
  } else if (key == "forest_depth") {
    forest_depth = parse_int<int>(key, value, 0);
  } else if (key == "fault") {
    fault = std::string(value);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
  }
}

std::string EngineConfig::to_text() const {
  std::ostringstream o;
  o << "repo_dir = " << repo_dir.string() << "\n"
    << "data_dir = " << data_dir.string() << "\n"
    << "partition_domain = " << fmt(partition_domain) << "\n"
    << "histogram_domain = " << (histogram_domain ? fmt(*histogram_domain) : "auto") << "\n"
    << "histogram_resolution = " << histogram_resolution << "\n"
    << "coord_scale = " << fmt(coord_scale) << "\n"
    << "workers = " << workers << "\n"
    << "user_max_depth = " << user_max_depth << "\n"
    << "node_capacity = " << node_capacity << "\n"
    << "sample_cap = " << sample_cap << "\n"
    << "capacity_cap = " << capacity_cap << "\n"
    << "theta = " << fmt(theta) << "\n"
    << "seed_ingest = " << seed_ingest << "\n"
    << "seed_train = " << seed_train << "\n"
    << "seed_forest = " << seed_forest << "\n"
    << "seed_workload = " << seed_workload << "\n"
    << "label_clock = " << (label_clock == LabelClock::kWork ? "work" : "wall") << "\n"
    << "forest_trees = " << forest_trees << "\n"
    << "forest_depth = " << forest_depth << "\n";
  if (!fault.empty()) o << "fault = " << fault << "\n";
  return o.str();
}

EngineConfig EngineConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  EngineConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidArgument,
                  "config line " + std::to_string(line_no) + ": expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  if (!base_dir.empty()) {
    if (cfg.repo_dir.is_relative()) cfg.repo_dir = base_dir / cfg.repo_dir;
    if (cfg.data_dir.is_relative()) cfg.data_dir = base_dir / cfg.data_dir;
  }
  return cfg;
}

EngineConfig EngineConfig::load(const std::filesystem::path& file) {
  const auto abs = std::filesystem::absolute(file);
  return parse(json_util::read_text(abs), abs.parent_path());
}

}  // namespace sjreuse
