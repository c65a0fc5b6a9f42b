#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sjreuse/geometry.hpp"
#include "sjreuse/random.hpp"

namespace testing {

/// Fresh empty directory under the system temp folder.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sjreuse_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<sjreuse::Point> random_points(std::size_t n, const sjreuse::Rect& box,
                                                 std::uint64_t seed) {
  sjreuse::Rng rng(seed);
  std::vector<sjreuse::Point> pts(n);
  for (auto& p : pts) p = {rng.uniform(box.min_x, box.max_x), rng.uniform(box.min_y, box.max_y)};
  return pts;
}

}  // namespace testing
