#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "sjreuse/error.hpp"
#include "sjreuse/geometry.hpp"

namespace sjreuse::json_util {

inline nlohmann::ordered_json point(Point p) { return nlohmann::ordered_json::array({p.x, p.y}); }

inline nlohmann::ordered_json rect(const Rect& r) {
  return nlohmann::ordered_json::array({r.min_x, r.min_y, r.max_x, r.max_y});
}

template <class J>
const auto& field(const J& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::kFormat, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

template <class T, class J>
T get(const J& j, const char* key) {
  const auto& v = field(j, key);
  try {
    return v.template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kFormat, std::string("field '") + key + "' has the wrong type");
  }
}

template <class J>
double number(const J& v, const char* what) {
  if (!v.is_number()) throw Error(ErrorCode::kFormat, std::string("non-numeric '") + what + "'");
  return v.template get<double>();
}

template <class J>
Point to_point(const J& v, const char* what) {
  if (!v.is_array() || v.size() != 2) {
    throw Error(ErrorCode::kFormat, std::string("field '") + what + "' is not an [x,y] pair");
  }
  return {number(v[0], what), number(v[1], what)};
}

template <class J>
Rect to_rect(const J& v, const char* what) {
  if (!v.is_array() || v.size() != 4) {
    throw Error(ErrorCode::kFormat, std::string("field '") + what + "' is not a 4-element box");
  }
  Rect r{number(v[0], what), number(v[1], what), number(v[2], what), number(v[3], what)};
  if (!r.valid()) throw Error(ErrorCode::kFormat, std::string("field '") + what + "' has min > max");
  return r;
}

std::uint64_t fnv1a(std::string_view s);
std::string fnv1a_hex(std::string_view s);

nlohmann::json parse_file(const std::filesystem::path& file);
std::string read_text(const std::filesystem::path& file);

/// Writes `<file>.tmp`, flushes, then renames over `file`.
void write_atomic(const std::filesystem::path& file, const std::string& content);

}  // namespace sjreuse::json_util
