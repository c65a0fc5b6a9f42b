#include "sjreuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sjreuse/error.hpp"

namespace sjreuse {

namespace {

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool lex_less(Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

}  // namespace

Point Rect::clamp(Point p) const {
  return {std::clamp(p.x, min_x, max_x), std::clamp(p.y, min_y, max_y)};
}

Rect Rect::padded(double fraction) const {
  const double dx = width() * fraction;
  const double dy = height() * fraction;
  return {min_x - dx, min_y - dy, max_x + dx, max_y + dy};
}

Rect Rect::united(const Rect& other) const {
  return {std::min(min_x, other.min_x), std::min(min_y, other.min_y),
          std::max(max_x, other.max_x), std::max(max_y, other.max_y)};
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

Polygon convex_hull(std::span<const Point> points) {
  std::vector<Point> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), lex_less);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) {
    throw Error(ErrorCode::kDegenerateInput, "convex hull needs at least 3 distinct points");
  }

  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  // The last vertex repeats the first one.
  hull.resize(k - 1);
  if (hull.size() < 3) {
    throw Error(ErrorCode::kDegenerateInput, "all input points are collinear");
  }
  return Polygon{std::move(hull)};
}

PolygonMetrics polygon_metrics(const Polygon& polygon) {
  const auto& v = polygon.vertices;
  if (v.size() < 3) {
    throw Error(ErrorCode::kDegenerateInput, "polygon has fewer than 3 vertices");
  }
  // Work relative to the first vertex; projected coordinates are large.
  const Point origin = v.front();
  double twice_area = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double perimeter = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point a{v[i].x - origin.x, v[i].y - origin.y};
    const Point& next = v[(i + 1) % v.size()];
    const Point b{next.x - origin.x, next.y - origin.y};
    const double w = a.x * b.y - b.x * a.y;
    twice_area += w;
    cx += (a.x + b.x) * w;
    cy += (a.y + b.y) * w;
    perimeter += distance(v[i], next);
  }
  const double area = 0.5 * twice_area;
  if (!(area > 0.0)) {
    throw Error(ErrorCode::kDegenerateInput, "polygon area is not positive");
  }
  PolygonMetrics m;
  m.area = area;
  m.perimeter = perimeter;
  m.centroid = {origin.x + cx / (3.0 * twice_area), origin.y + cy / (3.0 * twice_area)};
  m.compactness = 4.0 * std::numbers::pi * area / (perimeter * perimeter);
  return m;
}

double rect_point_distance(const Rect& r, Point p) {
  const double dx = std::max({r.min_x - p.x, 0.0, p.x - r.max_x});
  const double dy = std::max({r.min_y - p.y, 0.0, p.y - r.max_y});
  if (dx == 0.0) return dy;
  if (dy == 0.0) return dx;
  return std::hypot(dx, dy);
}

Rect bounding_box(std::span<const Point> points) {
  if (points.empty()) {
    throw Error(ErrorCode::kDegenerateInput, "bounding box of an empty point set");
  }
  Rect r{points[0].x, points[0].y, points[0].x, points[0].y};
  for (const Point& p : points) {
    r.min_x = std::min(r.min_x, p.x);
    r.min_y = std::min(r.min_y, p.y);
    r.max_x = std::max(r.max_x, p.x);
    r.max_y = std::max(r.max_y, p.y);
  }
  return r;
}

bool convex_polygon_contains(const Polygon& polygon, Point p, double tolerance) {
  const auto& v = polygon.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point a = v[i];
    const Point b = v[(i + 1) % v.size()];
    const double edge = distance(a, b);
    if (edge > 0.0 && cross(a, b, p) / edge < -tolerance) return false;
  }
  return true;
}

}  // namespace sjreuse
