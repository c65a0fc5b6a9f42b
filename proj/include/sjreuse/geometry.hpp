#pragma once

#include <span>
#include <vector>

namespace sjreuse {

/// A planar point in projected units (e.g. meters).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned rectangle; min <= max on both axes.
struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  double area() const { return width() * height(); }
  bool valid() const { return min_x <= max_x && min_y <= max_y; }

  /// Closed-boundary containment.
  bool contains(Point p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  bool contains(const Rect& r) const {
    return r.min_x >= min_x && r.max_x <= max_x && r.min_y >= min_y && r.max_y <= max_y;
  }
  Point clamp(Point p) const;
  Rect padded(double fraction) const;
  Rect united(const Rect& other) const;

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Closed counter-clockwise ring (first vertex is not repeated at the end).
struct Polygon {
  std::vector<Point> vertices;
};

struct PolygonMetrics {
  double area = 0.0;
  double perimeter = 0.0;
  Point centroid;
  double compactness = 0.0;
};

double distance(Point a, Point b);

/// Andrew's monotone chain. Output is counter-clockwise, starts at the
/// lexicographically smallest vertex and carries no collinear vertices.
/// Throws DegenerateInput when fewer than three non-collinear points exist.
Polygon convex_hull(std::span<const Point> points);

/// Shoelace area, ring perimeter, area-weighted centroid and 4*pi*A/P^2.
PolygonMetrics polygon_metrics(const Polygon& polygon);

/// 0 inside the (closed) rectangle, else the distance to its nearest point.
double rect_point_distance(const Rect& r, Point p);

Rect bounding_box(std::span<const Point> points);

/// Point-in-convex-polygon with an absolute slack on the edge test.
bool convex_polygon_contains(const Polygon& polygon, Point p, double tolerance = 1e-9);

}  // namespace sjreuse
