#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sjreuse/error.hpp"
#include "sjreuse/geometry.hpp"
#include "unit/support.hpp"

using namespace sjreuse;

namespace {

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

TEST_CASE("distance") {
  CHECK(distance({0, 0}, {0, 0}) == 0.0);
  CHECK(distance({0, 0}, {3, 4}) == doctest::Approx(5.0));
  CHECK(distance({1.5, 2.5}, {4.5, 6.5}) == doctest::Approx(5.0));

  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    Point a{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    Point b{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    Point c{rng.uniform(-100, 100), rng.uniform(-100, 100)};
    CHECK(distance(a, b) == distance(b, a));
    CHECK(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
  }
}

TEST_CASE("convex hull drops interior points") {
  const std::vector<Point> tri{{0, 0}, {1, 0}, {0, 1}, {0.2, 0.2}};
  const Polygon h = convex_hull(tri);
  REQUIRE(h.vertices.size() == 3);
  CHECK(h.vertices[0] == Point{0, 0});
  CHECK(h.vertices[1] == Point{1, 0});
  CHECK(h.vertices[2] == Point{0, 1});

  const std::vector<Point> sq{{1, 1}, {0, 0}, {0.5, 0.5}, {1, 0}, {0, 1}};
  const Polygon s = convex_hull(sq);
  REQUIRE(s.vertices.size() == 4);
  CHECK(s.vertices[0] == Point{0, 0});
  CHECK(s.vertices[1] == Point{1, 0});
  CHECK(s.vertices[2] == Point{1, 1});
  CHECK(s.vertices[3] == Point{0, 1});
}

TEST_CASE("convex hull of random disk points passes the brute-force check") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    std::vector<Point> pts;
    while (pts.size() < 100) {
      Point p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      if (p.x * p.x + p.y * p.y <= 1.0) pts.push_back(p);
    }
    const Polygon h = convex_hull(pts);
    const auto& v = h.vertices;
    REQUIRE(v.size() >= 3);
    // Every vertex is an input point.
    for (const Point& q : v) CHECK(std::find(pts.begin(), pts.end(), q) != pts.end());
    // Strictly convex and counter-clockwise.
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(cross(v[i], v[(i + 1) % v.size()], v[(i + 2) % v.size()]) > 0.0);
    }
    // Every input lies on the inner side of every edge.
    for (const Point& p : pts) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(cross(v[i], v[(i + 1) % v.size()], p) >= -1e-12);
      }
      CHECK(convex_polygon_contains(h, p));
    }
    // Every supporting line through two inputs with all points on one side
    // (O(n^3)) must be a hull edge direction: count such extreme pairs.
    std::size_t extreme_pairs = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (i == j) continue;
        bool all_left = true;
        for (std::size_t k = 0; k < pts.size() && all_left; ++k) {
          if (k != i && k != j && cross(pts[i], pts[j], pts[k]) <= 0.0) all_left = false;
        }
        extreme_pairs += all_left ? 1 : 0;
      }
    }
    CHECK(extreme_pairs == v.size());
  }
}

TEST_CASE("convex hull rejects degenerate input") {
  const std::vector<Point> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  CHECK_THROWS_AS(convex_hull(line), Error);
  const std::vector<Point> two{{0, 0}, {1, 1}, {0, 0}};
  CHECK_THROWS_AS(convex_hull(two), Error);
  try {
    convex_hull(line);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateInput);
  }
}

TEST_CASE("polygon metrics analytic cases") {
  const PolygonMetrics sq = polygon_metrics(Polygon{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}});
  CHECK(sq.area == doctest::Approx(1.0));
  CHECK(sq.perimeter == doctest::Approx(4.0));
  CHECK(sq.centroid.x == doctest::Approx(0.5));
  CHECK(sq.centroid.y == doctest::Approx(0.5));
  CHECK(sq.compactness == doctest::Approx(std::numbers::pi / 4));

  const PolygonMetrics big = polygon_metrics(Polygon{{{1e5, 1e5}, {3e5, 1e5}, {3e5, 3e5}, {1e5, 3e5}}});
  CHECK(big.compactness == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));

  Polygon circle;
  for (int i = 0; i < 1024; ++i) {
    const double a = 2 * std::numbers::pi * i / 1024;
    circle.vertices.push_back({std::cos(a), std::sin(a)});
  }
  const PolygonMetrics c = polygon_metrics(circle);
  CHECK(std::abs(c.compactness - 1.0) < 1e-4);
  CHECK(c.compactness <= 1.0 + 1e-9);

  CHECK_THROWS_AS(polygon_metrics(Polygon{{{0, 0}, {1, 1}, {2, 2}}}), Error);
}

TEST_CASE("hull area agrees with a Monte-Carlo estimate") {
  const auto pts = testing::random_points(40, {0, 0, 10, 6}, 99);
  const Polygon h = convex_hull(pts);
  const PolygonMetrics m = polygon_metrics(h);
  const Rect box = bounding_box(h.vertices);
  Rng rng(5);
  const int n = 400000;
  int inside = 0;
  double sx = 0, sy = 0;
  for (int i = 0; i < n; ++i) {
    Point p{rng.uniform(box.min_x, box.max_x), rng.uniform(box.min_y, box.max_y)};
    if (convex_polygon_contains(h, p, 0.0)) {
      ++inside;
      sx += p.x;
      sy += p.y;
    }
  }
  const double est = box.area() * inside / n;
  CHECK(std::abs(est - m.area) / m.area < 0.01);
  CHECK(sx / inside == doctest::Approx(m.centroid.x).epsilon(0.01));
  CHECK(sy / inside == doctest::Approx(m.centroid.y).epsilon(0.01));
  CHECK(m.compactness > 0.0);
  CHECK(m.compactness <= 1.0 + 1e-9);
}

TEST_CASE("rect point distance") {
  const Rect u{0, 0, 1, 1};
  CHECK(rect_point_distance(u, {0.5, 0.5}) == 0.0);
  CHECK(rect_point_distance(u, {2, 0.5}) == doctest::Approx(1.0));
  CHECK(rect_point_distance(u, {2, 2}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(rect_point_distance(u, {1, 1}) == 0.0);

  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    Point p{rng.uniform(-1, 2), rng.uniform(-1, 2)};
    CHECK((rect_point_distance(u, p) == 0.0) == u.contains(p));
    // Oracle: nearest point by clamping.
    const Point c{std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)};
    CHECK(rect_point_distance(u, p) == doctest::Approx(distance(p, c)));
  }
}

TEST_CASE("rect helpers") {
  const Rect r{0, 0, 10, 20};
  CHECK(r.clamp({-5, 30}) == Point{0, 20});
  const Rect p = r.padded(0.1);
  CHECK(p.min_x == doctest::Approx(-1.0));
  CHECK(p.max_y == doctest::Approx(22.0));
  const Rect u = r.united({-3, 5, 4, 40});
  CHECK(u == Rect{-3, 0, 10, 40});
  const std::vector<Point> pts{{1, 2}, {-1, 5}, {3, -4}};
  CHECK(bounding_box(pts) == Rect{-1, -4, 3, 5});
}
