#include <doctest.h>

#include <algorithm>
#include <random>

#include "sjreuse/error.hpp"
#include "sjreuse/quadtree.hpp"
#include "unit/support.hpp"

using namespace sjreuse;

namespace {

// Linear scan over leaves with the half-open cell convention.
std::uint32_t linear_route(const QuadtreePartitioner& p, Point q) {
  const Rect& d = p.domain();
  for (const auto& b : p.leaves()) {
    const bool in_x = q.x >= b.bbox.min_x && (q.x < b.bbox.max_x || (b.bbox.max_x == d.max_x && q.x <= d.max_x));
    const bool in_y = q.y >= b.bbox.min_y && (q.y < b.bbox.max_y || (b.bbox.max_y == d.max_y && q.y <= d.max_y));
    if (in_x && in_y) return b.block_id;
  }
  FAIL("point not covered");
  return 0;
}

double leaf_area_sum(const QuadtreePartitioner& p) {
  double s = 0;
  for (const auto& b : p.leaves()) s += b.bbox.area();
  return s;
}

}  // namespace

TEST_CASE("leaves tile the domain") {
  const Rect dom{0, 0, 1024, 1024};
  const auto pts = testing::random_points(5000, {0, 0, 300, 1024}, 4);
  const auto p = QuadtreePartitioner::build(pts, dom, {1, 6, 0}, "t");
  CHECK(p.block_count() > 4);
  CHECK(leaf_area_sum(p) == doctest::Approx(dom.area()));
  for (std::size_t i = 0; i < p.leaves().size(); ++i) {
    const auto& b = p.leaves()[i];
    CHECK(b.block_id == i);
    CHECK(b.bbox == quadrant_rect(dom, b.path));
    CHECK(static_cast<int>(b.path.size()) <= p.max_depth());
    if (i > 0) CHECK(p.leaves()[i - 1].path < b.path);
    for (std::size_t j = i + 1; j < p.leaves().size(); ++j) {
      const auto& c = p.leaves()[j];
      // No leaf path is a prefix of another.
      CHECK(c.path.rfind(b.path, 0) != 0);
    }
  }
  // The dense strip is cut finer than the empty side.
  std::size_t dense = 0, empty = 0;
  for (const auto& b : p.leaves()) (b.bbox.max_x <= 512 ? dense : empty) += 1;
  CHECK(dense > 2 * empty);
  CHECK(p.route({900, 900}) == p.route({1000, 1000}));
}

TEST_CASE("quadrant order") {
  const Rect dom{0, 0, 4, 4};
  CHECK(quadrant_rect(dom, "0") == Rect{0, 2, 2, 4});
  CHECK(quadrant_rect(dom, "1") == Rect{2, 2, 4, 4});
  CHECK(quadrant_rect(dom, "2") == Rect{0, 0, 2, 2});
  CHECK(quadrant_rect(dom, "3") == Rect{2, 0, 4, 2});
  CHECK(quadrant_rect(dom, "31") == Rect{3, 1, 4, 2});
}

TEST_CASE("route agrees with a linear scan") {
  const Rect dom{-50, -50, 50, 50};
  const auto pts = testing::random_points(3000, {-50, -50, 10, 10}, 8);
  const auto p = QuadtreePartitioner::build(pts, dom, {4, 7, 0});
  Rng rng(1);
  for (int i = 0; i < 5000; ++i) {
    const Point q{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    CHECK(p.route(q) == linear_route(p, q));
  }
  // Cell boundaries and the closed max edges.
  for (const auto& b : p.leaves()) {
    for (const Point q : {Point{b.bbox.min_x, b.bbox.min_y}, Point{b.bbox.max_x, b.bbox.max_y},
                          Point{b.bbox.min_x, b.bbox.max_y}}) {
      CHECK(p.route(q) == linear_route(p, q));
    }
  }
  CHECK(p.route({50, 50}) == linear_route(p, {50, 50}));
  CHECK(p.route({500, 0}) == p.route({50, 0}));
  try {
    p.route({500, 0}, false);
    FAIL("expected out of domain");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfDomain);
  }
}

TEST_CASE("route_expanded agrees with a rect-distance scan") {
  const Rect dom{0, 0, 100, 100};
  const auto pts = testing::random_points(4000, {0, 0, 100, 100}, 12);
  const auto p = QuadtreePartitioner::build(pts, dom, {1, 6, 0});
  Rng rng(2);
  std::vector<std::uint32_t> got;
  for (int i = 0; i < 2000; ++i) {
    const Point q{rng.uniform(0, 100), rng.uniform(0, 100)};
    const double theta = rng.uniform(0, 15);
    p.route_expanded(q, theta, got);
    std::vector<std::uint32_t> want;
    for (const auto& b : p.leaves()) {
      if (rect_point_distance(b.bbox, q) <= theta) want.push_back(b.block_id);
    }
    CHECK(got == want);
    CHECK(std::find(got.begin(), got.end(), p.route(q)) != got.end());
  }
  CHECK(p.route_expanded({50, 50}, 0.0).size() >= 1);
  CHECK(p.route_expanded({50, 50}, 1000.0).size() == p.block_count());
}

TEST_CASE("build is deterministic and insertion-order independent") {
  const Rect dom{0, 0, 10, 10};
  auto pts = testing::random_points(2000, {0, 0, 10, 10}, 5);
  const auto a = QuadtreePartitioner::build(pts, dom, {2, 6, 0}, "x");
  const auto b = QuadtreePartitioner::build(pts, dom, {2, 6, 0}, "x");
  CHECK(a == b);
  CHECK(a.to_json() == b.to_json());
  std::mt19937_64 g(3);
  std::shuffle(pts.begin(), pts.end(), g);
  CHECK(QuadtreePartitioner::build(pts, dom, {2, 6, 0}, "x") == a);

  // treeDepth = max(workers, user depth).
  CHECK(QuadtreePartitioner::build(pts, dom, {9, 2, 0}).max_depth() == 9);
  CHECK(QuadtreePartitioner::build(pts, dom, {1, 3, 0}).max_depth() == 3);
  const auto shallow = QuadtreePartitioner::build(pts, dom, {1, 3, 0});
  for (const auto& leaf : shallow.leaves()) {
    CHECK(leaf.path.size() <= 3);
  }
  // A sample within capacity stays one leaf.
  const auto one = QuadtreePartitioner::build(std::span<const Point>(pts).first(5), dom, {1, 4, 100});
  CHECK(one.block_count() == 1);
}

TEST_CASE("from_leaves validation and round trip") {
  const Rect dom{0, 0, 8, 8};
  const auto p = QuadtreePartitioner::build(testing::random_points(800, {0, 0, 3, 3}, 6), dom,
                                            {1, 5, 0}, "rt");
  const auto back = QuadtreePartitioner::from_json(p.to_json());
  CHECK(back == p);
  CHECK(back.to_json() == p.to_json());

  const auto dir = testing::scratch("quadtree");
  p.save(dir / "p.json");
  CHECK(QuadtreePartitioner::load(dir / "p.json") == p);

  auto leaves = p.leaves();
  auto missing = leaves;
  missing.pop_back();
  CHECK_THROWS_AS(QuadtreePartitioner::from_leaves("m", dom, 5, missing), Error);
  auto wrong_box = leaves;
  wrong_box[0].bbox.max_x += 0.5;
  CHECK_THROWS_AS(QuadtreePartitioner::from_leaves("w", dom, 5, wrong_box), Error);
  auto too_deep = leaves;
  CHECK_THROWS_AS(QuadtreePartitioner::from_leaves("d", dom, 0, too_deep), Error);
  auto overlap = leaves;
  overlap.push_back({"", dom, 0});
  CHECK_THROWS_AS(QuadtreePartitioner::from_leaves("o", dom, 5, overlap), Error);

  testing::write_text(dir / "bad.json", "{\"id\": 3}");
  CHECK_THROWS_AS(QuadtreePartitioner::load(dir / "bad.json"), Error);
}
