#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "sjreuse/dataset.hpp"
#include "sjreuse/error.hpp"
#include "unit/support.hpp"

using namespace sjreuse;

namespace {

std::vector<double> bin_distribution(std::span<const Point> pts, const Rect& box, int res) {
  std::vector<double> h(static_cast<std::size_t>(res * res), 0.0);
  for (const Point& p : pts) {
    int c = static_cast<int>((p.x - box.min_x) / box.width() * res);
    int r = static_cast<int>((p.y - box.min_y) / box.height() * res);
    c = std::clamp(c, 0, res - 1);
    r = std::clamp(r, 0, res - 1);
    h[static_cast<std::size_t>(r * res + c)] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(pts.size());
  return h;
}

double chi_square(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] + q[i] > 0.0) s += (p[i] - q[i]) * (p[i] - q[i]) / (p[i] + q[i]);
  }
  return s;
}

/// 99th percentile of the chi-square distance between the source and
/// same-size bootstrap resamples of it.
double resample_gate(std::span<const Point> src, std::size_t n, int res) {
  const Rect box = bounding_box(src);
  const auto base = bin_distribution(src, box, res);
  Rng rng(4242);
  std::vector<double> ds;
  std::vector<Point> draw(n);
  for (int t = 0; t < 200; ++t) {
    for (auto& p : draw) p = src[rng.uniform_index(src.size())];
    ds.push_back(chi_square(base, bin_distribution(draw, box, res)));
  }
  std::sort(ds.begin(), ds.end());
  return ds[static_cast<std::size_t>(0.99 * (ds.size() - 1))];
}

}  // namespace

TEST_CASE("csv parsing") {
  const auto dir = testing::scratch("csv");
  testing::write_text(dir / "a.csv", "x,y\n1,2\n\n3.5, -4e3\n  \n5,6\n");
  const auto pts = read_points_csv(dir / "a.csv");
  REQUIRE(pts.size() == 3);
  CHECK(pts[1] == Point{3.5, -4000});

  testing::write_text(dir / "nohdr.csv", "1,2\n3,4");
  CHECK(read_points_csv(dir / "nohdr.csv").size() == 2);

  testing::write_text(dir / "bad.csv", "x,y\n1,2\n3,oops\n");
  try {
    read_points_csv(dir / "bad.csv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(std::string(e.what()).find("bad.csv:3") != std::string::npos);
  }
  testing::write_text(dir / "nan.csv", "1,2\nnan,4\n");
  CHECK_THROWS_AS(read_points_csv(dir / "nan.csv"), Error);
  testing::write_text(dir / "three.csv", "1,2,3\n");
  CHECK_THROWS_AS(read_points_csv(dir / "three.csv"), Error);
  testing::write_text(dir / "late_header.csv", "1,2\nx,y\n");
  CHECK_THROWS_AS(read_points_csv(dir / "late_header.csv"), Error);

  const std::vector<Point> round{{0.1, 1e-300}, {-123456.789, 3.0}};
  write_points_csv(dir / "w.csv", round);
  CHECK(read_points_csv(dir / "w.csv") == round);
}

TEST_CASE("ingest unit square") {
  const auto dir = testing::scratch("ingest_sq");
  testing::write_text(dir / "sq.csv", "0,0\n1,0\n1,1\n0,1\n");
  PointSource src = PointSource::file(dir / "sq.csv");
  const Dataset d = ingest(src, "sq", 100, 1);
  CHECK(src.passes() == 1);
  CHECK(d.count == 4);
  CHECK(d.metadata.bbox == Rect{0, 0, 1, 1});
  CHECK(d.metadata.compactness == doctest::Approx(std::numbers::pi / 4));
  CHECK(d.metadata.n_points == 4);

  const Dataset again = ingest(dir / "sq.csv", "sq", 100, 1);
  CHECK(metadata_to_json(again).dump() == metadata_to_json(ingest(dir / "sq.csv", "sq", 100, 1)).dump());

  save_metadata(again, dir / "sq.meta.json");
  const Dataset back = load_metadata(dir / "sq.meta.json");
  CHECK(metadata_to_json(back).dump() == metadata_to_json(again).dump());

  CHECK_THROWS_AS(ingest(dir / "missing.csv", "m"), Error);
  testing::write_text(dir / "line.csv", "0,0\n1,1\n2,2\n");
  CHECK_THROWS_AS(ingest(dir / "line.csv", "line"), Error);
}

TEST_CASE("ingest sample cap and hull property") {
  const auto dir = testing::scratch("ingest_big");
  const auto pts = testing::random_points(10000, {0, 0, 100, 100}, 11);
  write_points_csv(dir / "p.csv", pts);
  const Dataset d = ingest(dir / "p.csv", "p", 1000, 3);
  CHECK(d.count == 10000);
  CHECK(d.sample.size() == 1000);
  for (const Point& p : d.sample) {
    CHECK(convex_polygon_contains(d.metadata.covering, p));
    CHECK(d.metadata.bbox.contains(p));
  }
  for (const Point& v : d.metadata.covering.vertices) CHECK(d.metadata.bbox.contains(v));
  // Sample is drawn without replacement.
  std::set<std::pair<double, double>> uniq;
  for (const Point& p : d.sample) uniq.insert({p.x, p.y});
  CHECK(uniq.size() == 1000);
}

TEST_CASE("reservoir sample is uniform over positions") {
  std::vector<Point> pts(100);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {static_cast<double>(i), 0.0};
  std::vector<int> hits(100, 0);
  for (std::uint64_t s = 0; s < 2000; ++s) {
    PointSource src = PointSource::memory(pts);
    for (const Point& p : reservoir_sample(src, 10, s)) ++hits[static_cast<std::size_t>(p.x)];
  }
  // Each position expects 200 hits; binomial sd ~ 13.4.
  for (int h : hits) {
    CHECK(h > 130);
    CHECK(h < 270);
  }
}

TEST_CASE("enlarge preserves the bin distribution") {
  const auto src = testing::random_points(1000, {0, 0, 50, 50}, 21);
  const auto big = enlarge_points(src, 10000, 16, 8);
  CHECK(big.size() == 10000);
  const Rect box = bounding_box(src);
  const double d = chi_square(bin_distribution(src, box, 16), bin_distribution(big, box, 16));
  CHECK(d <= resample_gate(src, 10000, 16));

  const auto same = enlarge_points(src, 1000, 16, 9);
  const double d2 = chi_square(bin_distribution(src, box, 16), bin_distribution(same, box, 16));
  CHECK(d2 <= resample_gate(src, 1000, 16));

  const std::vector<Point> one_bin{{3, 3}, {3, 3}, {3, 3}};
  for (const Point& p : enlarge_points(one_bin, 50, 8, 1)) CHECK(p == Point{3, 3});

  const std::vector<Point> square{{0, 0}, {4, 0}, {0, 4}, {4, 4}};
  for (const Point& p : enlarge_points(square, 200, 1, 2)) CHECK(Rect{0, 0, 4, 4}.contains(p));

  CHECK(enlarge_points(src, 500, 16, 8) == enlarge_points(src, 500, 16, 8));
}

TEST_CASE("enlarge of a dataset file") {
  const auto dir = testing::scratch("enlarge_file");
  write_points_csv(dir / "s.csv", testing::random_points(300, {0, 0, 10, 10}, 2));
  const Dataset d = ingest(dir / "s.csv", "s");
  const Dataset e = enlarge(d, 3000, 8, 4, dir / "e.csv", "e");
  CHECK(e.count == 3000);
  CHECK(e.id == "e");
  CHECK_THROWS_AS(enlarge(d, 10, 8, 4, dir / "f.csv", "f"), Error);
}

TEST_CASE("split workload") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("d" + std::to_string(i));
  const auto [train, test] = split_workload(ids, 0.8, 5);
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);
  std::set<std::string> all(train.begin(), train.end());
  all.insert(test.begin(), test.end());
  CHECK(all.size() == 10);
  CHECK(split_workload(ids, 0.8, 5) == std::make_pair(train, test));

  const auto [t5, v5] = split_workload({"a", "b", "c", "d", "e"}, 0.8, 1);
  CHECK(t5.size() == 4);
  CHECK(v5.size() == 1);
  CHECK_THROWS_AS(split_workload(ids, 1.0, 1), Error);
}

TEST_CASE("pair joins cover every dataset") {
  std::vector<std::string> ids;
  for (int i = 0; i < 8; ++i) ids.push_back("d" + std::to_string(i));
  const auto joins = pair_joins(ids, 3);
  CHECK(joins.size() == 8);
  std::set<std::string> seen;
  for (const auto& j : joins) {
    seen.insert(j.left);
    seen.insert(j.right);
    CHECK(j.left != j.right);
  }
  CHECK(seen.size() == 8);
  CHECK(pair_joins(ids, 3) == joins);

  const auto two = pair_joins({"A", "B"}, 1);
  REQUIRE(two.size() == 2);
  CHECK(((two[0] == JoinPair{"A", "B"} && two[1] == JoinPair{"B", "A"}) ||
         (two[0] == JoinPair{"B", "A"} && two[1] == JoinPair{"A", "B"})));
}

TEST_CASE("synthetic generators") {
  const auto u = generate_uniform({0, 0, 2, 3}, 1000, 1);
  CHECK(u.size() == 1000);
  for (const Point& p : u) CHECK(Rect{0, 0, 2, 3}.contains(p));
  const auto g = generate_gaussian({5, 5}, 1.0, 5000, 2, {0, 0, 10, 10});
  double mx = 0;
  for (const Point& p : g) {
    CHECK(Rect{0, 0, 10, 10}.contains(p));
    mx += p.x;
  }
  CHECK(mx / 5000 == doctest::Approx(5.0).epsilon(0.01));
  CHECK(generate_uniform({0, 0, 1, 1}, 10, 9) == generate_uniform({0, 0, 1, 1}, 10, 9));
}
