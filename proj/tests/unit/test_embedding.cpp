#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sjreuse/embedding.hpp"
#include "sjreuse/error.hpp"

using namespace sjreuse;

TEST_CASE("embedding of the figure exemplar") {
  DatasetMetadata m;
  m.n_points = 20;
  m.area = 6196.79;
  m.centroid = {59.60, 53.62};
  m.bbox = {11.90, 1.04, 98.81, 99.04};
  m.compactness = 0.87;
  const DatasetEmbedding e = embed(m, 1.0, "fig");
  const std::array<double, 9> want{3.0445, 8.7321, 59.60, 53.62, 11.90, 1.04, 98.81, 99.04, 0.87};
  for (std::size_t i = 0; i < 9; ++i) CHECK(e.v[i] == doctest::Approx(want[i]).epsilon(1e-4));
  CHECK(e.v[0] == std::log(21.0));
  CHECK(e.source_id == "fig");

  const DatasetEmbedding scaled = embed(m, 1e6);
  CHECK(scaled.v[2] == doctest::Approx(59.60e-6));
  CHECK(scaled.v[7] == doctest::Approx(99.04e-6));
  CHECK(scaled.v[0] == e.v[0]);
  CHECK(scaled.v[8] == 0.87);
}

TEST_CASE("embedding of the unit square") {
  DatasetMetadata m;
  m.n_points = 4;
  m.area = 1.0;
  m.centroid = {0.5, 0.5};
  m.bbox = {0, 0, 1, 1};
  m.compactness = std::numbers::pi / 4;
  const DatasetEmbedding e = embed(m, 1.0);
  CHECK(e.v[0] == doctest::Approx(std::log(5.0)));
  CHECK(e.v[1] == doctest::Approx(std::log(2.0)));
  CHECK(e.v[2] == 0.5);
  CHECK(e.v[6] == 1.0);
  CHECK(embed(m, 1.0) == e);
  m.n_points = 5;
  CHECK_FALSE(embed(m, 1.0) == e);
  CHECK_THROWS_AS(embed(m, 0.0), Error);
  CHECK(kFeatureOrder.size() == kEmbeddingDim);
}
