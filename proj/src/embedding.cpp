#include "sjreuse/embedding.hpp"

#include <cmath>

#include "sjreuse/error.hpp"

namespace sjreuse {

DatasetEmbedding embed(const DatasetMetadata& m, double coord_scale, std::string source_id) {
  if (!(coord_scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "coord_scale must be > 0");
  DatasetEmbedding e;
  e.source_id = std::move(source_id);
  e.v = {std::log1p(static_cast<double>(m.n_points)),
         std::log1p(m.area),
         m.centroid.x / coord_scale,
         m.centroid.y / coord_scale,
         m.bbox.min_x / coord_scale,
         m.bbox.min_y / coord_scale,
         m.bbox.max_x / coord_scale,
         m.bbox.max_y / coord_scale,
         m.compactness};
  return e;
}

}  // namespace sjreuse
