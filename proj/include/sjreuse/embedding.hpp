#pragma once

#include <array>
#include <string>
#include <string_view>

#include "sjreuse/dataset.hpp"

namespace sjreuse {

inline constexpr std::size_t kEmbeddingDim = 9;
inline constexpr double kDefaultCoordScale = 1e6;

/// Entry order of the embedding vector. Checkpoints record it and refuse to
/// load under a different order.
inline constexpr std::array<std::string_view, kEmbeddingDim> kFeatureOrder = {
    "log_count", "log_area", "cx", "cy", "bminx", "bminy", "bmaxx", "bmaxy", "compactness"};

struct DatasetEmbedding {
  std::array<double, kEmbeddingDim> v{};
  std::string source_id;

  friend bool operator==(const DatasetEmbedding& a, const DatasetEmbedding& b) {
    return a.v == b.v;
  }
};

/// ln(1 + count), ln(1 + area), centroid and bbox divided by coord_scale,
/// compactness unchanged.
DatasetEmbedding embed(const DatasetMetadata& m, double coord_scale = kDefaultCoordScale,
                       std::string source_id = {});

}  // namespace sjreuse
