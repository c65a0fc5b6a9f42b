#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sjreuse/geometry.hpp"

namespace sjreuse {

/// Web-Mercator world extent in meters, the default root coverage.
inline constexpr Rect kWorldExtent{-20037508.342789244, -20037508.342789244,
                                   20037508.342789244, 20037508.342789244};

/// A leaf of the quadtree. The path spells the descent from the root, one
/// character per level: '0' = NW, '1' = NE, '2' = SW, '3' = SE.
struct PartitionBlock {
  std::string path;
  Rect bbox;
  std::uint32_t block_id = 0;

  friend bool operator==(const PartitionBlock&, const PartitionBlock&) = default;
};

struct QuadtreeBuildParams {
  int rdd_partitions = 1;
  int user_max_depth = 1;
  /// Node capacity; 0 derives ceil(|sample| / treeDepth).
  std::size_t node_capacity = 0;
};

/// Full-coverage quadtree partitioner. Leaves tile the domain exactly and are
/// numbered densely in lexicographic path order. Cells are half-open
/// [min, max) except along the domain's max edges, which are closed.
class QuadtreePartitioner {
 public:
  /// treeDepth = max(rdd_partitions, user_max_depth). Points are inserted in
  /// (x, y, input index) order; a leaf already holding more than the capacity
  /// splits into quadrants when it is reached again below treeDepth.
  static QuadtreePartitioner build(std::span<const Point> sample, const Rect& domain,
                                   const QuadtreeBuildParams& params, std::string id = {});

  /// Rebuilds the hierarchy from leaf paths; throws FormatError unless the
  /// leaves form a complete quadtree whose boxes match their paths exactly.
  static QuadtreePartitioner from_leaves(std::string id, const Rect& domain, int max_depth,
                                         std::vector<PartitionBlock> leaves);

  const std::string& id() const { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }
  const Rect& domain() const { return domain_; }
  int max_depth() const { return max_depth_; }
  const std::vector<PartitionBlock>& leaves() const { return leaves_; }
  std::size_t block_count() const { return leaves_.size(); }

  /// Block containing p. Outside points are clamped onto the domain, or
  /// rejected with OutOfDomain when clamp is false.
  std::uint32_t route(Point p, bool clamp = true) const;

  /// Every block whose box lies within theta of p, ascending by id.
  std::vector<std::uint32_t> route_expanded(Point p, double theta, bool clamp = true) const;
  void route_expanded(Point p, double theta, std::vector<std::uint32_t>& out,
                      bool clamp = true) const;

  /// Canonical JSON: {id, domain, max_depth, leaves:[{path, bbox}]}.
  std::string to_json() const;
  static QuadtreePartitioner from_json(const std::string& text);

  void save(const std::filesystem::path& file) const;
  static QuadtreePartitioner load(const std::filesystem::path& file);

  friend bool operator==(const QuadtreePartitioner& a, const QuadtreePartitioner& b) {
    return a.id_ == b.id_ && a.domain_ == b.domain_ && a.max_depth_ == b.max_depth_ &&
           a.leaves_ == b.leaves_;
  }

 private:
  struct Node {
    Rect bbox;
    double mid_x = 0.0;
    double mid_y = 0.0;
    // >= 0: internal node index; < 0: leaf with block id -(ref + 1).
    std::int32_t child[4] = {0, 0, 0, 0};
  };

  void index_leaves();
  Point prepare(Point p, bool clamp) const;

  std::string id_;
  Rect domain_;
  int max_depth_ = 0;
  std::vector<PartitionBlock> leaves_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

/// Exact box of the cell reached by following `path` from `domain`.
Rect quadrant_rect(const Rect& domain, const std::string& path);

}  // namespace sjreuse
