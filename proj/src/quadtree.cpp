#include "sjreuse/quadtree.hpp"

#include <algorithm>
#include <climits>
#include <numeric>

#include <json.hpp>

#include "json_util.hpp"
#include "sjreuse/error.hpp"

namespace sjreuse {

namespace {

constexpr std::int32_t kUnset = INT32_MIN;
// Halving below ~2^-52 of the extent stops producing distinct boxes.
constexpr int kMaxTreeDepth = 50;

Rect child_rect(const Rect& r, int quadrant) {
  const double mx = (r.min_x + r.max_x) * 0.5;
  const double my = (r.min_y + r.max_y) * 0.5;
  switch (quadrant) {
    case 0: return {r.min_x, my, mx, r.max_y};
    case 1: return {mx, my, r.max_x, r.max_y};
    case 2: return {r.min_x, r.min_y, mx, my};
    default: return {mx, r.min_y, r.max_x, my};
  }
}

int quadrant_of(const Rect& r, Point p) {
  const bool east = p.x >= (r.min_x + r.max_x) * 0.5;
  const bool north = p.y >= (r.min_y + r.max_y) * 0.5;
  return (north ? 0 : 2) + (east ? 1 : 0);
}

struct BuildNode {
  Rect bbox;
  int depth = 0;
  std::int32_t child[4] = {-1, -1, -1, -1};
  std::vector<std::uint32_t> items;
  std::string path;

  bool is_leaf() const { return child[0] < 0; }
};

}  // namespace

Rect quadrant_rect(const Rect& domain, const std::string& path) {
  Rect r = domain;
  for (char c : path) {
    if (c < '0' || c > '3') throw Error(ErrorCode::kFormat, "leaf path has a character outside 0-3");
    r = child_rect(r, c - '0');
  }
  return r;
}

QuadtreePartitioner QuadtreePartitioner::build(std::span<const Point> sample, const Rect& domain,
                                               const QuadtreeBuildParams& params,
                                               std::string id) {
  if (sample.empty()) throw Error(ErrorCode::kEmptySample, "quadtree build needs a non-empty sample");
  if (params.rdd_partitions < 1 || params.user_max_depth < 1) {
    throw Error(ErrorCode::kInvalidArgument, "depth inputs must be >= 1");
  }
  if (!(domain.width() > 0.0 && domain.height() > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "partitioner domain is degenerate");
  }
  const int tree_depth = std::max(params.rdd_partitions, params.user_max_depth);
  if (tree_depth > kMaxTreeDepth) {
    throw Error(ErrorCode::kInvalidArgument, "tree depth above " + std::to_string(kMaxTreeDepth));
  }
  const std::size_t depth = static_cast<std::size_t>(tree_depth);
  const std::size_t capacity = params.node_capacity > 0
                                   ? params.node_capacity
                                   : std::max<std::size_t>(1, (sample.size() + depth - 1) / depth);

  std::vector<Point> pts(sample.size());
  std::transform(sample.begin(), sample.end(), pts.begin(),
                 [&](Point p) { return domain.clamp(p); });
  std::vector<std::uint32_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (pts[a].x != pts[b].x) return pts[a].x < pts[b].x;
    if (pts[a].y != pts[b].y) return pts[a].y < pts[b].y;
    return a < b;
  });

  std::vector<BuildNode> nodes(1);
  nodes[0].bbox = domain;
  auto descend = [&](Point p) {
    std::int32_t n = 0;
    while (!nodes[static_cast<std::size_t>(n)].is_leaf()) {
      const auto& node = nodes[static_cast<std::size_t>(n)];
      n = node.child[quadrant_of(node.bbox, p)];
    }
    return static_cast<std::size_t>(n);
  };

  for (std::uint32_t idx : order) {
    const Point p = pts[idx];
    std::size_t leaf = descend(p);
    if (nodes[leaf].items.size() > capacity && nodes[leaf].depth < tree_depth) {
      for (int q = 0; q < 4; ++q) {
        BuildNode child;
        child.bbox = child_rect(nodes[leaf].bbox, q);
        child.depth = nodes[leaf].depth + 1;
        child.path = nodes[leaf].path + static_cast<char>('0' + q);
        nodes[leaf].child[q] = static_cast<std::int32_t>(nodes.size());
        nodes.push_back(std::move(child));
      }
      std::vector<std::uint32_t> items = std::move(nodes[leaf].items);
      nodes[leaf].items.clear();
      for (std::uint32_t it : items) {
        const int q = quadrant_of(nodes[leaf].bbox, pts[it]);
        nodes[static_cast<std::size_t>(nodes[leaf].child[q])].items.push_back(it);
      }
      leaf = static_cast<std::size_t>(nodes[leaf].child[quadrant_of(nodes[leaf].bbox, p)]);
    }
    nodes[leaf].items.push_back(idx);
  }

  std::vector<PartitionBlock> leaves;
  for (const BuildNode& n : nodes) {
    if (n.is_leaf()) leaves.push_back({n.path, n.bbox, 0});
  }
  return from_leaves(std::move(id), domain, tree_depth, std::move(leaves));
}

QuadtreePartitioner QuadtreePartitioner::from_leaves(std::string id, const Rect& domain,
                                                     int max_depth,
                                                     std::vector<PartitionBlock> leaves) {
  if (!(domain.width() > 0.0 && domain.height() > 0.0)) {
    throw Error(ErrorCode::kFormat, "field 'domain' is degenerate");
  }
  if (max_depth < 0 || max_depth > kMaxTreeDepth) {
    throw Error(ErrorCode::kFormat, "field 'max_depth' out of range");
  }
  if (leaves.empty()) throw Error(ErrorCode::kFormat, "field 'leaves' is empty");
  QuadtreePartitioner p;
  p.id_ = std::move(id);
  p.domain_ = domain;
  p.max_depth_ = max_depth;
  p.leaves_ = std::move(leaves);
  std::sort(p.leaves_.begin(), p.leaves_.end(),
            [](const PartitionBlock& a, const PartitionBlock& b) { return a.path < b.path; });
  for (std::size_t i = 0; i < p.leaves_.size(); ++i) {
    auto& leaf = p.leaves_[i];
    leaf.block_id = static_cast<std::uint32_t>(i);
    if (leaf.path.size() > static_cast<std::size_t>(max_depth)) {
      throw Error(ErrorCode::kFormat, "leaf '" + leaf.path + "' is deeper than max_depth");
    }
    if (!(quadrant_rect(domain, leaf.path) == leaf.bbox)) {
      throw Error(ErrorCode::kFormat, "leaf '" + leaf.path + "' bbox does not match its path");
    }
  }
  p.index_leaves();
  return p;
}

void QuadtreePartitioner::index_leaves() {
  nodes_.clear();
  if (leaves_.size() == 1 && leaves_[0].path.empty()) {
    root_ = -1;
    return;
  }
  auto new_node = [&](const Rect& bbox) {
    Node n;
    n.bbox = bbox;
    n.mid_x = (bbox.min_x + bbox.max_x) * 0.5;
    n.mid_y = (bbox.min_y + bbox.max_y) * 0.5;
    std::fill(std::begin(n.child), std::end(n.child), kUnset);
    nodes_.push_back(n);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  };
  root_ = new_node(domain_);
  for (const PartitionBlock& leaf : leaves_) {
    if (leaf.path.empty()) throw Error(ErrorCode::kFormat, "root leaf coexists with other leaves");
    std::int32_t n = root_;
    for (std::size_t k = 0; k < leaf.path.size(); ++k) {
      const int q = leaf.path[k] - '0';
      std::int32_t& slot = nodes_[static_cast<std::size_t>(n)].child[q];
      const bool last = k + 1 == leaf.path.size();
      if (last) {
        if (slot != kUnset) throw Error(ErrorCode::kFormat, "leaf '" + leaf.path + "' overlaps");
        slot = -static_cast<std::int32_t>(leaf.block_id) - 1;
      } else {
        if (slot == kUnset) {
          const Rect box = child_rect(nodes_[static_cast<std::size_t>(n)].bbox, q);
          const std::int32_t created = new_node(box);
          nodes_[static_cast<std::size_t>(n)].child[q] = created;
          n = created;
        } else if (slot < 0) {
          throw Error(ErrorCode::kFormat, "leaf '" + leaf.path + "' overlaps");
        } else {
          n = slot;
        }
      }
    }
  }
  for (const Node& n : nodes_) {
    for (std::int32_t c : n.child) {
      if (c == kUnset) throw Error(ErrorCode::kFormat, "leaves do not tile the domain");
    }
  }
}

Point QuadtreePartitioner::prepare(Point p, bool clamp) const {
  if (domain_.contains(p)) return p;
  if (!clamp) throw Error(ErrorCode::kOutOfDomain, "point outside the partitioner domain");
  return domain_.clamp(p);
}

std::uint32_t QuadtreePartitioner::route(Point p, bool clamp) const {
  p = prepare(p, clamp);
  std::int32_t ref = root_;
  while (ref >= 0) {
    const Node& n = nodes_[static_cast<std::size_t>(ref)];
    ref = n.child[(p.y >= n.mid_y ? 0 : 2) + (p.x >= n.mid_x ? 1 : 0)];
  }
  return static_cast<std::uint32_t>(-(ref + 1));
}

std::vector<std::uint32_t> QuadtreePartitioner::route_expanded(Point p, double theta,
                                                               bool clamp) const {
  std::vector<std::uint32_t> out;
  route_expanded(p, theta, out, clamp);
  return out;
}

void QuadtreePartitioner::route_expanded(Point p, double theta, std::vector<std::uint32_t>& out,
                                         bool clamp) const {
  if (!(theta >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "theta must be >= 0");
  p = prepare(p, clamp);
  out.clear();
  if (root_ < 0) {
    out.push_back(0);
    return;
  }
  std::int32_t stack[256];
  std::size_t top = 0;
  stack[top++] = root_;
  while (top > 0) {
    const Node& n = nodes_[static_cast<std::size_t>(stack[--top])];
    for (int q = 3; q >= 0; --q) {
      const std::int32_t c = n.child[q];
      const Rect& box = c >= 0 ? nodes_[static_cast<std::size_t>(c)].bbox
                               : leaves_[static_cast<std::size_t>(-(c + 1))].bbox;
      if (rect_point_distance(box, p) > theta) continue;
      if (c < 0) {
        out.push_back(static_cast<std::uint32_t>(-(c + 1)));
      } else if (top < std::size(stack)) {
        stack[top++] = c;
      } else {
        throw Error(ErrorCode::kInternal, "quadtree traversal stack exhausted");
      }
    }
  }
  std::sort(out.begin(), out.end());
}

std::string QuadtreePartitioner::to_json() const {
  nlohmann::ordered_json j;
  j["id"] = id_;
  j["domain"] = json_util::rect(domain_);
  j["max_depth"] = max_depth_;
  auto leaves = nlohmann::ordered_json::array();
  for (const PartitionBlock& b : leaves_) {
    nlohmann::ordered_json leaf;
    leaf["path"] = b.path;
    leaf["bbox"] = json_util::rect(b.bbox);
    leaves.push_back(std::move(leaf));
  }
  j["leaves"] = std::move(leaves);
  return j.dump(1) + "\n";
}

QuadtreePartitioner QuadtreePartitioner::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kFormat, std::string("partitioner is not valid JSON: ") + e.what());
  }
  const auto id = json_util::get<std::string>(j, "id");
  const Rect domain = json_util::to_rect(json_util::field(j, "domain"), "domain");
  const int max_depth = json_util::get<int>(j, "max_depth");
  const auto& leaves_json = json_util::field(j, "leaves");
  if (!leaves_json.is_array()) throw Error(ErrorCode::kFormat, "field 'leaves' is not an array");
  std::vector<PartitionBlock> leaves;
  for (const auto& l : leaves_json) {
    PartitionBlock b;
    b.path = json_util::get<std::string>(l, "path");
    b.bbox = json_util::to_rect(json_util::field(l, "bbox"), "bbox");
    leaves.push_back(std::move(b));
  }
  return from_leaves(id, domain, max_depth, std::move(leaves));
}

void QuadtreePartitioner::save(const std::filesystem::path& file) const {
  json_util::write_atomic(file, to_json());
}

QuadtreePartitioner QuadtreePartitioner::load(const std::filesystem::path& file) {
  return from_json(json_util::read_text(file));
}

}  // namespace sjreuse
