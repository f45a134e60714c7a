#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "semcomp/features.hpp"
#include "semcomp/types.hpp"

namespace semcomp {

struct GraphEdge {
  std::size_t a = 0;  ///< a < b
  std::size_t b = 0;
  std::size_t shared_count = 0;
  std::vector<std::string> top_shared;  ///< ranked by |N[i,a]| + |N[i,b]|

  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct ComponentGraph {
  std::vector<ComponentMeta> nodes;
  std::vector<GraphEdge> edges;  ///< sorted by (a, b)
  std::size_t k = 0;

  /// Edge between two components in either order, or nullptr.
  const GraphEdge* find_edge(std::size_t a, std::size_t b) const;
  const ComponentMeta* find_node(std::size_t id) const;
};

struct GraphOptions {
  std::size_t k = 20;
  std::size_t words_per_edge = 5;  ///< ranked shared words kept per edge
};

/// Edge (a, b) iff more than k words are active in both components.
ComponentGraph build_graph(const BinaryFeatureMatrix& b, const std::vector<ComponentMeta>& metas,
                           const Vocabulary& vocab, const RepresentationMatrix& n, const GraphOptions& options);

struct RingNode {
  std::size_t id = 0;
  double angle = 0.0;  ///< radians on the unit circle
  std::size_t shared_count = 0;
};

struct LayoutEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  std::vector<std::string> words;
};

/// Words active in the center and two neighbouring ring components.
struct TriangleNode {
  std::size_t a = 0;
  std::size_t b = 0;
  std::vector<std::string> words;
};

struct OverflowEntry {
  std::size_t id = 0;
  std::size_t shared_count = 0;
  std::vector<std::string> words;
};

struct EgoLayout {
  std::size_t center = 0;
  std::vector<RingNode> ring;
  std::vector<OverflowEntry> overflow;
  std::vector<LayoutEdge> edges;  ///< center spokes first, then ring-to-ring
  std::vector<TriangleNode> triangles;
  std::vector<ComponentMeta> metas;  ///< center, ring and overflow components
};

struct EgoOptions {
  std::size_t ring_capacity = 13;
  std::size_t labels_per_edge = 3;
  std::size_t overflow_words = 5;
};

/// Neighbours ordered by shared_count (descending, ties by id). The first
/// ring_capacity go on the ring starting at pi/2 and proceeding clockwise.
/// Ring-to-ring edges are drawn between adjacent ring positions that are
/// connected in the graph.
EgoLayout ego_subgraph(const ComponentGraph& g, std::size_t center, const EgoOptions& options = {});

/// Fills layout.triangles for adjacent ring pairs sharing at least one word
/// with the center; at most `max_words` words, ranked by summed |N|.
void annotate_triangles(EgoLayout& layout, const BinaryFeatureMatrix& b, const Vocabulary& vocab,
                        const RepresentationMatrix& n, std::size_t max_words = 3);

std::string export_dot(const ComponentGraph& g, std::size_t labels_per_edge = 3);
std::string export_dot(const EgoLayout& layout);
std::string export_json(const ComponentGraph& g);
std::string export_json(const EgoLayout& layout);
std::string export_tikz(const EgoLayout& layout);

ComponentGraph graph_from_json(const nlohmann::json& j);

}  // namespace semcomp
