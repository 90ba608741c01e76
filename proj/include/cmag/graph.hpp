#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmag/types.hpp"

namespace cmag {

struct Relation {
  std::string name;
  NodeType src = NodeType::Manufacturer;
  NodeType dst = NodeType::Product;
  friend bool operator==(const Relation&, const Relation&) = default;
};

namespace relations {
inline constexpr std::string_view kMakes = "makes";
inline constexpr std::string_view kHasAttribute = "has_attribute";
inline constexpr std::string_view kHasImage = "has_image";
inline constexpr std::string_view kReversePrefix = "rev_";

Relation makes();
Relation has_attribute();
Relation has_image();
std::string reverse_name(std::string_view name);
Relation reverse_of(const Relation& r);
bool is_reverse(std::string_view name);
/// Endpoint types for the canonical names and their reverses, if known.
std::optional<Relation> canonical(std::string_view name);
}  // namespace relations

/// Typed heterogeneous graph. Immutable: every transformation returns a new
/// value. Per relation it keeps out-adjacency (sorted by src, then dst) and
/// in-adjacency (sorted by dst, then src).
class HeteroGraph {
 public:
  struct Adjacency {
    Relation relation;
    std::vector<std::uint32_t> out_offsets;  // size n_src + 1
    std::vector<std::uint32_t> out_targets;
    std::vector<std::uint32_t> in_offsets;  // size n_dst + 1
    std::vector<std::uint32_t> in_sources;
  };

  HeteroGraph() = default;

  /// Validates endpoints and types and removes duplicate edges (first
  /// occurrence wins). `duplicates` receives the number removed.
  static HeteroGraph create(const std::array<std::size_t, kNumNodeTypes>& node_counts,
                            std::vector<std::pair<Relation, EdgeList>> relation_edges,
                            std::size_t* duplicates = nullptr);

  std::size_t num_nodes(NodeType t) const noexcept { return node_counts_[index_of(t)]; }
  const std::array<std::size_t, kNumNodeTypes>& node_counts() const noexcept { return node_counts_; }

  std::size_t num_relations() const noexcept { return adjacency_.size(); }
  std::vector<Relation> relations() const;
  std::vector<std::string> relation_names() const;
  bool has_relation(std::string_view name) const noexcept;
  const Relation& relation(std::string_view name) const;
  const Adjacency& adjacency(std::string_view name) const;
  /// Relations whose destination type is t, in insertion order.
  std::vector<const Adjacency*> incoming(NodeType t) const;

  std::size_t num_edges(std::string_view name) const;
  std::size_t total_edges() const noexcept;
  EdgeList edges(std::string_view name) const;
  bool has_edge(std::string_view name, std::uint32_t src, std::uint32_t dst) const;
  std::span<const std::uint32_t> out_neighbors(std::string_view name, std::uint32_t src) const;
  std::span<const std::uint32_t> in_neighbors(std::string_view name, std::uint32_t dst) const;

  std::shared_ptr<const FeatureMatrix> features(NodeType t) const noexcept {
    return features_[index_of(t)];
  }
  HeteroGraph with_features(NodeType t, std::shared_ptr<const FeatureMatrix> f) const;

  /// New graph with `name` replaced by (or extended with) the given edges.
  HeteroGraph with_relation(const Relation& relation, EdgeList edges) const;
  HeteroGraph without_relation(std::string_view name) const;
  HeteroGraph with_node_counts(const std::array<std::size_t, kNumNodeTypes>& counts) const;

  friend bool operator==(const HeteroGraph& a, const HeteroGraph& b);

 private:
  std::array<std::size_t, kNumNodeTypes> node_counts_{};
  std::vector<std::shared_ptr<const Adjacency>> adjacency_;
  std::array<std::shared_ptr<const FeatureMatrix>, kNumNodeTypes> features_{};

  std::ptrdiff_t find(std::string_view name) const noexcept;
};

// ---- construction from tables ---------------------------------------------

struct NodeRecord {
  std::uint32_t id = 0;
  std::string name;
  std::string payload;
};

struct NodeTable {
  NodeType type = NodeType::Manufacturer;
  std::vector<NodeRecord> rows;
};

struct EdgeTable {
  Relation relation;
  EdgeList rows;
};

struct BuildResult {
  HeteroGraph graph;
  std::size_t duplicates_removed = 0;
};

/// Node ids in each table must be a permutation of 0..n-1. Duplicate edges
/// are dropped and counted; a dangling endpoint reports its row.
BuildResult build_graph(const std::vector<NodeTable>& node_tables,
                        const std::vector<EdgeTable>& edge_tables);

// ---- transformations -------------------------------------------------------

/// Adds rev_<name> holding exactly the transposed edges. Fails if it exists.
HeteroGraph add_reverse_edges(const HeteroGraph& g, std::string_view relation);

/// Keeps only the listed relations; node counts are untouched.
HeteroGraph strip_relations(const HeteroGraph& g, const std::vector<std::string>& keep);

struct ImageSample {
  HeteroGraph graph;
  /// Old image ids in their new order; new id i corresponds to kept_images[i].
  std::vector<std::uint32_t> kept_images;
};

/// Keeps round(ratio * |has_image|) uniformly chosen image edges and drops
/// the image nodes this leaves isolated, compacting image ids in order.
ImageSample sample_image_edges(const HeteroGraph& g, double ratio, std::uint64_t seed);

// ---- splitting and negatives ----------------------------------------------

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct EdgeSplit {
  Relation relation;
  EdgeList train_pos, val_pos, test_pos;
  EdgeList train_neg, val_neg, test_neg;
  std::uint64_t seed = 0;
  std::size_t negative_ratio = 1;
};

/// round(x) with halves rounded up.
std::size_t round_half_up(double x);

EdgeSplit split_edges(const HeteroGraph& g, std::string_view relation, SplitRatios ratios,
                      std::uint64_t seed, std::size_t negative_ratio = 1);

/// For each positive keeps src and draws dst uniformly from the dst type,
/// rejecting anything in the relation's full edge set. A saturated src falls
/// back to corrupting src; saturation on both sides is an error. `stream`
/// separates independent calls made with the same seed.
EdgeList sample_negatives(const HeteroGraph& g, std::string_view relation,
                          std::span<const Edge> positives, std::size_t ratio, std::uint64_t seed,
                          std::uint64_t stream = 0);

EdgeList transpose(std::span<const Edge> edges);

}  // namespace cmag
