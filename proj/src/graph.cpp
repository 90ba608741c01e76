#include "cmag/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cmag/error.hpp"
#include "cmag/rng.hpp"

namespace cmag {

std::string_view to_string(NodeType t) noexcept {
  switch (t) {
    case NodeType::Manufacturer: return "manufacturer";
    case NodeType::Product: return "product";
    case NodeType::Attribute: return "attribute";
    case NodeType::Image: return "image";
  }
  return "unknown";
}

NodeType node_type_from_string(std::string_view s) {
  for (NodeType t : kAllNodeTypes) {
    if (to_string(t) == s) return t;
  }
  fail(ErrorCode::InvalidArgument, "unknown node type '" + std::string(s) + "'");
}

namespace relations {

Relation makes() { return {std::string(kMakes), NodeType::Manufacturer, NodeType::Product}; }
Relation has_attribute() {
  return {std::string(kHasAttribute), NodeType::Manufacturer, NodeType::Attribute};
}
Relation has_image() { return {std::string(kHasImage), NodeType::Manufacturer, NodeType::Image}; }

bool is_reverse(std::string_view name) { return name.starts_with(kReversePrefix); }

std::string reverse_name(std::string_view name) {
  if (is_reverse(name)) return std::string(name.substr(kReversePrefix.size()));
  return std::string(kReversePrefix) + std::string(name);
}

Relation reverse_of(const Relation& r) { return {reverse_name(r.name), r.dst, r.src}; }

std::optional<Relation> canonical(std::string_view name) {
  for (const Relation& r : {makes(), has_attribute(), has_image()}) {
    if (r.name == name) return r;
    if (reverse_name(r.name) == name) return reverse_of(r);
  }
  return std::nullopt;
}

}  // namespace relations

namespace {

std::shared_ptr<const HeteroGraph::Adjacency> make_adjacency(const Relation& rel, std::size_t n_src,
                                                             std::size_t n_dst, EdgeList edges) {
  auto adj = std::make_shared<HeteroGraph::Adjacency>();
  adj->relation = rel;
  std::sort(edges.begin(), edges.end());
  adj->out_offsets.assign(n_src + 1, 0);
  adj->in_offsets.assign(n_dst + 1, 0);
  for (const Edge& e : edges) {
    ++adj->out_offsets[e.src + 1];
    ++adj->in_offsets[e.dst + 1];
  }
  std::partial_sum(adj->out_offsets.begin(), adj->out_offsets.end(), adj->out_offsets.begin());
  std::partial_sum(adj->in_offsets.begin(), adj->in_offsets.end(), adj->in_offsets.begin());
  adj->out_targets.resize(edges.size());
  adj->in_sources.resize(edges.size());
  std::vector<std::uint32_t> cursor(adj->in_offsets.begin(), adj->in_offsets.end() - 1);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    adj->out_targets[i] = edges[i].dst;
    // edges are sorted by (src, dst) so sources arrive in ascending order per dst
    adj->in_sources[cursor[edges[i].dst]++] = edges[i].src;
  }
  return adj;
}

void check_types(const Relation& rel) {
  if (auto c = relations::canonical(rel.name); c && (c->src != rel.src || c->dst != rel.dst)) {
    fail(ErrorCode::TypeMismatch, "relation '" + rel.name + "' declared as " +
                                      std::string(to_string(rel.src)) + "->" +
                                      std::string(to_string(rel.dst)) + ", expected " +
                                      std::string(to_string(c->src)) + "->" +
                                      std::string(to_string(c->dst)));
  }
}

}  // namespace

HeteroGraph HeteroGraph::create(const std::array<std::size_t, kNumNodeTypes>& node_counts,
                                std::vector<std::pair<Relation, EdgeList>> relation_edges,
                                std::size_t* duplicates) {
  HeteroGraph g;
  g.node_counts_ = node_counts;
  std::size_t dup = 0;
  for (auto& [rel, edges] : relation_edges) {
    check_types(rel);
    if (g.find(rel.name) >= 0) {
      fail(ErrorCode::RelationCollision, "relation '" + rel.name + "' defined twice");
    }
    const std::size_t n_src = node_counts[index_of(rel.src)];
    const std::size_t n_dst = node_counts[index_of(rel.dst)];
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (edges[i].src >= n_src || edges[i].dst >= n_dst) {
        fail(ErrorCode::DanglingEndpoint,
             "relation '" + rel.name + "' row " + std::to_string(i) + ": edge (" +
                 std::to_string(edges[i].src) + "," + std::to_string(edges[i].dst) +
                 ") out of range for " + std::to_string(n_src) + " " +
                 std::string(to_string(rel.src)) + " / " + std::to_string(n_dst) + " " +
                 std::string(to_string(rel.dst)) + " nodes");
      }
    }
    std::sort(edges.begin(), edges.end());
    const auto last = std::unique(edges.begin(), edges.end());
    dup += static_cast<std::size_t>(edges.end() - last);
    edges.erase(last, edges.end());
    g.adjacency_.push_back(make_adjacency(rel, n_src, n_dst, std::move(edges)));
  }
  if (duplicates) *duplicates = dup;
  return g;
}

std::ptrdiff_t HeteroGraph::find(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < adjacency_.size(); ++i) {
    if (adjacency_[i]->relation.name == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

std::vector<Relation> HeteroGraph::relations() const {
  std::vector<Relation> out;
  for (const auto& a : adjacency_) out.push_back(a->relation);
  return out;
}

std::vector<std::string> HeteroGraph::relation_names() const {
  std::vector<std::string> out;
  for (const auto& a : adjacency_) out.push_back(a->relation.name);
  return out;
}

bool HeteroGraph::has_relation(std::string_view name) const noexcept { return find(name) >= 0; }

const HeteroGraph::Adjacency& HeteroGraph::adjacency(std::string_view name) const {
  const std::ptrdiff_t i = find(name);
  if (i < 0) fail(ErrorCode::UnknownRelation, "no relation '" + std::string(name) + "'");
  return *adjacency_[static_cast<std::size_t>(i)];
}

const Relation& HeteroGraph::relation(std::string_view name) const {
  return adjacency(name).relation;
}

std::vector<const HeteroGraph::Adjacency*> HeteroGraph::incoming(NodeType t) const {
  std::vector<const Adjacency*> out;
  for (const auto& a : adjacency_) {
    if (a->relation.dst == t) out.push_back(a.get());
  }
  return out;
}

std::size_t HeteroGraph::num_edges(std::string_view name) const {
  return adjacency(name).out_targets.size();
}

std::size_t HeteroGraph::total_edges() const noexcept {
  std::size_t n = 0;
  for (const auto& a : adjacency_) n += a->out_targets.size();
  return n;
}

EdgeList HeteroGraph::edges(std::string_view name) const {
  const Adjacency& a = adjacency(name);
  EdgeList out;
  out.reserve(a.out_targets.size());
  for (std::uint32_t s = 0; s + 1 < a.out_offsets.size(); ++s) {
    for (std::uint32_t k = a.out_offsets[s]; k < a.out_offsets[s + 1]; ++k) {
      out.push_back({s, a.out_targets[k]});
    }
  }
  return out;
}

bool HeteroGraph::has_edge(std::string_view name, std::uint32_t src, std::uint32_t dst) const {
  const auto nb = out_neighbors(name, src);
  return std::binary_search(nb.begin(), nb.end(), dst);
}

std::span<const std::uint32_t> HeteroGraph::out_neighbors(std::string_view name,
                                                          std::uint32_t src) const {
  const Adjacency& a = adjacency(name);
  if (src + 1 >= a.out_offsets.size()) fail(ErrorCode::OutOfRange, "source id out of range");
  return {a.out_targets.data() + a.out_offsets[src], a.out_offsets[src + 1] - a.out_offsets[src]};
}

std::span<const std::uint32_t> HeteroGraph::in_neighbors(std::string_view name,
                                                         std::uint32_t dst) const {
  const Adjacency& a = adjacency(name);
  if (dst + 1 >= a.in_offsets.size()) fail(ErrorCode::OutOfRange, "destination id out of range");
  return {a.in_sources.data() + a.in_offsets[dst], a.in_offsets[dst + 1] - a.in_offsets[dst]};
}

HeteroGraph HeteroGraph::with_features(NodeType t, std::shared_ptr<const FeatureMatrix> f) const {
  if (f && f->values.rows() != num_nodes(t)) {
    fail(ErrorCode::ShapeMismatch, "feature rows " + std::to_string(f->values.rows()) +
                                       " != " + std::to_string(num_nodes(t)) + " " +
                                       std::string(to_string(t)) + " nodes");
  }
  HeteroGraph g = *this;
  g.features_[index_of(t)] = std::move(f);
  return g;
}

HeteroGraph HeteroGraph::with_relation(const Relation& relation, EdgeList edges) const {
  check_types(relation);
  const std::size_t n_src = num_nodes(relation.src);
  const std::size_t n_dst = num_nodes(relation.dst);
  for (const Edge& e : edges) {
    if (e.src >= n_src || e.dst >= n_dst) {
      fail(ErrorCode::DanglingEndpoint, "relation '" + relation.name + "': edge out of range");
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  HeteroGraph g = *this;
  auto adj = make_adjacency(relation, n_src, n_dst, std::move(edges));
  if (const std::ptrdiff_t i = find(relation.name); i >= 0) {
    g.adjacency_[static_cast<std::size_t>(i)] = std::move(adj);
  } else {
    g.adjacency_.push_back(std::move(adj));
  }
  return g;
}

HeteroGraph HeteroGraph::without_relation(std::string_view name) const {
  const std::ptrdiff_t i = find(name);
  if (i < 0) fail(ErrorCode::UnknownRelation, "no relation '" + std::string(name) + "'");
  HeteroGraph g = *this;
  g.adjacency_.erase(g.adjacency_.begin() + i);
  return g;
}

HeteroGraph HeteroGraph::with_node_counts(const std::array<std::size_t, kNumNodeTypes>& counts) const {
  std::vector<std::pair<Relation, EdgeList>> rels;
  for (const auto& a : adjacency_) rels.emplace_back(a->relation, edges(a->relation.name));
  return create(counts, std::move(rels));
}

bool operator==(const HeteroGraph& a, const HeteroGraph& b) {
  if (a.node_counts_ != b.node_counts_ || a.adjacency_.size() != b.adjacency_.size()) return false;
  for (std::size_t i = 0; i < a.adjacency_.size(); ++i) {
    const auto& x = *a.adjacency_[i];
    const auto& y = *b.adjacency_[i];
    if (!(x.relation == y.relation) || x.out_offsets != y.out_offsets ||
        x.out_targets != y.out_targets) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

BuildResult build_graph(const std::vector<NodeTable>& node_tables,
                        const std::vector<EdgeTable>& edge_tables) {
  std::array<std::size_t, kNumNodeTypes> counts{};
  std::array<bool, kNumNodeTypes> seen{};
  for (const NodeTable& t : node_tables) {
    if (seen[index_of(t.type)]) {
      fail(ErrorCode::BadFormat, "two node tables for " + std::string(to_string(t.type)));
    }
    seen[index_of(t.type)] = true;
    std::vector<bool> present(t.rows.size(), false);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::uint32_t id = t.rows[r].id;
      if (id >= t.rows.size() || present[id]) {
        fail(ErrorCode::BadFormat, std::string(to_string(t.type)) + " table row " +
                                       std::to_string(r) + ": id " + std::to_string(id) +
                                       " is not part of a dense 0..n-1 id range");
      }
      present[id] = true;
    }
    counts[index_of(t.type)] = t.rows.size();
  }
  std::vector<std::pair<Relation, EdgeList>> rels;
  for (const EdgeTable& t : edge_tables) {
    check_types(t.relation);
    rels.emplace_back(t.relation, t.rows);
  }
  BuildResult out;
  out.graph = HeteroGraph::create(counts, std::move(rels), &out.duplicates_removed);
  if (out.duplicates_removed > 0) {
    warn("build_graph: removed " + std::to_string(out.duplicates_removed) + " duplicate edges");
  }
  return out;
}

EdgeList transpose(std::span<const Edge> edges) {
  EdgeList out;
  out.reserve(edges.size());
  for (const Edge& e : edges) out.push_back({e.dst, e.src});
  std::sort(out.begin(), out.end());
  return out;
}

HeteroGraph add_reverse_edges(const HeteroGraph& g, std::string_view relation) {
  const Relation& rel = g.relation(relation);
  const Relation rev = relations::reverse_of(rel);
  if (g.has_relation(rev.name)) {
    fail(ErrorCode::RelationCollision, "reverse relation '" + rev.name + "' already exists");
  }
  return g.with_relation(rev, transpose(g.edges(relation)));
}

HeteroGraph strip_relations(const HeteroGraph& g, const std::vector<std::string>& keep) {
  for (const std::string& k : keep) {
    if (!g.has_relation(k)) fail(ErrorCode::UnknownRelation, "cannot keep unknown relation '" + k + "'");
  }
  HeteroGraph out = g;
  for (const std::string& name : g.relation_names()) {
    if (std::find(keep.begin(), keep.end(), name) == keep.end()) out = out.without_relation(name);
  }
  return out;
}

ImageSample sample_image_edges(const HeteroGraph& g, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    fail(ErrorCode::OutOfRange, "image sampling ratio must lie in (0, 1], got " + std::to_string(ratio));
  }
  const std::string image_rel(relations::kHasImage);
  EdgeList all = g.edges(image_rel);
  const std::size_t keep = std::min(all.size(), round_half_up(ratio * static_cast<double>(all.size())));
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng::shuffle(order, rng::Stream(seed, "sample_image_edges"));
  order.resize(keep);
  std::sort(order.begin(), order.end());

  EdgeList kept;
  kept.reserve(keep);
  for (std::size_t idx : order) kept.push_back(all[idx]);

  const std::size_t n_img = g.num_nodes(NodeType::Image);
  std::vector<bool> used(n_img, false);
  for (const Edge& e : kept) used[e.dst] = true;
  ImageSample out;
  std::vector<std::int64_t> remap(n_img, -1);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    if (used[i]) {
      remap[i] = static_cast<std::int64_t>(out.kept_images.size());
      out.kept_images.push_back(i);
    }
  }

  auto counts = g.node_counts();
  counts[index_of(NodeType::Image)] = out.kept_images.size();
  std::vector<std::pair<Relation, EdgeList>> rels;
  for (const Relation& r : g.relations()) {
    EdgeList edges;
    if (r.name == image_rel) {
      edges = kept;
    } else if (r.name == relations::reverse_name(image_rel)) {
      edges = transpose(kept);
    } else {
      edges = g.edges(r.name);
    }
    if (r.src == NodeType::Image || r.dst == NodeType::Image) {
      EdgeList mapped;
      for (const Edge& e : edges) {
        const std::int64_t s = r.src == NodeType::Image ? remap[e.src] : e.src;
        const std::int64_t d = r.dst == NodeType::Image ? remap[e.dst] : e.dst;
        if (s >= 0 && d >= 0) mapped.push_back({static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(d)});
      }
      edges = std::move(mapped);
    }
    rels.emplace_back(r, std::move(edges));
  }
  out.graph = HeteroGraph::create(counts, std::move(rels));
  for (NodeType t : kAllNodeTypes) {
    auto f = g.features(t);
    if (!f) continue;
    if (t == NodeType::Image) {
      std::vector<std::size_t> rows(out.kept_images.begin(), out.kept_images.end());
      f = std::make_shared<const FeatureMatrix>(FeatureMatrix{t, select_rows(f->values, rows)});
    }
    out.graph = out.graph.with_features(t, f);
  }
  return out;
}

std::size_t round_half_up(double x) {
  if (x <= 0.0) return 0;
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

EdgeList sample_negatives(const HeteroGraph& g, std::string_view relation,
                          std::span<const Edge> positives, std::size_t ratio, std::uint64_t seed,
                          std::uint64_t stream) {
  const HeteroGraph::Adjacency& adj = g.adjacency(relation);
  const std::size_t n_src = g.num_nodes(adj.relation.src);
  const std::size_t n_dst = g.num_nodes(adj.relation.dst);
  const std::size_t n_edges = adj.out_targets.size();
  const std::size_t needed = ratio * positives.size();
  const std::size_t non_edges = n_src * n_dst - n_edges;
  if (needed == 0) return {};
  if (non_edges < needed || non_edges == 0) {
    fail(ErrorCode::Saturation, "relation '" + adj.relation.name + "' has " +
                                    std::to_string(non_edges) + " non-edges, " +
                                    std::to_string(needed) + " negatives requested");
  }
  const rng::Stream rs = rng::Stream(seed, "sample_negatives").derive(rng::tag(relation)).derive(stream);
  constexpr std::uint64_t kAttempts = 64;

  const auto out_of = [&](std::uint32_t s) {
    return std::span<const std::uint32_t>(adj.out_targets.data() + adj.out_offsets[s],
                                          adj.out_offsets[s + 1] - adj.out_offsets[s]);
  };
  const auto in_of = [&](std::uint32_t d) {
    return std::span<const std::uint32_t>(adj.in_sources.data() + adj.in_offsets[d],
                                          adj.in_offsets[d + 1] - adj.in_offsets[d]);
  };
  // Uniform draw from [0, n) \ taken (taken is sorted).
  const auto draw_free = [&](std::span<const std::uint32_t> taken, std::size_t n,
                             std::uint64_t q) -> std::uint32_t {
    for (std::uint64_t a = 0; a < kAttempts; ++a) {
      const auto c = static_cast<std::uint32_t>(rs.below(n, q, a));
      if (!std::binary_search(taken.begin(), taken.end(), c)) return c;
    }
    std::vector<std::uint32_t> free;
    free.reserve(n - taken.size());
    for (std::uint32_t c = 0; c < n; ++c) {
      if (!std::binary_search(taken.begin(), taken.end(), c)) free.push_back(c);
    }
    return free[rs.below(free.size(), q, kAttempts)];
  };

  EdgeList out;
  out.reserve(needed);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const Edge p = positives[i];
    if (p.src >= n_src || p.dst >= n_dst) {
      fail(ErrorCode::OutOfRange, "positive edge out of range for relation '" + adj.relation.name + "'");
    }
    for (std::size_t r = 0; r < ratio; ++r) {
      const std::uint64_t q = i * ratio + r;
      const auto taken_dst = out_of(p.src);
      if (taken_dst.size() < n_dst) {
        out.push_back({p.src, draw_free(taken_dst, n_dst, q)});
        continue;
      }
      const auto taken_src = in_of(p.dst);
      if (taken_src.size() < n_src) {
        out.push_back({draw_free(taken_src, n_src, q), p.dst});
        continue;
      }
      fail(ErrorCode::Saturation, "positive (" + std::to_string(p.src) + "," +
                                      std::to_string(p.dst) + ") is saturated on both endpoints");
    }
  }
  return out;
}

EdgeSplit split_edges(const HeteroGraph& g, std::string_view relation, SplitRatios ratios,
                      std::uint64_t seed, std::size_t negative_ratio) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    fail(ErrorCode::InvalidArgument, "split ratios must be nonnegative and sum to 1");
  }
  const EdgeList all = g.edges(relation);
  if (all.size() < 10) {
    fail(ErrorCode::TooFewEdges, "relation '" + std::string(relation) + "' has " +
                                     std::to_string(all.size()) + " edges; at least 10 required");
  }
  const double total = static_cast<double>(all.size());
  const std::size_t n_val = round_half_up(ratios.val * total);
  const std::size_t n_test = round_half_up(ratios.test * total);
  if ((ratios.val > 0 && n_val == 0) || (ratios.test > 0 && n_test == 0) ||
      n_val + n_test >= all.size()) {
    fail(ErrorCode::TooFewEdges, "too few edges to honor the requested split");
  }
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng::shuffle(order, rng::Stream(seed, "split_edges").derive(rng::tag(relation)));

  EdgeSplit split;
  split.relation = g.relation(relation);
  split.seed = seed;
  split.negative_ratio = negative_ratio;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Edge e = all[order[i]];
    if (i < n_val) {
      split.val_pos.push_back(e);
    } else if (i < n_val + n_test) {
      split.test_pos.push_back(e);
    } else {
      split.train_pos.push_back(e);
    }
  }
  std::sort(split.train_pos.begin(), split.train_pos.end());
  std::sort(split.val_pos.begin(), split.val_pos.end());
  std::sort(split.test_pos.begin(), split.test_pos.end());
  split.train_neg = sample_negatives(g, relation, split.train_pos, negative_ratio, seed, 1);
  split.val_neg = sample_negatives(g, relation, split.val_pos, negative_ratio, seed, 2);
  split.test_neg = sample_negatives(g, relation, split.test_pos, negative_ratio, seed, 3);
  return split;
}

}  // namespace cmag
