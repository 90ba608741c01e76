#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmag/graph.hpp"
#include "cmag/nn/params.hpp"

namespace cmag::nn {

enum class ConvKind { Sage, Gat, Rgcn };

std::string_view to_string(ConvKind k) noexcept;
ConvKind conv_kind_from_string(std::string_view s);

/// One heterogeneous message-passing layer.
///
/// SAGE and GAT run one sub-layer per relation and average the results over
/// the relations entering each destination type. RGCN sums relation
/// messages onto a type-specific self transform. A type with a
/// representation but no incoming relation gets a plain linear map.
struct ConvSpec {
  std::string name;  // parameter prefix
  ConvKind kind = ConvKind::Sage;
  std::array<std::size_t, kNumNodeTypes> in_dims{};  // 0 = type has no representation
  std::size_t out_dim = 0;
  std::vector<Relation> relations;
  // GAT only
  std::size_t heads = 1;
  bool concat_heads = true;  // false: heads are averaged
  bool self_loops = true;
  bool activation = false;  // ReLU
  bool residual = false;    // y += x where widths agree
};

void validate(const ConvSpec& spec);
void init_conv(const ConvSpec& spec, ParameterSet& params, std::uint64_t seed);

struct GatHeadCache {
  Matrix gs;  // source projections
  Matrix gd;  // destination projections
  // Per destination i, candidates are in_neighbors(i) followed by i itself
  // when self loops are on; offsets index u/alpha.
  std::vector<std::uint32_t> offsets;
  std::vector<double> logits;  // pre-LeakyReLU
  std::vector<double> alpha;
};

struct RelationCache {
  std::string relation;
  Matrix agg;  // SAGE / RGCN neighbour mean
  std::vector<GatHeadCache> heads;
};

struct ConvCache {
  TypedMatrices input;
  TypedMatrices pre;  // before activation and residual
  std::array<bool, kNumNodeTypes> has_output{};
  std::vector<RelationCache> relations;
};

/// Types without an output come back as empty matrices.
TypedMatrices conv_forward(const ConvSpec& spec, const HeteroGraph& g, const TypedMatrices& x,
                           const ParameterSet& params, ConvCache* cache = nullptr);

/// Accumulates parameter gradients and returns d(loss)/d(input).
TypedMatrices conv_backward(const ConvSpec& spec, const HeteroGraph& g, const ConvCache& cache,
                            const TypedMatrices& dy, ParameterSet& params);

/// Attention over the candidates of destination `dst` (in-neighbours in
/// order, then the node itself if self loops are on).
std::span<const double> attention_weights(const ConvCache& cache, std::string_view relation,
                                          std::size_t head, std::uint32_t dst);

}  // namespace cmag::nn
