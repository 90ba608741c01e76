#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cmag/matrix.hpp"

namespace cmag {

enum class NodeType : std::uint8_t { Manufacturer = 0, Product = 1, Attribute = 2, Image = 3 };

inline constexpr std::size_t kNumNodeTypes = 4;
inline constexpr std::array<NodeType, kNumNodeTypes> kAllNodeTypes = {
    NodeType::Manufacturer, NodeType::Product, NodeType::Attribute, NodeType::Image};

constexpr std::size_t index_of(NodeType t) noexcept { return static_cast<std::size_t>(t); }

std::string_view to_string(NodeType t) noexcept;
NodeType node_type_from_string(std::string_view s);

/// One matrix per node type; an empty matrix means "no features for this type".
using TypedMatrices = std::array<Matrix, kNumNodeTypes>;

/// A feature table bound to the node type whose rows it describes.
struct FeatureMatrix {
  NodeType node_type = NodeType::Manufacturer;
  Matrix values;
};

struct Edge {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

using EdgeList = std::vector<Edge>;

}  // namespace cmag
