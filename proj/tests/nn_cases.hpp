#pragma once

// Finite-difference scenarios shared by the unit tests and the acceptance
// runner. Each returns the max relative error of analytic vs numeric grads.

#include <cstdint>

#include "cmag/graph.hpp"
#include "cmag/nn/hetero_conv.hpp"

namespace testing {

struct HeteroFixture {
  cmag::HeteroGraph g;
  cmag::TypedMatrices x;
  std::array<std::size_t, cmag::kNumNodeTypes> dims{};
  std::vector<cmag::Relation> relations;
};

/// 3 manufacturers, 3 products, 2 attributes with makes, has_attribute and
/// both reverses; manufacturers receive two relations, one product has no
/// in-neighbours.
HeteroFixture small_hetero(std::uint64_t seed);

double linear_grad_error(std::uint64_t seed);
double relu_grad_error(std::uint64_t seed);
double dropout_grad_error(std::uint64_t seed, bool training);
double decoder_grad_error(std::uint64_t seed);
double bce_grad_error(std::uint64_t seed);
double conv_grad_error(cmag::nn::ConvKind kind, std::uint64_t seed, bool last_layer = false);
/// Projection, two convs with dropout, dot decoder and weighted BCE.
double model_grad_error(cmag::nn::ConvKind kind, std::uint64_t seed);

}  // namespace testing
