#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmag/nn/hetero_conv.hpp"

namespace cmag::nn {

struct EncoderConfig {
  std::string name = "enc";
  ConvKind kind = ConvKind::Sage;
  std::array<std::size_t, kNumNodeTypes> input_dims{};  // 0 = type not represented
  /// Width of the per-type input projection; 0 feeds raw features to the
  /// first conv.
  std::size_t projection_dim = 0;
  std::vector<std::size_t> layer_dims;  // one entry per conv
  std::vector<Relation> relations;
  std::size_t heads = 4;  // concatenated on inner layers, averaged on the last
  bool self_loops = true;
  bool residual = false;
  double dropout = 0.0;  // after every inner conv
};

struct ForwardMode {
  bool training = false;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t batch = 0;
};

/// Projection -> conv -> ReLU -> dropout -> ... -> conv (no activation).
class HeteroEncoder {
 public:
  struct Cache {
    TypedMatrices input;
    std::vector<ConvCache> convs;
    std::vector<TypedMatrices> masks;  // dropout scales after each inner conv
  };

  explicit HeteroEncoder(EncoderConfig cfg);

  const EncoderConfig& config() const noexcept { return cfg_; }
  const std::vector<ConvSpec>& convs() const noexcept { return convs_; }
  std::size_t output_dim() const noexcept { return cfg_.layer_dims.back(); }

  void init(ParameterSet& params, std::uint64_t seed) const;

  TypedMatrices forward(const HeteroGraph& g, const TypedMatrices& x, const ParameterSet& params,
                        const ForwardMode& mode, Cache* cache = nullptr) const;

  /// Gradients w.r.t. the raw inputs; parameter gradients are accumulated.
  TypedMatrices backward(const HeteroGraph& g, const Cache& cache, const TypedMatrices& dout,
                         ParameterSet& params) const;

 private:
  EncoderConfig cfg_;
  std::vector<ConvSpec> convs_;

  std::string proj_key(NodeType t, const char* part) const;
};

}  // namespace cmag::nn
