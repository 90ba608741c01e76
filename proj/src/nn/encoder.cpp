#include "cmag/nn/encoder.hpp"

#include "cmag/error.hpp"
#include "cmag/nn/layers.hpp"

namespace cmag::nn {

HeteroEncoder::HeteroEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.layer_dims.empty()) fail(ErrorCode::InvalidArgument, "encoder needs at least one conv layer");
  if (!(cfg_.dropout >= 0.0 && cfg_.dropout < 1.0)) fail(ErrorCode::OutOfRange, "dropout rate must lie in [0, 1)");
  std::array<std::size_t, kNumNodeTypes> dims = cfg_.input_dims;
  if (cfg_.projection_dim > 0) {
    for (auto& d : dims) d = d > 0 ? cfg_.projection_dim : 0;
  }
  const std::size_t n = cfg_.layer_dims.size();
  for (std::size_t l = 0; l < n; ++l) {
    ConvSpec s;
    s.name = cfg_.name + "/conv" + std::to_string(l);
    s.kind = cfg_.kind;
    s.in_dims = dims;
    s.out_dim = cfg_.layer_dims[l];
    s.relations = cfg_.relations;
    s.heads = cfg_.kind == ConvKind::Gat ? cfg_.heads : 1;
    s.concat_heads = l + 1 < n;
    s.self_loops = cfg_.self_loops;
    s.activation = l + 1 < n;
    s.residual = cfg_.residual;
    validate(s);
    convs_.push_back(s);
    for (auto& d : dims) d = d > 0 ? s.out_dim : 0;
  }
}

std::string HeteroEncoder::proj_key(NodeType t, const char* part) const {
  return cfg_.name + "/proj:" + std::string(to_string(t)) + "/" + part;
}

void HeteroEncoder::init(ParameterSet& params, std::uint64_t seed) const {
  if (cfg_.projection_dim > 0) {
    for (NodeType t : kAllNodeTypes) {
      const std::size_t d = cfg_.input_dims[index_of(t)];
      if (d == 0) continue;
      const std::string w = proj_key(t, "W");
      params.add(w, fan_in_uniform(d, cfg_.projection_dim, d, seed, w));
      params.add(proj_key(t, "b"), Matrix(1, cfg_.projection_dim));
    }
  }
  for (const auto& s : convs_) init_conv(s, params, seed);
}

TypedMatrices HeteroEncoder::forward(const HeteroGraph& g, const TypedMatrices& x, const ParameterSet& params,
                                     const ForwardMode& mode, Cache* cache) const {
  if (cache) {
    *cache = Cache{};
    cache->input = x;
  }
  TypedMatrices h;
  for (NodeType t : kAllNodeTypes) {
    const std::size_t ti = index_of(t);
    if (cfg_.input_dims[ti] == 0) continue;
    if (x[ti].empty()) continue;
    if (x[ti].cols() != cfg_.input_dims[ti]) {
      fail(ErrorCode::ShapeMismatch, cfg_.name + ": " + std::string(to_string(t)) + " features have " +
                                         std::to_string(x[ti].cols()) + " columns, expected " +
                                         std::to_string(cfg_.input_dims[ti]));
    }
    h[ti] = cfg_.projection_dim > 0 ? linear_forward(x[ti], params.value(proj_key(t, "W")), params.value(proj_key(t, "b")))
                                    : x[ti];
  }
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    ConvCache* cc = nullptr;
    if (cache) cc = &cache->convs.emplace_back();
    h = conv_forward(convs_[l], g, h, params, cc);
    if (l + 1 < convs_.size()) {
      TypedMatrices masks;
      for (std::size_t ti = 0; ti < kNumNodeTypes; ++ti) {
        if (h[ti].empty()) continue;
        const DropoutKey key{mode.seed, l * kNumNodeTypes + ti, mode.epoch, mode.batch};
        h[ti] = dropout(h[ti], cfg_.dropout, mode.training, key, cache ? &masks[ti] : nullptr);
      }
      if (cache) cache->masks.push_back(std::move(masks));
    }
  }
  return h;
}

TypedMatrices HeteroEncoder::backward(const HeteroGraph& g, const Cache& cache, const TypedMatrices& dout,
                                      ParameterSet& params) const {
  TypedMatrices d = dout;
  for (std::size_t l = convs_.size(); l-- > 0;) {
    if (l + 1 < convs_.size()) {
      const TypedMatrices& masks = cache.masks.at(l);
      for (std::size_t ti = 0; ti < kNumNodeTypes; ++ti) {
        if (!d[ti].empty() && !masks[ti].empty()) d[ti] = dropout_backward(d[ti], masks[ti]);
      }
    }
    d = conv_backward(convs_[l], g, cache.convs.at(l), d, params);
  }
  if (cfg_.projection_dim == 0) return d;
  TypedMatrices dx;
  for (NodeType t : kAllNodeTypes) {
    const std::size_t ti = index_of(t);
    if (d[ti].empty() || cache.input[ti].empty()) continue;
    const LinearGrads lg = linear_backward(cache.input[ti], params.value(proj_key(t, "W")), d[ti]);
    add_inplace(params.grad(proj_key(t, "W")), lg.dw);
    add_inplace(params.grad(proj_key(t, "b")), lg.db);
    dx[ti] = lg.dx;
  }
  return dx;
}

}  // namespace cmag::nn
