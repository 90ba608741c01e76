#include "nn_cases.hpp"

#include <string>

#include "cmag/nn/encoder.hpp"
#include "cmag/nn/gradcheck.hpp"
#include "cmag/nn/layers.hpp"
#include "support.hpp"

using namespace cmag;
using namespace cmag::nn;

namespace testing {

namespace {

const std::string kInput = "input:";

TypedMatrices inputs_from(const ParameterSet& p, const TypedMatrices& like) {
  TypedMatrices x;
  for (NodeType t : kAllNodeTypes) {
    const std::string n = kInput + std::string(to_string(t));
    if (!like[index_of(t)].empty()) x[index_of(t)] = p.value(n);
  }
  return x;
}

double weighted_sum(const TypedMatrices& y, const TypedMatrices& r) {
  double s = 0;
  for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
    for (std::size_t i = 0; i < y[t].size(); ++i) s += y[t].data()[i] * r[t].data()[i];
  }
  return s;
}

}  // namespace

HeteroFixture small_hetero(std::uint64_t seed) {
  HeteroFixture f;
  const Relation makes = relations::makes(), attr = relations::has_attribute();
  HeteroGraph g = HeteroGraph::create({3, 3, 2, 0}, {{makes, {{0, 0}, {0, 1}, {1, 1}, {2, 1}}},
                                                     {attr, {{0, 0}, {1, 0}, {1, 1}}}});
  g = add_reverse_edges(g, "makes");
  g = add_reverse_edges(g, "has_attribute");
  f.g = g;
  f.relations = g.relations();
  f.dims = {5, 4, 3, 0};
  for (NodeType t : {NodeType::Manufacturer, NodeType::Product, NodeType::Attribute}) {
    f.x[index_of(t)] = random_matrix(g.num_nodes(t), f.dims[index_of(t)], seed * 31 + index_of(t));
  }
  return f;
}

double linear_grad_error(std::uint64_t seed) {
  const Matrix x = random_matrix(5, 3, seed), w = random_matrix(3, 4, seed + 1), b = random_matrix(1, 4, seed + 2);
  const Matrix r = random_matrix(5, 4, seed + 3);
  ParameterSet p;
  p.add("x", x);
  p.add("w", w);
  p.add("b", b);
  auto loss = [&](const ParameterSet& q) {
    const Matrix y = linear_forward(q.value("x"), q.value("w"), q.value("b"));
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * r.data()[i];
    return s;
  };
  const LinearGrads lg = linear_backward(x, w, r);
  ParameterSet a = p;
  a.grad("x") = lg.dx;
  a.grad("w") = lg.dw;
  a.grad("b") = lg.db;
  return finite_diff_check(loss, p, a).max_rel_error;
}

double relu_grad_error(std::uint64_t seed) {
  Matrix x = random_matrix(6, 5, seed);
  for (double& v : x.values()) {
    if (std::abs(v) < 1e-3) v = 0.5;  // stay away from the kink
  }
  const Matrix r = random_matrix(6, 5, seed + 1);
  auto f = [&](std::span<const double> pt) {
    double s = 0;
    for (std::size_t i = 0; i < pt.size(); ++i) s += (pt[i] > 0 ? pt[i] : 0.0) * r.data()[i];
    return s;
  };
  const Matrix g = relu_backward(x, r);
  return finite_diff_check(f, x.values(), g.values()).max_rel_error;
}

double dropout_grad_error(std::uint64_t seed, bool training) {
  const Matrix x = random_matrix(7, 6, seed), r = random_matrix(7, 6, seed + 1);
  const DropoutKey key{seed, 1, 2, 3};
  auto f = [&](std::span<const double> pt) {
    const Matrix y = dropout(Matrix(7, 6, std::vector<double>(pt.begin(), pt.end())), 0.5, training, key);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * r.data()[i];
    return s;
  };
  Matrix mask;
  dropout(x, 0.5, training, key, &mask);
  const Matrix g = dropout_backward(r, mask);
  return finite_diff_check(f, x.values(), g.values()).max_rel_error;
}

double decoder_grad_error(std::uint64_t seed) {
  const Matrix zs = random_matrix(4, 6, seed), zd = random_matrix(5, 6, seed + 1);
  const EdgeList edges{{0, 0}, {0, 4}, {3, 2}, {1, 1}, {3, 0}};
  const Matrix r = random_matrix(1, edges.size(), seed + 2);
  ParameterSet p;
  p.add("zs", zs);
  p.add("zd", zd);
  auto loss = [&](const ParameterSet& q) {
    const auto s = dot_decoder(q.value("zs"), q.value("zd"), edges);
    double t = 0;
    for (std::size_t i = 0; i < s.size(); ++i) t += s[i] * r.data()[i];
    return t;
  };
  ParameterSet a = p;
  dot_decoder_backward(zs, zd, edges, r.values(), a.grad("zs"), a.grad("zd"));
  return finite_diff_check(loss, p, a).max_rel_error;
}

double bce_grad_error(std::uint64_t seed) {
  const Matrix s = random_matrix(1, 16, seed, 3.0);
  std::vector<double> y(16);
  for (std::size_t i = 0; i < 16; ++i) y[i] = (i * 7 + seed) % 3 == 0 ? 1.0 : 0.0;
  auto f = [&](std::span<const double> pt) { return weighted_bce(pt, y, 2.5).loss; };
  const LossResult lr = weighted_bce(s.values(), y, 2.5);
  return finite_diff_check(f, s.values(), lr.dscores).max_rel_error;
}

double conv_grad_error(ConvKind kind, std::uint64_t seed, bool last_layer) {
  const HeteroFixture fx = small_hetero(seed);
  ConvSpec spec;
  spec.name = "c";
  spec.kind = kind;
  spec.in_dims = fx.dims;
  spec.out_dim = 4;
  spec.relations = fx.relations;
  spec.heads = kind == ConvKind::Gat ? 2 : 1;
  spec.concat_heads = !last_layer;
  spec.activation = !last_layer;
  ParameterSet p;
  init_conv(spec, p, seed);
  // draw biases away from zero so the check covers them under ReLU
  for (auto& [name, prm] : p) {
    if (name.ends_with("/b")) prm.value = random_matrix(1, prm.value.cols(), seed + 99, 0.3);
  }
  TypedMatrices r;
  for (std::size_t t = 0; t < kNumNodeTypes; ++t) {
    if (fx.dims[t]) r[t] = random_matrix(fx.g.num_nodes(kAllNodeTypes[t]), 4, seed + 50 + t);
  }
  ParameterSet probe = p;
  for (NodeType t : kAllNodeTypes) {
    if (!fx.x[index_of(t)].empty()) probe.add(kInput + std::string(to_string(t)), fx.x[index_of(t)]);
  }
  auto loss = [&](const ParameterSet& q) {
    return weighted_sum(conv_forward(spec, fx.g, inputs_from(q, fx.x), q), r);
  };
  ConvCache cache;
  conv_forward(spec, fx.g, fx.x, p, &cache);
  ParameterSet analytic = probe;
  analytic.zero_grad();
  const TypedMatrices dx = conv_backward(spec, fx.g, cache, r, analytic);
  for (NodeType t : kAllNodeTypes) {
    if (!dx[index_of(t)].empty()) analytic.grad(kInput + std::string(to_string(t))) = dx[index_of(t)];
  }
  return finite_diff_check(loss, probe, analytic).max_rel_error;
}

double model_grad_error(ConvKind kind, std::uint64_t seed) {
  const HeteroFixture fx = small_hetero(seed);
  EncoderConfig cfg;
  cfg.kind = kind;
  cfg.input_dims = fx.dims;
  cfg.projection_dim = 6;
  cfg.layer_dims = {8, 6};
  cfg.relations = fx.relations;
  cfg.heads = 2;
  cfg.dropout = 0.5;
  const HeteroEncoder enc(cfg);
  ParameterSet p;
  enc.init(p, seed);
  const EdgeList pairs{{0, 0}, {1, 1}, {2, 2}, {0, 2}, {2, 0}, {1, 0}};
  const std::vector<double> labels{1, 1, 0, 0, 1, 0};
  const ForwardMode mode{true, seed, 3, 1};
  auto loss = [&](const ParameterSet& q) {
    const TypedMatrices z = enc.forward(fx.g, fx.x, q, mode);
    const auto s = dot_decoder(z[0], z[1], pairs);
    return weighted_bce(s, labels, 1.5).loss;
  };
  HeteroEncoder::Cache cache;
  const TypedMatrices z = enc.forward(fx.g, fx.x, p, mode, &cache);
  const auto s = dot_decoder(z[0], z[1], pairs);
  const LossResult lr = weighted_bce(s, labels, 1.5);
  TypedMatrices dz;
  dz[0] = Matrix(z[0].rows(), z[0].cols());
  dz[1] = Matrix(z[1].rows(), z[1].cols());
  dot_decoder_backward(z[0], z[1], pairs, lr.dscores, dz[0], dz[1]);
  ParameterSet analytic = p;
  analytic.zero_grad();
  enc.backward(fx.g, cache, dz, analytic);
  return finite_diff_check(loss, p, analytic).max_rel_error;
}

}  // namespace testing
