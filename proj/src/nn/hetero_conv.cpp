#include "cmag/nn/hetero_conv.hpp"

#include <algorithm>
#include <cmath>

#include "cmag/error.hpp"
#include "cmag/kernels.hpp"
#include "cmag/nn/layers.hpp"

namespace cmag::nn {

namespace {

std::string key(const ConvSpec& s, std::string_view a, std::string_view b) {
  return s.name + "/" + std::string(a) + "/" + std::string(b);
}

std::string root_key(const ConvSpec& s, NodeType t, std::string_view b) {
  return s.name + "/root:" + std::string(to_string(t)) + "/" + std::string(b);
}

std::string self_key(const ConvSpec& s, NodeType t, std::string_view b) {
  return s.name + "/self:" + std::string(to_string(t)) + "/" + std::string(b);
}

std::string head_key(const ConvSpec& s, std::string_view rel, std::size_t h, std::string_view b) {
  return s.name + "/" + std::string(rel) + "/h" + std::to_string(h) + "/" + std::string(b);
}

std::size_t head_dim(const ConvSpec& s) { return s.concat_heads ? s.out_dim / s.heads : s.out_dim; }

bool spec_has_incoming(const ConvSpec& s, NodeType t) {
  return std::any_of(s.relations.begin(), s.relations.end(), [&](const Relation& r) { return r.dst == t; });
}

const Relation* spec_relation(const ConvSpec& s, std::string_view name) {
  for (const auto& r : s.relations) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

Matrix mean_aggregate(const HeteroGraph::Adjacency& a, const Matrix& xs, std::size_t n_dst) {
  Matrix agg(n_dst, xs.cols());
  for (std::size_t i = 0; i < n_dst; ++i) {
    const std::uint32_t b = a.in_offsets[i], e = a.in_offsets[i + 1];
    if (b == e) continue;
    double* out = agg.row(i).data();
    for (std::uint32_t k = b; k < e; ++k) kernels::axpy(1.0, xs.row(a.in_sources[k]).data(), out, xs.cols());
    const double inv = 1.0 / static_cast<double>(e - b);
    for (std::size_t c = 0; c < xs.cols(); ++c) out[c] *= inv;
  }
  return agg;
}

void mean_aggregate_backward(const HeteroGraph::Adjacency& a, const Matrix& dagg, Matrix& dxs) {
  for (std::size_t i = 0; i + 1 < a.in_offsets.size(); ++i) {
    const std::uint32_t b = a.in_offsets[i], e = a.in_offsets[i + 1];
    if (b == e) continue;
    const double inv = 1.0 / static_cast<double>(e - b);
    for (std::uint32_t k = b; k < e; ++k) kernels::axpy(inv, dagg.row(i).data(), dxs.row(a.in_sources[k]).data(), dagg.cols());
  }
}

void check_input(const ConvSpec& s, const HeteroGraph& g, const TypedMatrices& x, NodeType t) {
  const Matrix& m = x[index_of(t)];
  if (m.empty() && g.num_nodes(t) > 0) {
    fail(ErrorCode::MissingModality, s.name + ": no input features for node type " + std::string(to_string(t)));
  }
  if (m.rows() != g.num_nodes(t) || m.cols() != s.in_dims[index_of(t)]) {
    fail(ErrorCode::ShapeMismatch, s.name + ": input for " + std::string(to_string(t)) + " is " +
                                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                                       std::to_string(g.num_nodes(t)) + "x" + std::to_string(s.in_dims[index_of(t)]));
  }
}

/// Relations of g that enter t, checked against the layer.
std::vector<const HeteroGraph::Adjacency*> active_incoming(const ConvSpec& s, const HeteroGraph& g, NodeType t) {
  std::vector<const HeteroGraph::Adjacency*> out;
  for (const auto* a : g.incoming(t)) {
    const Relation* r = spec_relation(s, a->relation.name);
    if (!r) fail(ErrorCode::UnknownRelation, s.name + ": no parameters for relation '" + a->relation.name + "'");
    if (r->src != a->relation.src || r->dst != a->relation.dst) {
      fail(ErrorCode::TypeMismatch, s.name + ": relation '" + a->relation.name + "' endpoint types differ");
    }
    if (s.in_dims[index_of(r->src)] == 0) {
      fail(ErrorCode::MissingModality, s.name + ": source type of '" + r->name + "' has no representation");
    }
    out.push_back(a);
  }
  return out;
}

void gat_head_forward(const ConvSpec& s, const HeteroGraph::Adjacency& a, const Matrix& xs, const Matrix& xd,
                      const ParameterSet& p, std::size_t h, GatHeadCache& hc, Matrix& out, double out_scale,
                      std::size_t col0) {
  const std::string& rel = a.relation.name;
  const Matrix& a_src = p.value(head_key(s, rel, h, "a_src"));
  const Matrix& a_dst = p.value(head_key(s, rel, h, "a_dst"));
  const std::size_t dh = head_dim(s);
  hc.gs = matmul(xs, p.value(head_key(s, rel, h, "W_src")));
  hc.gd = matmul(xd, p.value(head_key(s, rel, h, "W_dst")));
  const std::size_t n_dst = xd.rows();
  std::vector<double> ss(xs.rows()), sd(n_dst), sself(n_dst);
  for (std::size_t j = 0; j < xs.rows(); ++j) ss[j] = kernels::dot(hc.gs.row(j).data(), a_src.data(), dh);
  for (std::size_t i = 0; i < n_dst; ++i) {
    sd[i] = kernels::dot(hc.gd.row(i).data(), a_dst.data(), dh);
    sself[i] = kernels::dot(hc.gd.row(i).data(), a_src.data(), dh);
  }
  const std::uint32_t self = s.self_loops ? 1u : 0u;
  hc.offsets.assign(n_dst + 1, 0);
  for (std::size_t i = 0; i < n_dst; ++i) {
    hc.offsets[i + 1] = hc.offsets[i] + (a.in_offsets[i + 1] - a.in_offsets[i]) + self;
  }
  hc.logits.assign(hc.offsets.back(), 0.0);
  hc.alpha.assign(hc.offsets.back(), 0.0);
  std::vector<double> acc(dh);
  for (std::size_t i = 0; i < n_dst; ++i) {
    const std::uint32_t b = a.in_offsets[i], deg = a.in_offsets[i + 1] - b;
    const std::uint32_t c0 = hc.offsets[i], nc = hc.offsets[i + 1] - c0;
    if (nc == 0) continue;
    double mx = -INFINITY;
    for (std::uint32_t c = 0; c < nc; ++c) {
      const double u = sd[i] + (c < deg ? ss[a.in_sources[b + c]] : sself[i]);
      hc.logits[c0 + c] = u;
      mx = std::max(mx, leaky_relu(u));
    }
    double z = 0.0;
    for (std::uint32_t c = 0; c < nc; ++c) {
      const double e = std::exp(leaky_relu(hc.logits[c0 + c]) - mx);
      hc.alpha[c0 + c] = e;
      z += e;
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::uint32_t c = 0; c < nc; ++c) {
      hc.alpha[c0 + c] /= z;
      const double* msg = c < deg ? hc.gs.row(a.in_sources[b + c]).data() : hc.gd.row(i).data();
      kernels::axpy(hc.alpha[c0 + c], msg, acc.data(), dh);
    }
    double* o = out.row(i).data() + col0;
    for (std::size_t c = 0; c < dh; ++c) o[c] += out_scale * acc[c];
  }
}

void gat_head_backward(const ConvSpec& s, const HeteroGraph::Adjacency& a, const Matrix& xs, const Matrix& xd,
                       ParameterSet& p, std::size_t h, const GatHeadCache& hc, const Matrix& dout,
                       double out_scale, std::size_t col0, Matrix& dxs, Matrix& dxd) {
  const std::string& rel = a.relation.name;
  const Matrix& a_src = p.value(head_key(s, rel, h, "a_src"));
  const Matrix& a_dst = p.value(head_key(s, rel, h, "a_dst"));
  const std::size_t dh = head_dim(s);
  const std::size_t n_dst = xd.rows();
  Matrix dgs(xs.rows(), dh), dgd(n_dst, dh);
  std::vector<double> dss(xs.rows(), 0.0), dsd(n_dst, 0.0), dsself(n_dst, 0.0);
  std::vector<double> dalpha;
  std::vector<double> dov(dh);
  for (std::size_t i = 0; i < n_dst; ++i) {
    const std::uint32_t b = a.in_offsets[i], deg = a.in_offsets[i + 1] - b;
    const std::uint32_t c0 = hc.offsets[i], nc = hc.offsets[i + 1] - c0;
    if (nc == 0) continue;
    const double* dorow = dout.row(i).data() + col0;
    for (std::size_t c = 0; c < dh; ++c) dov[c] = out_scale * dorow[c];
    dalpha.assign(nc, 0.0);
    double weighted = 0.0;
    for (std::uint32_t c = 0; c < nc; ++c) {
      const bool nb = c < deg;
      const double* msg = nb ? hc.gs.row(a.in_sources[b + c]).data() : hc.gd.row(i).data();
      dalpha[c] = kernels::dot(dov.data(), msg, dh);
      weighted += hc.alpha[c0 + c] * dalpha[c];
      double* dmsg = nb ? dgs.row(a.in_sources[b + c]).data() : dgd.row(i).data();
      kernels::axpy(hc.alpha[c0 + c], dov.data(), dmsg, dh);
    }
    for (std::uint32_t c = 0; c < nc; ++c) {
      const double de = hc.alpha[c0 + c] * (dalpha[c] - weighted);
      const double du = de * (hc.logits[c0 + c] > 0 ? 1.0 : kLeakySlope);
      dsd[i] += du;
      if (c < deg) {
        dss[a.in_sources[b + c]] += du;
      } else {
        dsself[i] += du;
      }
    }
  }
  Matrix& da_src = p.grad(head_key(s, rel, h, "a_src"));
  Matrix& da_dst = p.grad(head_key(s, rel, h, "a_dst"));
  for (std::size_t j = 0; j < xs.rows(); ++j) {
    if (dss[j] == 0.0) continue;
    kernels::axpy(dss[j], a_src.data(), dgs.row(j).data(), dh);
    kernels::axpy(dss[j], hc.gs.row(j).data(), da_src.data(), dh);
  }
  for (std::size_t i = 0; i < n_dst; ++i) {
    kernels::axpy(dsd[i], a_dst.data(), dgd.row(i).data(), dh);
    kernels::axpy(dsd[i], hc.gd.row(i).data(), da_dst.data(), dh);
    if (dsself[i] != 0.0) {
      kernels::axpy(dsself[i], a_src.data(), dgd.row(i).data(), dh);
      kernels::axpy(dsself[i], hc.gd.row(i).data(), da_src.data(), dh);
    }
  }
  const std::string ws = head_key(s, rel, h, "W_src"), wd = head_key(s, rel, h, "W_dst");
  matmul_tn_acc(xs, dgs, p.grad(ws));
  matmul_nt_acc(dgs, p.value(ws), dxs);
  matmul_tn_acc(xd, dgd, p.grad(wd));
  matmul_nt_acc(dgd, p.value(wd), dxd);
}

}  // namespace

std::string_view to_string(ConvKind k) noexcept {
  switch (k) {
    case ConvKind::Sage: return "sage";
    case ConvKind::Gat: return "gat";
    case ConvKind::Rgcn: return "rgcn";
  }
  return "?";
}

ConvKind conv_kind_from_string(std::string_view s) {
  if (s == "sage" || s == "graphsage") return ConvKind::Sage;
  if (s == "gat") return ConvKind::Gat;
  if (s == "rgcn") return ConvKind::Rgcn;
  fail(ErrorCode::InvalidArgument, "unknown layer kind '" + std::string(s) + "'");
}

void validate(const ConvSpec& s) {
  if (s.out_dim == 0) fail(ErrorCode::InvalidArgument, s.name + ": output width must be positive");
  if (s.kind == ConvKind::Gat) {
    if (s.heads == 0) fail(ErrorCode::InvalidArgument, s.name + ": need at least one attention head");
    if (s.concat_heads && s.out_dim % s.heads != 0) {
      fail(ErrorCode::InvalidArgument, s.name + ": width " + std::to_string(s.out_dim) +
                                           " is not divisible by " + std::to_string(s.heads) + " heads");
    }
  }
  for (std::size_t i = 0; i < s.relations.size(); ++i) {
    for (std::size_t j = i + 1; j < s.relations.size(); ++j) {
      if (s.relations[i].name == s.relations[j].name) {
        fail(ErrorCode::RelationCollision, s.name + ": relation '" + s.relations[i].name + "' listed twice");
      }
    }
  }
}

void init_conv(const ConvSpec& s, ParameterSet& p, std::uint64_t seed) {
  validate(s);
  const std::size_t out = s.out_dim;
  auto zeros = [&](std::size_t n) { return Matrix(1, n); };
  for (const Relation& r : s.relations) {
    const std::size_t ds = s.in_dims[index_of(r.src)], dd = s.in_dims[index_of(r.dst)];
    if (ds == 0 || dd == 0) continue;
    switch (s.kind) {
      case ConvKind::Sage: {
        const std::string ws = key(s, r.name, "W_self"), wn = key(s, r.name, "W_neigh");
        p.add(ws, fan_in_uniform(dd, out, dd, seed, ws));
        p.add(wn, fan_in_uniform(ds, out, ds, seed, wn));
        p.add(key(s, r.name, "b"), zeros(out));
        break;
      }
      case ConvKind::Gat: {
        const std::size_t dh = head_dim(s);
        for (std::size_t h = 0; h < s.heads; ++h) {
          const std::string ws = head_key(s, r.name, h, "W_src"), wd = head_key(s, r.name, h, "W_dst");
          const std::string as = head_key(s, r.name, h, "a_src"), ad = head_key(s, r.name, h, "a_dst");
          p.add(ws, fan_in_uniform(ds, dh, ds, seed, ws));
          p.add(wd, fan_in_uniform(dd, dh, dd, seed, wd));
          p.add(as, fan_in_uniform(1, dh, dh, seed, as));
          p.add(ad, fan_in_uniform(1, dh, dh, seed, ad));
        }
        p.add(key(s, r.name, "b"), zeros(out));
        break;
      }
      case ConvKind::Rgcn: {
        const std::string w = key(s, r.name, "W");
        p.add(w, fan_in_uniform(ds, out, ds, seed, w));
        break;
      }
    }
  }
  for (NodeType t : kAllNodeTypes) {
    const std::size_t d = s.in_dims[index_of(t)];
    if (d == 0) continue;
    if (s.kind == ConvKind::Rgcn) {
      const std::string w = self_key(s, t, "W");
      p.add(w, fan_in_uniform(d, out, d, seed, w));
      p.add(self_key(s, t, "b"), zeros(out));
    } else if (!spec_has_incoming(s, t)) {
      const std::string w = root_key(s, t, "W");
      p.add(w, fan_in_uniform(d, out, d, seed, w));
      p.add(root_key(s, t, "b"), zeros(out));
    }
  }
}

TypedMatrices conv_forward(const ConvSpec& s, const HeteroGraph& g, const TypedMatrices& x,
                           const ParameterSet& p, ConvCache* cache) {
  TypedMatrices y;
  ConvCache local;
  ConvCache& c = cache ? *cache : local;
  c = ConvCache{};
  if (cache) c.input = x;
  for (NodeType t : kAllNodeTypes) {
    const std::size_t ti = index_of(t);
    if (s.in_dims[ti] == 0) continue;
    const auto incoming = active_incoming(s, g, t);
    const bool has_fallback = s.kind != ConvKind::Rgcn && p.contains(root_key(s, t, "W"));
    if (incoming.empty() && s.kind != ConvKind::Rgcn && !has_fallback) continue;
    check_input(s, g, x, t);
    const Matrix& xt = x[ti];
    Matrix pre(g.num_nodes(t), s.out_dim);
    if (s.kind == ConvKind::Rgcn) {
      pre = linear_forward(xt, p.value(self_key(s, t, "W")), p.value(self_key(s, t, "b")));
    } else if (incoming.empty()) {
      pre = linear_forward(xt, p.value(root_key(s, t, "W")), p.value(root_key(s, t, "b")));
    }
    const double rel_scale = s.kind == ConvKind::Rgcn ? 1.0 : 1.0 / static_cast<double>(std::max<std::size_t>(1, incoming.size()));
    for (const auto* a : incoming) {
      const std::string& rel = a->relation.name;
      const NodeType st = a->relation.src;
      check_input(s, g, x, st);
      const Matrix& xs = x[index_of(st)];
      RelationCache rc;
      rc.relation = rel;
      Matrix out(g.num_nodes(t), s.out_dim);
      switch (s.kind) {
        case ConvKind::Sage:
          rc.agg = mean_aggregate(*a, xs, g.num_nodes(t));
          out = matmul(xt, p.value(key(s, rel, "W_self")));
          matmul_acc(rc.agg, p.value(key(s, rel, "W_neigh")), out);
          add_row_broadcast(out, p.value(key(s, rel, "b")).values());
          break;
        case ConvKind::Gat: {
          rc.heads.resize(s.heads);
          const double hs = s.concat_heads ? 1.0 : 1.0 / static_cast<double>(s.heads);
          for (std::size_t h = 0; h < s.heads; ++h) {
            gat_head_forward(s, *a, xs, xt, p, h, rc.heads[h], out, hs, s.concat_heads ? h * head_dim(s) : 0);
          }
          add_row_broadcast(out, p.value(key(s, rel, "b")).values());
          break;
        }
        case ConvKind::Rgcn:
          rc.agg = mean_aggregate(*a, xs, g.num_nodes(t));
          out = matmul(rc.agg, p.value(key(s, rel, "W")));
          break;
      }
      add_inplace(pre, out, rel_scale);
      if (cache) c.relations.push_back(std::move(rc));
    }
    Matrix yt = s.activation ? relu(pre) : pre;
    if (s.residual && s.in_dims[ti] == s.out_dim) add_inplace(yt, xt);
    c.has_output[ti] = true;
    if (cache) c.pre[ti] = std::move(pre);
    y[ti] = std::move(yt);
  }
  return y;
}

TypedMatrices conv_backward(const ConvSpec& s, const HeteroGraph& g, const ConvCache& c,
                            const TypedMatrices& dy, ParameterSet& p) {
  TypedMatrices dx;
  for (NodeType t : kAllNodeTypes) {
    const std::size_t ti = index_of(t);
    if (!c.input[ti].empty()) dx[ti] = Matrix(c.input[ti].rows(), c.input[ti].cols());
  }
  std::size_t rel_cursor = 0;
  for (NodeType t : kAllNodeTypes) {
    const std::size_t ti = index_of(t);
    if (!c.has_output[ti]) continue;
    const auto incoming = active_incoming(s, g, t);
    const Matrix& xt = c.input[ti];
    if (dy[ti].empty()) {
      rel_cursor += incoming.size();
      continue;
    }
    if (dy[ti].rows() != g.num_nodes(t) || dy[ti].cols() != s.out_dim) {
      fail(ErrorCode::ShapeMismatch, s.name + ": upstream gradient shape mismatch for " + std::string(to_string(t)));
    }
    if (s.residual && s.in_dims[ti] == s.out_dim) add_inplace(dx[ti], dy[ti]);
    const Matrix dpre = s.activation ? relu_backward(c.pre[ti], dy[ti]) : dy[ti];
    auto linear_back = [&](const std::string& w, const std::string& b) {
      matmul_tn_acc(xt, dpre, p.grad(w));
      add_column_sums(dpre, p.grad(b));
      matmul_nt_acc(dpre, p.value(w), dx[ti]);
    };
    if (s.kind == ConvKind::Rgcn) {
      linear_back(self_key(s, t, "W"), self_key(s, t, "b"));
    } else if (incoming.empty()) {
      linear_back(root_key(s, t, "W"), root_key(s, t, "b"));
    }
    const double rel_scale = s.kind == ConvKind::Rgcn ? 1.0 : 1.0 / static_cast<double>(std::max<std::size_t>(1, incoming.size()));
    Matrix dout = dpre;
    if (rel_scale != 1.0) {
      for (double& v : dout.values()) v *= rel_scale;
    }
    for (const auto* a : incoming) {
      const RelationCache& rc = c.relations.at(rel_cursor++);
      const std::string& rel = a->relation.name;
      const std::size_t si = index_of(a->relation.src);
      const Matrix& xs = c.input[si];
      switch (s.kind) {
        case ConvKind::Sage: {
          const std::string ws = key(s, rel, "W_self"), wn = key(s, rel, "W_neigh");
          matmul_tn_acc(xt, dout, p.grad(ws));
          matmul_nt_acc(dout, p.value(ws), dx[ti]);
          matmul_tn_acc(rc.agg, dout, p.grad(wn));
          add_column_sums(dout, p.grad(key(s, rel, "b")));
          mean_aggregate_backward(*a, matmul_nt(dout, p.value(wn)), dx[si]);
          break;
        }
        case ConvKind::Gat: {
          add_column_sums(dout, p.grad(key(s, rel, "b")));
          const double hs = s.concat_heads ? 1.0 : 1.0 / static_cast<double>(s.heads);
          for (std::size_t h = 0; h < s.heads; ++h) {
            gat_head_backward(s, *a, xs, xt, p, h, rc.heads[h], dout, hs, s.concat_heads ? h * head_dim(s) : 0,
                              dx[si], dx[ti]);
          }
          break;
        }
        case ConvKind::Rgcn: {
          const std::string w = key(s, rel, "W");
          matmul_tn_acc(rc.agg, dout, p.grad(w));
          mean_aggregate_backward(*a, matmul_nt(dout, p.value(w)), dx[si]);
          break;
        }
      }
    }
  }
  return dx;
}

std::span<const double> attention_weights(const ConvCache& c, std::string_view relation, std::size_t head,
                                          std::uint32_t dst) {
  for (const auto& rc : c.relations) {
    if (rc.relation != relation) continue;
    if (head >= rc.heads.size()) fail(ErrorCode::OutOfRange, "attention head out of range");
    const GatHeadCache& hc = rc.heads[head];
    if (static_cast<std::size_t>(dst) + 1 >= hc.offsets.size()) {
      fail(ErrorCode::OutOfRange, "attention destination out of range");
    }
    return std::span<const double>(hc.alpha).subspan(hc.offsets[dst], hc.offsets[dst + 1] - hc.offsets[dst]);
  }
  fail(ErrorCode::UnknownRelation, "no attention recorded for relation '" + std::string(relation) + "'");
}

}  // namespace cmag::nn
