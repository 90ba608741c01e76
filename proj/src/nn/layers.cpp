#include "cmag/nn/layers.hpp"

#include <cmath>
#include <string>

#include "cmag/error.hpp"
#include "cmag/kernels.hpp"
#include "cmag/rng.hpp"

namespace cmag::nn {

Matrix linear_forward(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = matmul(x, w);
  if (!b.empty()) add_row_broadcast(y, b.values());
  return y;
}

LinearGrads linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy) {
  LinearGrads g;
  g.dx = matmul_nt(dy, w);
  g.dw = matmul_tn(x, dy);
  g.db = Matrix(1, dy.cols(), column_sums(dy));
  return g;
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = v > 0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& pre_activation, const Matrix& dy) {
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(pre_activation.data()[i] > 0)) dx.data()[i] = 0.0;
  }
  return dx;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Matrix dropout_mask(std::size_t rows, std::size_t cols, double p, const DropoutKey& key) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::OutOfRange, "dropout rate must lie in [0, 1)");
  const rng::Stream rs = rng::Stream(key.seed, "dropout").derive(key.layer).derive(key.epoch).derive(key.batch);
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.data()[i] = rs.uniform(i) < p ? 0.0 : keep;
  return mask;
}

Matrix dropout(const Matrix& x, double p, bool training, const DropoutKey& key, Matrix* mask) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::OutOfRange, "dropout rate must lie in [0, 1)");
  if (!training || p == 0.0) {
    if (mask) *mask = Matrix(x.rows(), x.cols(), 1.0);
    return x;
  }
  Matrix m = dropout_mask(x.rows(), x.cols(), p, key);
  Matrix y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] *= m.data()[i];
  if (mask) *mask = std::move(m);
  return y;
}

Matrix dropout_backward(const Matrix& dy, const Matrix& mask) {
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] *= mask.data()[i];
  return dx;
}

std::vector<double> dot_decoder(const Matrix& src, const Matrix& dst, std::span<const Edge> edges) {
  if (src.cols() != dst.cols()) {
    fail(ErrorCode::ShapeMismatch, "dot_decoder: embedding widths " + std::to_string(src.cols()) +
                                       " vs " + std::to_string(dst.cols()));
  }
  std::vector<double> s(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].src >= src.rows() || edges[e].dst >= dst.rows()) {
      fail(ErrorCode::OutOfRange, "dot_decoder: edge index out of range");
    }
    s[e] = kernels::dot(src.row(edges[e].src).data(), dst.row(edges[e].dst).data(), src.cols());
  }
  return s;
}

void dot_decoder_backward(const Matrix& src, const Matrix& dst, std::span<const Edge> edges,
                          std::span<const double> dscores, Matrix& dsrc, Matrix& ddst) {
  const std::size_t d = src.cols();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    kernels::axpy(dscores[e], dst.row(edges[e].dst).data(), dsrc.row(edges[e].src).data(), d);
    kernels::axpy(dscores[e], src.row(edges[e].src).data(), ddst.row(edges[e].dst).data(), d);
  }
}

LossResult weighted_bce(std::span<const double> logits, std::span<const double> labels, double pos_weight) {
  if (logits.empty()) fail(ErrorCode::EmptyInput, "weighted_bce: empty batch");
  if (logits.size() != labels.size()) fail(ErrorCode::ShapeMismatch, "weighted_bce: length mismatch");
  LossResult r;
  r.dscores.resize(logits.size());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double s = logits[i];
    const double y = labels[i];
    // -log sigma(s) = softplus(-s), -log(1 - sigma(s)) = softplus(s)
    total += pos_weight * y * softplus(-s) + (1.0 - y) * softplus(s);
    const double sig = s >= 0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
    r.dscores[i] = (-pos_weight * y * (1.0 - sig) + (1.0 - y) * sig) * inv_n;
  }
  r.loss = total * inv_n;
  return r;
}

}  // namespace cmag::nn
