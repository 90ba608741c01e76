#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cmag/matrix.hpp"
#include "cmag/types.hpp"

namespace cmag::nn {

// y = x W + b. `b` is 1 x d_out, or empty for no bias.
Matrix linear_forward(const Matrix& x, const Matrix& w, const Matrix& b);

struct LinearGrads {
  Matrix dx;
  Matrix dw;
  Matrix db;  // 1 x d_out
};
LinearGrads linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy);

Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& pre_activation, const Matrix& dy);

inline constexpr double kLeakySlope = 0.2;
inline double leaky_relu(double x, double slope = kLeakySlope) { return x > 0 ? x : slope * x; }

/// log(1 + exp(x)) without overflow.
double softplus(double x);

struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t layer = 0;
  std::uint64_t epoch = 0;
  std::uint64_t batch = 0;
};

/// Inverted-dropout scale matrix: each entry is 0 with probability p,
/// otherwise 1/(1-p). Deterministic per key.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double p, const DropoutKey& key);

/// Identity at inference or when p == 0. If `mask` is given it receives the
/// scale matrix used (all ones when identity).
Matrix dropout(const Matrix& x, double p, bool training, const DropoutKey& key, Matrix* mask = nullptr);
Matrix dropout_backward(const Matrix& dy, const Matrix& mask);

/// score(u, v) = <src[u], dst[v]> per edge.
std::vector<double> dot_decoder(const Matrix& src, const Matrix& dst, std::span<const Edge> edges);
/// Accumulates into dsrc/ddst (which must already have the embedding shapes).
void dot_decoder_backward(const Matrix& src, const Matrix& dst, std::span<const Edge> edges,
                          std::span<const double> dscores, Matrix& dsrc, Matrix& ddst);

struct LossResult {
  double loss = 0.0;
  std::vector<double> dscores;
};

/// mean_i -[w y log s(x) + (1 - y) log(1 - s(x))] on logits, evaluated as
/// softplus terms so it stays finite for any finite logit.
LossResult weighted_bce(std::span<const double> logits, std::span<const double> labels,
                        double pos_weight = 1.0);

}  // namespace cmag::nn
