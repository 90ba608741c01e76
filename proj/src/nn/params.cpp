#include "cmag/nn/params.hpp"

#include <cmath>
#include <fstream>

#include "cmag/binary_io.hpp"
#include "cmag/error.hpp"
#include "cmag/rng.hpp"

namespace cmag::nn {

Parameter& ParameterSet::add(const std::string& name, Matrix init) {
  if (tensors_.contains(name)) fail(ErrorCode::InvalidArgument, "parameter '" + name + "' registered twice");
  Parameter p;
  p.grad = Matrix(init.rows(), init.cols());
  p.m = Matrix(init.rows(), init.cols());
  p.v = Matrix(init.rows(), init.cols());
  p.value = std::move(init);
  return tensors_.emplace(name, std::move(p)).first->second;
}

bool ParameterSet::contains(std::string_view name) const { return tensors_.find(name) != tensors_.end(); }

Parameter& ParameterSet::at(std::string_view name) {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) fail(ErrorCode::InvalidArgument, "no parameter '" + std::string(name) + "'");
  return it->second;
}

const Parameter& ParameterSet::at(std::string_view name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) fail(ErrorCode::InvalidArgument, "no parameter '" + std::string(name) + "'");
  return it->second;
}

void ParameterSet::zero_grad() {
  for (auto& [_, p] : tensors_) p.grad.fill(0.0);
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : tensors_) out.push_back(n);
  return out;
}

std::size_t ParameterSet::num_scalars() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, p] : tensors_) n += p.value.size();
  return n;
}

void adam_step(ParameterSet& params, const AdamConfig& cfg) {
  for (const auto& [name, p] : params) {
    if (!p.grad.all_finite()) fail(ErrorCode::NonFinite, "non-finite gradient in '" + name + "'");
  }
  params.set_step(params.step() + 1);
  const double t = static_cast<double>(params.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params) {
    double* theta = p.value.data();
    const double* g = p.grad.data();
    double* m = p.m.data();
    double* v = p.v.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = g[i] + cfg.weight_decay * theta[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

Matrix fan_in_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::uint64_t seed,
                      std::string_view name) {
  const double bound = std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(1, fan_in)));
  const rng::Stream rs(seed, name);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rs.uniform(i) - 1.0) * bound;
  return m;
}

std::vector<unsigned char> encode_checkpoint(const ParameterSet& params) {
  io::BinaryWriter w("parameter-set");
  w.u64(params.step());
  w.u64(params.num_tensors());
  for (const auto& [name, p] : params) {
    w.str(name);
    w.matrix(p.value);
    w.matrix(p.m);
    w.matrix(p.v);
  }
  return w.finish();
}

ParameterSet decode_checkpoint(std::vector<unsigned char> bytes) {
  io::BinaryReader r(std::move(bytes), "parameter-set");
  ParameterSet ps;
  ps.set_step(r.u64());
  const std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    Parameter& p = ps.add(name, r.matrix());
    p.m = r.matrix();
    p.v = r.matrix();
    if (p.m.rows() != p.value.rows() || p.m.cols() != p.value.cols() || p.v.rows() != p.value.rows() ||
        p.v.cols() != p.value.cols()) {
      fail(ErrorCode::BadFormat, "checkpoint: optimizer state shape mismatch for '" + name + "'");
    }
  }
  if (!r.at_end()) fail(ErrorCode::BadFormat, "checkpoint: trailing data");
  return ps;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

ParameterSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return decode_checkpoint({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

}  // namespace cmag::nn
