#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cmag/matrix.hpp"

namespace cmag::nn {

struct Parameter {
  Matrix value;
  Matrix grad;
  Matrix m;  // Adam first moment
  Matrix v;  // Adam second moment
};

/// Named learnable tensors plus optimizer state. Names encode
/// layer/relation/head, e.g. "conv0/makes/h2/W_src".
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Matrix init);
  bool contains(std::string_view name) const;
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  const Matrix& value(std::string_view name) const { return at(name).value; }
  Matrix& grad(std::string_view name) { return at(name).grad; }

  void zero_grad();
  std::vector<std::string> names() const;
  std::size_t num_tensors() const noexcept { return tensors_.size(); }
  std::size_t num_scalars() const noexcept;

  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }

  auto begin() noexcept { return tensors_.begin(); }
  auto end() noexcept { return tensors_.end(); }
  auto begin() const noexcept { return tensors_.begin(); }
  auto end() const noexcept { return tensors_.end(); }

 private:
  std::map<std::string, Parameter, std::less<>> tensors_;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// g <- g + wd * theta, then the bias-corrected Adam update. The step counter
/// is shared by every tensor in the set. Throws on a non-finite gradient,
/// naming the tensor, before touching any parameter.
void adam_step(ParameterSet& params, const AdamConfig& cfg);

/// Uniform in [-sqrt(3/fan_in), sqrt(3/fan_in)], keyed by (seed, name).
Matrix fan_in_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::uint64_t seed,
                      std::string_view name);

std::vector<unsigned char> encode_checkpoint(const ParameterSet& params);
ParameterSet decode_checkpoint(std::vector<unsigned char> bytes);
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::filesystem::path& path);

}  // namespace cmag::nn
