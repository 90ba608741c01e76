#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cmag {

/// Dense row-major matrix of doubles. All model activations, weights and
/// feature tables use this type.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  void fill(double v);
  bool all_finite() const noexcept;
  Matrix transposed() const;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using DenseTensor = Matrix;

// Products dispatch to the active kernel set (scalar or SIMD).
Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c);     // c += a * b
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c);  // c += a^T * b
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c);  // c += a * b^T

void add_inplace(Matrix& dst, const Matrix& src, double scale = 1.0);
void add_row_broadcast(Matrix& dst, std::span<const double> row);
std::vector<double> column_sums(const Matrix& m);
void add_column_sums(const Matrix& m, Matrix& acc_row);

Matrix hconcat(const Matrix& a, const Matrix& b);
Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
Matrix select_cols(const Matrix& m, std::size_t begin, std::size_t count);

double frobenius_sq(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace cmag
