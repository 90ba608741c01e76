#include "cmag/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmag/error.hpp"
#include "cmag/kernels.hpp"

namespace cmag {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) fail(ErrorCode::ShapeMismatch, std::string(op) + ": " + shape(a) + " vs " + shape(b));
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols) {
    fail(ErrorCode::ShapeMismatch, "Matrix: " + std::to_string(data_.size()) +
                                       " values for shape " + std::to_string(rows) + "x" +
                                       std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols() == b.rows() && c.rows() == a.rows() && c.cols() == b.cols(), "matmul", a, b);
  kernels::gemm_nn(a.rows(), b.cols(), a.cols(), a.data(), a.cols(), b.data(), b.cols(), c.data(),
                   c.cols());
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.rows() == b.rows() && c.rows() == a.cols() && c.cols() == b.cols(), "matmul_tn", a,
          b);
  kernels::gemm_tn(a.rows(), b.cols(), a.cols(), a.data(), a.cols(), b.data(), b.cols(), c.data(),
                   c.cols());
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols() == b.cols() && c.rows() == a.rows() && c.cols() == b.rows(), "matmul_nt", a,
          b);
  kernels::gemm_nt(a.rows(), b.rows(), a.cols(), a.data(), a.cols(), b.data(), b.cols(), c.data(),
                   c.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  matmul_acc(a, b, c);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  matmul_tn_acc(a, b, c);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
  matmul_nt_acc(a, b, c);
  return c;
}

void add_inplace(Matrix& dst, const Matrix& src, double scale) {
  require(dst.rows() == src.rows() && dst.cols() == src.cols(), "add", dst, src);
  kernels::axpy(scale, src.data(), dst.data(), src.size());
}

void add_row_broadcast(Matrix& dst, std::span<const double> row) {
  if (row.size() != dst.cols()) {
    fail(ErrorCode::ShapeMismatch, "add_row_broadcast: row of " + std::to_string(row.size()) +
                                       " onto " + shape(dst));
  }
  for (std::size_t i = 0; i < dst.rows(); ++i) kernels::axpy(1.0, row.data(), dst.row(i).data(), row.size());
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) kernels::axpy(1.0, m.row(i).data(), s.data(), m.cols());
  return s;
}

void add_column_sums(const Matrix& m, Matrix& acc_row) {
  if (acc_row.rows() != 1 || acc_row.cols() != m.cols()) {
    fail(ErrorCode::ShapeMismatch, "add_column_sums: " + shape(m) + " into " + shape(acc_row));
  }
  for (std::size_t i = 0; i < m.rows(); ++i)
    kernels::axpy(1.0, m.row(i).data(), acc_row.data(), m.cols());
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "hconcat", a, b);
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), dst.begin());
    std::copy(b.row(i).begin(), b.row(i).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) fail(ErrorCode::OutOfRange, "select_rows: row index out of range");
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  }
  return out;
}

Matrix select_cols(const Matrix& m, std::size_t begin, std::size_t count) {
  if (begin + count > m.cols()) fail(ErrorCode::OutOfRange, "select_cols: column range out of range");
  Matrix out(m.rows(), count);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = m(i, begin + j);
  return out;
}

double frobenius_sq(const Matrix& m) {
  double s = 0.0;
  for (double v : m.values()) s += v * v;
  return s;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff", a, b);
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace cmag
