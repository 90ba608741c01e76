#include "cmag/kernels.hpp"

namespace cmag::kernels::detail {
namespace {

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    std::size_t lda, const double* b, std::size_t ldb, double* c,
                    std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * lda + p];
      if (aip == 0.0) continue;
      axpy_scalar(aip, b + p * ldb, ci, n);
    }
  }
}

void gemm_tn_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    std::size_t lda, const double* b, std::size_t ldb, double* c,
                    std::size_t ldc) {
  for (std::size_t p = 0; p < k; ++p) {
    double* cp = c + p * ldc;
    for (std::size_t i = 0; i < m; ++i) {
      const double aip = a[i * lda + p];
      if (aip == 0.0) continue;
      axpy_scalar(aip, b + i * ldb, cp, n);
    }
  }
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a,
                    std::size_t lda, const double* b, std::size_t ldb, double* c,
                    std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c[i * ldc + j] += dot_scalar(a + i * lda, b + j * ldb, k);
    }
  }
}

}  // namespace

const Table scalar_table{gemm_nn_scalar, gemm_tn_scalar, gemm_nt_scalar, dot_scalar,
                         axpy_scalar};

}  // namespace cmag::kernels::detail
