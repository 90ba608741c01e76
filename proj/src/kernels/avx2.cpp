// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "cmag/kernels.hpp"

#include <immintrin.h>

namespace cmag::kernels::detail {
namespace {

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc0, acc1));
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

// Four rows of B per pass over a row of C.
void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    const double* ai = a + i * lda;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const __m256d a0 = _mm256_set1_pd(ai[p]);
      const __m256d a1 = _mm256_set1_pd(ai[p + 1]);
      const __m256d a2 = _mm256_set1_pd(ai[p + 2]);
      const __m256d a3 = _mm256_set1_pd(ai[p + 3]);
      const double* b0 = b + p * ldb;
      const double* b1 = b0 + ldb;
      const double* b2 = b1 + ldb;
      const double* b3 = b2 + ldb;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_loadu_pd(ci + j);
        acc = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), acc);
        acc = _mm256_fmadd_pd(a1, _mm256_loadu_pd(b1 + j), acc);
        acc = _mm256_fmadd_pd(a2, _mm256_loadu_pd(b2 + j), acc);
        acc = _mm256_fmadd_pd(a3, _mm256_loadu_pd(b3 + j), acc);
        _mm256_storeu_pd(ci + j, acc);
      }
      for (; j < n; ++j) {
        double acc = ci[j];
        acc += ai[p] * b0[j];
        acc += ai[p + 1] * b1[j];
        acc += ai[p + 2] * b2[j];
        acc += ai[p + 3] * b3[j];
        ci[j] = acc;
      }
    }
    for (; p < k; ++p) axpy_avx2(ai[p], b + p * ldb, ci, n);
  }
}

void gemm_tn_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc) {
  for (std::size_t p = 0; p < k; ++p) {
    double* cp = c + p * ldc;
    for (std::size_t i = 0; i < m; ++i) {
      const double aip = a[i * lda + p];
      if (aip == 0.0) continue;
      axpy_avx2(aip, b + i * ldb, cp, n);
    }
  }
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c[i * ldc + j] += dot_avx2(a + i * lda, b + j * ldb, k);
    }
  }
}

}  // namespace

const Table avx2_table{gemm_nn_avx2, gemm_tn_avx2, gemm_nt_avx2, dot_avx2, axpy_avx2};

}  // namespace cmag::kernels::detail
