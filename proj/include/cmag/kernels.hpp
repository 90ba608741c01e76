#pragma once

#include <cstddef>
#include <string_view>

// Inner-loop arithmetic kernels. Each instruction-set variant implements the
// same table; the scalar table is the reference the SIMD variants are tested
// against. Selection happens once at runtime from CPU capabilities and can be
// pinned with set_mode() (the CLI exposes this as --kernel).
namespace cmag::kernels {

enum class Mode { Scalar, Avx2, Neon };

struct Table {
  // Row-major, leading dimensions in elements. All gemm kernels accumulate
  // into C; callers zero C first for a plain product.
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc);
  // C[k x n] += A^T * B with A[m x k], B[m x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc);
  // C[m x n] += A[m x k] * B^T with B[n x k]
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                  const double* b, std::size_t ldb, double* c, std::size_t ldc);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

bool available(Mode mode) noexcept;
Mode best_available() noexcept;
Mode active_mode() noexcept;
void set_mode(Mode mode);  // throws if the mode is unavailable on this CPU
std::string_view name(Mode mode) noexcept;
Mode mode_from_string(std::string_view s);  // "scalar" | "avx2" | "neon" | "auto"

const Table& table(Mode mode);
const Table& active() noexcept;

// Dispatching entry points. gemm calls split output rows across the worker
// threads; each output element is computed by the same instruction sequence
// regardless of the split.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc);
double dot(const double* x, const double* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

namespace detail {
extern const Table scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
extern const Table avx2_table;
#endif
#if defined(__aarch64__)
extern const Table neon_table;
#endif
}  // namespace detail

}  // namespace cmag::kernels
