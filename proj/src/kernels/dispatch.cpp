#include <atomic>
#include <string>

#include "cmag/error.hpp"
#include "cmag/kernels.hpp"
#include "cmag/parallel.hpp"

namespace cmag::kernels {
namespace {

// Rows of work below this many multiply-adds run on the calling thread.
constexpr std::size_t kMinParallelFlops = std::size_t{1} << 17;

std::atomic<int> g_mode{-1};

}  // namespace

bool available(Mode mode) noexcept {
  switch (mode) {
    case Mode::Scalar:
      return true;
    case Mode::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Mode::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Mode best_available() noexcept {
  if (available(Mode::Avx2)) return Mode::Avx2;
  if (available(Mode::Neon)) return Mode::Neon;
  return Mode::Scalar;
}

Mode active_mode() noexcept {
  int m = g_mode.load(std::memory_order_relaxed);
  if (m < 0) {
    m = static_cast<int>(best_available());
    g_mode.store(m, std::memory_order_relaxed);
  }
  return static_cast<Mode>(m);
}

void set_mode(Mode mode) {
  if (!available(mode)) {
    fail(ErrorCode::InvalidArgument,
         "kernel mode '" + std::string(name(mode)) + "' is not available on this CPU");
  }
  g_mode.store(static_cast<int>(mode), std::memory_order_relaxed);
}

std::string_view name(Mode mode) noexcept {
  switch (mode) {
    case Mode::Scalar:
      return "scalar";
    case Mode::Avx2:
      return "avx2";
    case Mode::Neon:
      return "neon";
  }
  return "unknown";
}

Mode mode_from_string(std::string_view s) {
  if (s == "scalar") return Mode::Scalar;
  if (s == "avx2") return Mode::Avx2;
  if (s == "neon") return Mode::Neon;
  if (s == "auto") return best_available();
  fail(ErrorCode::InvalidArgument, "unknown kernel mode '" + std::string(s) + "'");
}

const Table& table(Mode mode) {
  switch (mode) {
    case Mode::Scalar:
      return detail::scalar_table;
    case Mode::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (available(Mode::Avx2)) return detail::avx2_table;
#endif
      break;
    case Mode::Neon:
#if defined(__aarch64__)
      return detail::neon_table;
#endif
      break;
  }
  fail(ErrorCode::InvalidArgument,
       "kernel mode '" + std::string(name(mode)) + "' is not available on this CPU");
}

const Table& active() noexcept { return table(active_mode()); }

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  if (m == 0 || n == 0 || k == 0) return;
  const Table& t = active();
  const std::size_t per_row = n * k;
  parallel_for(m, kMinParallelFlops / (per_row + 1) + 1, [&](std::size_t r0, std::size_t r1) {
    t.gemm_nn(r1 - r0, n, k, a + r0 * lda, lda, b, ldb, c + r0 * ldc, ldc);
  });
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  if (m == 0 || n == 0 || k == 0) return;
  const Table& t = active();
  const std::size_t per_row = m * n;
  parallel_for(k, kMinParallelFlops / (per_row + 1) + 1, [&](std::size_t p0, std::size_t p1) {
    t.gemm_tn(m, n, p1 - p0, a + p0, lda, b, ldb, c + p0 * ldc, ldc);
  });
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
             const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  if (m == 0 || n == 0 || k == 0) return;
  const Table& t = active();
  const std::size_t per_row = n * k;
  parallel_for(m, kMinParallelFlops / (per_row + 1) + 1, [&](std::size_t r0, std::size_t r1) {
    t.gemm_nt(r1 - r0, n, k, a + r0 * lda, lda, b, ldb, c + r0 * ldc, ldc);
  });
}

double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}

}  // namespace cmag::kernels
