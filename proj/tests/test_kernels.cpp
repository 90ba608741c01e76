#include <doctest.h>

#include "cmag/kernels.hpp"
#include "cmag/matrix.hpp"
#include "cmag/parallel.hpp"
#include "support.hpp"

using namespace cmag;

namespace {
struct ModeGuard {
  kernels::Mode saved = kernels::active_mode();
  ~ModeGuard() { kernels::set_mode(saved); }
};
}  // namespace

TEST_CASE("matmul variants agree with the naive product") {
  const Matrix a = testing::random_matrix(7, 5, 1), b = testing::random_matrix(5, 9, 2);
  CHECK(max_abs_diff(matmul(a, b), testing::naive_matmul(a, b)) < 1e-12);
  CHECK(max_abs_diff(matmul_tn(a.transposed(), b), testing::naive_matmul(a, b)) < 1e-12);
  CHECK(max_abs_diff(matmul_nt(a, b.transposed()), testing::naive_matmul(a, b)) < 1e-12);
  Matrix c(7, 9, 1.0);
  matmul_acc(a, b, c);
  Matrix expect = testing::naive_matmul(a, b);
  for (double& v : expect.values()) v += 1.0;
  CHECK(max_abs_diff(c, expect) < 1e-12);
}

TEST_CASE("identity and empty products") {
  const Matrix a = testing::random_matrix(4, 4, 3);
  CHECK(matmul(a, Matrix::identity(4)) == a);
  const Matrix z = matmul(Matrix(3, 0), Matrix(0, 2));
  CHECK(z.rows() == 3);
  CHECK(z.cols() == 2);
  CHECK(frobenius_sq(z) == 0.0);
}

TEST_CASE("SIMD kernels match the scalar reference") {
  using kernels::Mode;
  const kernels::Table& ref = kernels::table(Mode::Scalar);
  for (Mode m : {Mode::Avx2, Mode::Neon}) {
    if (!kernels::available(m)) continue;
    CAPTURE(kernels::name(m));
    const kernels::Table& simd = kernels::table(m);
    // odd sizes exercise the vector tails
    for (std::size_t mm : {1u, 3u, 8u, 13u}) {
      for (std::size_t n : {1u, 4u, 7u, 17u}) {
        for (std::size_t k : {1u, 5u, 16u, 33u}) {
          const Matrix a = testing::random_matrix(mm, k, mm * 100 + k);
          const Matrix b = testing::random_matrix(k, n, n * 100 + k);
          Matrix c1(mm, n), c2(mm, n);
          ref.gemm_nn(mm, n, k, a.data(), k, b.data(), n, c1.data(), n);
          simd.gemm_nn(mm, n, k, a.data(), k, b.data(), n, c2.data(), n);
          CHECK(max_abs_diff(c1, c2) < 1e-12);

          const Matrix at = a.transposed();  // k x mm, use as A[m=k][k=mm]
          Matrix d1(mm, n), d2(mm, n);
          ref.gemm_tn(k, n, mm, at.data(), mm, b.data(), n, d1.data(), n);
          simd.gemm_tn(k, n, mm, at.data(), mm, b.data(), n, d2.data(), n);
          CHECK(max_abs_diff(d1, d2) < 1e-12);

          const Matrix bt = b.transposed();
          Matrix e1(mm, n), e2(mm, n);
          ref.gemm_nt(mm, n, k, a.data(), k, bt.data(), k, e1.data(), n);
          simd.gemm_nt(mm, n, k, a.data(), k, bt.data(), k, e2.data(), n);
          CHECK(max_abs_diff(e1, e2) < 1e-12);
        }
      }
      const Matrix x = testing::random_matrix(1, 37, mm), y = testing::random_matrix(1, 37, mm + 1);
      CHECK(std::abs(ref.dot(x.data(), y.data(), 37) - simd.dot(x.data(), y.data(), 37)) < 1e-12);
      Matrix y1 = y, y2 = y;
      ref.axpy(0.7, x.data(), y1.data(), 37);
      simd.axpy(0.7, x.data(), y2.data(), 37);
      CHECK(max_abs_diff(y1, y2) < 1e-14);
    }
  }
}

TEST_CASE("mode selection") {
  ModeGuard guard;
  CHECK(kernels::available(kernels::Mode::Scalar));
  CHECK(kernels::mode_from_string("scalar") == kernels::Mode::Scalar);
  CHECK(kernels::mode_from_string("auto") == kernels::best_available());
  kernels::set_mode(kernels::Mode::Scalar);
  CHECK(kernels::active_mode() == kernels::Mode::Scalar);
  CHECK_THROWS(kernels::mode_from_string("sse9"));
}

TEST_CASE("products are identical across thread counts") {
  const Matrix a = testing::random_matrix(300, 120, 9), b = testing::random_matrix(120, 80, 10);
  const std::size_t saved = num_threads();
  set_num_threads(1);
  const Matrix c1 = matmul(a, b), t1 = matmul_tn(a, testing::random_matrix(300, 40, 11));
  set_num_threads(4);
  const Matrix c4 = matmul(a, b), t4 = matmul_tn(a, testing::random_matrix(300, 40, 11));
  set_num_threads(saved);
  CHECK(c1 == c4);
  CHECK(t1 == t4);
}

TEST_CASE("matrix helpers") {
  Matrix m(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(column_sums(m) == std::vector<double>{5, 7, 9});
  CHECK(m.transposed()(2, 1) == 6);
  const Matrix h = hconcat(m, Matrix(2, 1, 9.0));
  CHECK(h.cols() == 4);
  CHECK(h(1, 3) == 9);
  const std::vector<std::size_t> pick{1};
  CHECK(select_rows(m, pick)(0, 0) == 4);
  CHECK(select_cols(m, 1, 2)(1, 1) == 6);
  CHECK_THROWS(matmul(m, m));
}
