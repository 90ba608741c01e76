// Truncated SVD. Small matrices take an exact dense decomposition; larger ones
// use a randomized range finder with power iterations (Halko, Martinsson and
// Tropp), followed by an exact SVD of the projected problem.
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "cmag/error.hpp"
#include "cmag/features.hpp"
#include "cmag/rng.hpp"

namespace cmag::features {
namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EMatrix>;

EMatrix orthonormal_basis(const EMatrix& y) {
  Eigen::HouseholderQR<EMatrix> qr(y);
  return qr.householderQ() * EMatrix::Identity(y.rows(), y.cols());
}

// Flip each basis column so its largest-magnitude entry is positive.
void canonical_signs(EMatrix& v) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    Eigen::Index arg = 0;
    v.col(c).cwiseAbs().maxCoeff(&arg);
    if (v(arg, c) < 0) v.col(c) *= -1.0;
  }
}

}  // namespace

SvdModel svd_fit(const Matrix& m, std::size_t k, std::uint64_t seed, const SvdOptions& opts) {
  if (m.empty()) fail(ErrorCode::EmptyInput, "svd_fit: empty matrix");
  const std::size_t small = std::min(m.rows(), m.cols());
  if (k == 0 || k > small) {
    fail(ErrorCode::OutOfRange, "svd_fit: rank " + std::to_string(k) + " outside [1, " +
                                    std::to_string(small) + "]");
  }
  if (!m.all_finite()) fail(ErrorCode::NonFinite, "svd_fit: non-finite input");

  const ConstMap a(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  const std::size_t sketch = std::min(small, k + opts.oversampling);

  EMatrix v;
  Eigen::VectorXd sigma;
  if (small <= opts.dense_threshold || sketch >= small) {
    Eigen::BDCSVD<EMatrix> svd(a, Eigen::ComputeThinV);
    v = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
    sigma = svd.singularValues().head(static_cast<Eigen::Index>(k));
  } else {
    const rng::Stream rs(seed, "svd_fit");
    EMatrix omega(a.cols(), static_cast<Eigen::Index>(sketch));
    for (Eigen::Index i = 0; i < omega.rows(); ++i)
      for (Eigen::Index j = 0; j < omega.cols(); ++j)
        omega(i, j) = rs.normal(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j));
    EMatrix q = orthonormal_basis(a * omega);
    for (std::size_t it = 0; it < opts.power_iterations; ++it) {
      const EMatrix z = orthonormal_basis(a.transpose() * q);
      q = orthonormal_basis(a * z);
    }
    const EMatrix b = q.transpose() * a;
    Eigen::BDCSVD<EMatrix> svd(b, Eigen::ComputeThinV);
    v = svd.matrixV().leftCols(static_cast<Eigen::Index>(k));
    sigma = svd.singularValues().head(static_cast<Eigen::Index>(k));
  }
  canonical_signs(v);

  SvdModel model;
  model.k = k;
  model.basis = Matrix(m.cols(), k);
  for (std::size_t i = 0; i < m.cols(); ++i)
    for (std::size_t j = 0; j < k; ++j)
      model.basis(i, j) = v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  model.singular_values.assign(sigma.data(), sigma.data() + sigma.size());
  for (double& s : model.singular_values) s = std::max(0.0, s);
  model.column_means.assign(m.cols(), 0.0);
  return model;
}

}  // namespace cmag::features
