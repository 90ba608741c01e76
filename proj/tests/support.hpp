#pragma once

// Shared helpers for the unit tests: random data and independent reference
// implementations used as oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "cmag/graph.hpp"
#include "cmag/matrix.hpp"
#include "cmag/rng.hpp"

namespace testing {

inline cmag::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  const cmag::rng::Stream rs(seed, "test-matrix");
  cmag::Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rs.normal(i);
  return m;
}

/// Naive triple loop.
inline cmag::Matrix naive_matmul(const cmag::Matrix& a, const cmag::Matrix& b) {
  cmag::Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<double> jacobi_eigenvalues(cmag::Matrix s) {
  const std::size_t n = s.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(s(p, q)) < 1e-300) continue;
        const double theta = (s(q, q) - s(p, p)) / (2 * s(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s(k, p), skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s(p, k), sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = s(i, i);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

/// Sum of the k largest squared singular values of m.
inline double exact_topk_energy(const cmag::Matrix& m, std::size_t k) {
  cmag::Matrix g(m.cols(), m.cols());
  for (std::size_t i = 0; i < m.cols(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double s = 0;
      for (std::size_t r = 0; r < m.rows(); ++r) s += m(r, i) * m(r, j);
      g(i, j) = s;
    }
  const auto ev = jacobi_eigenvalues(g);
  double e = 0;
  for (std::size_t i = 0; i < k && i < ev.size(); ++i) e += std::max(0.0, ev[i]);
  return e;
}

/// PR-AUC by sweeping every distinct score as a threshold (predict positive
/// when score >= t), step rule over consecutive recall levels.
inline double threshold_sweep_pr_auc(const std::vector<double>& s, const std::vector<double>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double p_total = 0;
  for (double v : y) p_total += v;
  double area = 0, prev_recall = 0;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) (y[i] > 0.5 ? tp : fp) += 1;
    }
    const double recall = tp / p_total, precision = tp / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

/// Random simple edge list of n_src x n_dst with about `density` fill.
inline cmag::EdgeList random_edges(std::size_t n_src, std::size_t n_dst, double density, std::uint64_t seed) {
  const cmag::rng::Stream rs(seed, "test-edges");
  cmag::EdgeList e;
  for (std::size_t i = 0; i < n_src; ++i)
    for (std::size_t j = 0; j < n_dst; ++j)
      if (rs.uniform(i, j) < density) e.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
  return e;
}

}  // namespace testing
