#include "cmag/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cmag/error.hpp"

namespace cmag::nn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

GradCheckResult finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> point, std::span<const double> analytic,
                                  double h) {
  if (analytic.size() != point.size()) fail(ErrorCode::ShapeMismatch, "finite_diff_check: gradient length mismatch");
  std::vector<double> x(point.begin(), point.end());
  GradCheckResult r;
  r.coordinates = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) fail(ErrorCode::NonFinite, "finite_diff_check: non-finite evaluation");
    const double err = relative_error(analytic[i], (fp - fm) / (2.0 * h));
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
    }
  }
  return r;
}

GradCheckResult finite_diff_check(const std::function<double(const ParameterSet&)>& loss,
                                  const ParameterSet& params, const ParameterSet& analytic, double h) {
  ParameterSet probe = params;
  GradCheckResult r;
  std::size_t offset = 0;
  for (const std::string& name : params.names()) {
    Matrix& v = probe.at(name).value;
    const Matrix& g = analytic.at(name).grad;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v.data()[i];
      v.data()[i] = orig + h;
      const double fp = loss(probe);
      v.data()[i] = orig - h;
      const double fm = loss(probe);
      v.data()[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) fail(ErrorCode::NonFinite, "finite_diff_check: non-finite evaluation");
      const double err = relative_error(g.data()[i], (fp - fm) / (2.0 * h));
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_index = offset + i;
      }
    }
    offset += v.size();
  }
  r.coordinates = offset;
  return r;
}

}  // namespace cmag::nn
