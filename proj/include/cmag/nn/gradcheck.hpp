#pragma once

#include <functional>
#include <span>

#include "cmag/nn/params.hpp"

namespace cmag::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

/// |a - n| / max(1, |a|, |n|)
double relative_error(double analytic, double numeric);

/// Central differences of f at `point` against `analytic`, coordinate by
/// coordinate. Throws if f is non-finite at any probe.
GradCheckResult finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> point, std::span<const double> analytic,
                                  double h = 1e-5);

/// Same check over every scalar of `params`; `loss` must read the parameter
/// values it is given. `analytic` holds the gradients in its grad fields.
GradCheckResult finite_diff_check(const std::function<double(const ParameterSet&)>& loss,
                                  const ParameterSet& params, const ParameterSet& analytic,
                                  double h = 1e-5);

}  // namespace cmag::nn
