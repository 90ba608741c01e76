#pragma once

#include <cstddef>
#include <span>

namespace cmag::metrics {

struct MetricReport {
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// (#concordant + 0.5 * #tied) / (P * N) via one sort; labels are 0/1.
double roc_auc(std::span<const double> scores, std::span<const double> labels);

/// Step-rule area under precision-recall, tied scores processed as one block.
double pr_auc(std::span<const double> scores, std::span<const double> labels);

/// Literal double loop over all positive/negative pairs. Intended for n <= 1e4.
double brute_force_roc_auc(std::span<const double> scores, std::span<const double> labels);

MetricReport evaluate(std::span<const double> scores, std::span<const double> labels);

}  // namespace cmag::metrics
