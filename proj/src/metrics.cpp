#include "cmag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "cmag/error.hpp"

namespace cmag::metrics {
namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts count(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::ShapeMismatch, "metrics: " + std::to_string(scores.size()) + " scores vs " +
                                       std::to_string(labels.size()) + " labels");
  }
  Counts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) fail(ErrorCode::NonFinite, "metrics: non-finite score");
    if (labels[i] == 1.0) {
      ++c.pos;
    } else if (labels[i] == 0.0) {
      ++c.neg;
    } else {
      fail(ErrorCode::InvalidArgument, "metrics: labels must be 0 or 1");
    }
  }
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  const Counts c = count(scores, labels);
  if (c.pos == 0 || c.neg == 0) fail(ErrorCode::InvalidArgument, "roc_auc: needs both classes");
  const auto idx = order_by_score(scores, false);
  double credit = 0.0;
  std::size_t neg_below = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t pos_block = 0;
    std::size_t neg_block = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1.0 ? pos_block : neg_block) += 1;
      ++j;
    }
    credit += static_cast<double>(pos_block) * static_cast<double>(neg_below) +
              0.5 * static_cast<double>(pos_block) * static_cast<double>(neg_block);
    neg_below += neg_block;
    i = j;
  }
  return credit / (static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

double pr_auc(std::span<const double> scores, std::span<const double> labels) {
  const Counts c = count(scores, labels);
  if (c.pos == 0) fail(ErrorCode::InvalidArgument, "pr_auc: needs at least one positive");
  const auto idx = order_by_score(scores, true);
  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1.0 ? tp : fp) += 1;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(c.pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double brute_force_roc_auc(std::span<const double> scores, std::span<const double> labels) {
  const Counts c = count(scores, labels);
  if (c.pos == 0 || c.neg == 0) fail(ErrorCode::InvalidArgument, "brute_force_roc_auc: needs both classes");
  double credit = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1.0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0.0) continue;
      if (scores[i] > scores[j]) {
        credit += 1.0;
      } else if (scores[i] == scores[j]) {
        credit += 0.5;
      }
    }
  }
  return credit / (static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

MetricReport evaluate(std::span<const double> scores, std::span<const double> labels) {
  const Counts c = count(scores, labels);
  return {roc_auc(scores, labels), pr_auc(scores, labels), c.pos, c.neg};
}

}  // namespace cmag::metrics
