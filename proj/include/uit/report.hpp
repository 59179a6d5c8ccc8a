#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uit/error.hpp"

namespace uit {

/// 2x2 confusion counts. Positive class = lawful (label 1); predicted
/// positive means probability >= threshold.
struct ConfusionMatrix {
  std::int64_t tp = 0;  // true lawful
  std::int64_t fn = 0;  // false unlawful
  std::int64_t fp = 0;  // false lawful
  std::int64_t tn = 0;  // true unlawful

  std::int64_t n() const { return tp + fn + fp + tn; }
};

/// Percentages derived from a confusion matrix. A metric whose denominator
/// is zero is absent, never zero: degenerate splits must not inflate scores.
/// fnr and fpr are defined as exact complements (100 - tpr, 100 - tnr).
struct MetricSet {
  std::optional<double> acc;
  std::optional<double> tpr;
  std::optional<double> tnr;
  std::optional<double> fpr;
  std::optional<double> fnr;
  std::optional<double> pre;
};

ConfusionMatrix confusion(const std::vector<int>& labels,
                          const std::vector<double>& probabilities,
                          double threshold = 0.5);

MetricSet metrics(const ConfusionMatrix& cm);

/// Element-wise mean over folds; each metric averages the folds where it is
/// defined and is absent if it is defined nowhere.
MetricSet mean_metrics(const std::vector<MetricSet>& folds);

/// Metric-rows CSV (ACC/FNR/FPR/PRE/TNR/TPR) with one column per fold plus a
/// mean column. Values rendered with two decimals, half-up; absent as NA.
std::string metrics_table_csv(const std::vector<MetricSet>& folds,
                              const MetricSet& mean);

}  // namespace uit
