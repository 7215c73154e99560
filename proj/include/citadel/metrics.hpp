#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace citadel {

// Confusion counts with malware (1) as the positive class. Ratios whose
// denominator is zero are left unset rather than NaN.
struct MonthlyMetrics {
  std::string month;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::optional<double> f1;   // 2TP / (2TP + FP + FN)
  std::optional<double> fnr;  // FN / (FN + TP)
  std::optional<double> fpr;  // FP / (FP + TN)

  std::size_t total() const { return tp + fp + tn + fn; }
};

MonthlyMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn,
                                   std::string month = {});

MonthlyMetrics compute_metrics(std::span<const int> predictions, std::span<const int> truths,
                               std::string month = {});

// Mean and sample (n - 1) standard deviation; std is 0 for a single value.
// With no values, n == 0 and mean/std are NaN.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;

  bool defined() const { return n > 0; }
};

MeanStd aggregate(std::span<const double> values);
// Unset entries are skipped.
MeanStd aggregate(std::span<const std::optional<double>> values);

// Rounds a fraction to a percentage with one decimal, e.g. 0.72727 -> 72.7.
double to_percent_1dp(double fraction);

}  // namespace citadel
