#include "citadel/metrics.hpp"

#include <cmath>
#include <limits>

#include "citadel/errors.hpp"

namespace citadel {

MonthlyMetrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn,
                                   std::string month) {
  MonthlyMetrics m;
  m.month = std::move(month);
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  const auto d = [](std::size_t v) { return static_cast<double>(v); };
  if (2 * tp + fp + fn > 0) m.f1 = 2.0 * d(tp) / (2.0 * d(tp) + d(fp) + d(fn));
  if (fn + tp > 0) m.fnr = d(fn) / d(fn + tp);
  if (fp + tn > 0) m.fpr = d(fp) / d(fp + tn);
  return m;
}

MonthlyMetrics compute_metrics(std::span<const int> predictions, std::span<const int> truths,
                               std::string month) {
  if (predictions.size() != truths.size()) {
    throw ShapeError("compute_metrics: predictions and truths differ in length");
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == 1;
    const bool truth = truths[i] == 1;
    if (pred && truth) ++tp;
    else if (pred && !truth) ++fp;
    else if (!pred && truth) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn, std::move(month));
}

MeanStd aggregate(std::span<const double> values) {
  MeanStd r;
  r.n = values.size();
  if (values.empty()) {
    r.mean = r.std = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  // Welford keeps the variance accurate when values are close together.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (double v : values) {
    ++k;
    const double delta = v - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (v - mean);
  }
  r.mean = mean;
  r.std = values.size() > 1 ? std::sqrt(std::max(0.0, m2 / static_cast<double>(values.size() - 1))) : 0.0;
  return r;
}

MeanStd aggregate(std::span<const std::optional<double>> values) {
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v) defined.push_back(*v);
  }
  return aggregate(std::span<const double>(defined));
}

double to_percent_1dp(double fraction) { return std::round(fraction * 1000.0) / 10.0; }

}  // namespace citadel
