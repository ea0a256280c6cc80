#pragma once

#include <batauth/types.hpp>

#include <cstdint>
#include <vector>

namespace batauth {

/// k x k confusion matrix, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

  std::int64_t total() const { return counts.sum(); }
};

/// Binary counts with class 1 as the positive (legitimate) class.
struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const noexcept { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Only meaningful for binary counts.
  double far = 0.0;
  double frr = 0.0;
  bool binary = true;
  /// Set when any ratio was 0/0 and reported as 0.
  bool degenerate = false;
};

ConfusionMatrix confusion_matrix(const Labels& truth, const Labels& predicted, int n_classes);
ConfusionCounts binary_counts(const Labels& truth, const Labels& predicted);
ConfusionCounts one_vs_rest(const ConfusionMatrix& matrix, int positive);

/// Accuracy, precision, recall, F1, FAR = FP/(FP+TN), FRR = FN/(FN+TP).
MetricSet metrics(const ConfusionCounts& counts);
/// Per-class one-vs-rest, macro averaged; accuracy is the trace fraction. FAR/FRR unset.
MetricSet metrics(const ConfusionMatrix& matrix);

/// Macro-averaged F1 over the classes present in truth or prediction.
double macro_f1(const Labels& truth, const Labels& predicted);

}  // namespace batauth
