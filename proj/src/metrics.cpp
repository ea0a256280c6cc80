#include <batauth/error.hpp>
#include <batauth/metrics.hpp>

#include <algorithm>

namespace batauth {

namespace {

constexpr std::string_view kModule = "eval-explain";

double ratio(std::int64_t num, std::int64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix confusion_matrix(const Labels& truth, const Labels& predicted, int n_classes) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorCode::DimensionMismatch, kModule, "truth and prediction lengths differ");
  }
  ConfusionMatrix m;
  m.counts.setZero(n_classes, n_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || predicted[i] < 0 || predicted[i] >= n_classes) {
      throw Error(ErrorCode::IndexOutOfRange, kModule, "label outside [0, n_classes)");
    }
    ++m.counts(truth[i], predicted[i]);
  }
  return m;
}

ConfusionCounts binary_counts(const Labels& truth, const Labels& predicted) {
  return one_vs_rest(confusion_matrix(truth, predicted, 2), 1);
}

ConfusionCounts one_vs_rest(const ConfusionMatrix& matrix, int positive) {
  ConfusionCounts c;
  c.tp = matrix.counts(positive, positive);
  c.fn = matrix.counts.row(positive).sum() - c.tp;
  c.fp = matrix.counts.col(positive).sum() - c.tp;
  c.tn = matrix.total() - c.tp - c.fn - c.fp;
  return c;
}

MetricSet metrics(const ConfusionCounts& c) {
  if (c.total() <= 0) throw Error(ErrorCode::EmptyCounts, kModule, "confusion counts are empty");
  MetricSet m;
  m.accuracy = ratio(c.tn + c.tp, c.total(), m.degenerate);
  m.precision = ratio(c.tp, c.tp + c.fp, m.degenerate);
  m.recall = ratio(c.tp, c.tp + c.fn, m.degenerate);
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1 = 0.0;
    m.degenerate = true;
  }
  m.far = ratio(c.fp, c.fp + c.tn, m.degenerate);
  m.frr = ratio(c.fn, c.fn + c.tp, m.degenerate);
  return m;
}

MetricSet metrics(const ConfusionMatrix& matrix) {
  if (matrix.total() <= 0) throw Error(ErrorCode::EmptyCounts, kModule, "confusion matrix is empty");
  MetricSet out;
  out.binary = false;
  out.accuracy = static_cast<double>(matrix.counts.trace()) / static_cast<double>(matrix.total());
  int classes = 0;
  for (int k = 0; k < matrix.counts.rows(); ++k) {
    if (matrix.counts.row(k).sum() == 0 && matrix.counts.col(k).sum() == 0) continue;
    const MetricSet per = metrics(one_vs_rest(matrix, k));
    out.precision += per.precision;
    out.recall += per.recall;
    out.f1 += per.f1;
    out.degenerate = out.degenerate || per.degenerate;
    ++classes;
  }
  out.precision /= classes;
  out.recall /= classes;
  out.f1 /= classes;
  return out;
}

double macro_f1(const Labels& truth, const Labels& predicted) {
  int n_classes = 0;
  for (int v : truth) n_classes = std::max(n_classes, v + 1);
  for (int v : predicted) n_classes = std::max(n_classes, v + 1);
  return metrics(confusion_matrix(truth, predicted, n_classes)).f1;
}

}  // namespace batauth
