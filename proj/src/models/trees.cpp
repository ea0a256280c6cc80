#include <batauth/error.hpp>
#include <batauth/models.hpp>
#include <batauth/parallel.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace batauth {

namespace {

constexpr std::string_view kModule = "ml-models";

double impurity(const std::vector<double>& counts, double total, Criterion criterion) {
  if (total <= 0.0) return 0.0;
  double acc = 0.0;
  if (criterion == Criterion::Gini) {
    for (double c : counts) acc += (c / total) * (c / total);
    return 1.0 - acc;
  }
  for (double c : counts) {
    if (c > 0.0) {
      const double p = c / total;
      acc -= p * std::log2(p);
    }
  }
  return acc;
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
};

int argmax(const std::vector<double>& values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace

DecisionTree DecisionTree::fit(const Matrix& x, const Labels& y, int n_classes, const Vector& sample_weight,
                               Criterion criterion, int max_depth, int max_features, std::mt19937_64& rng) {
  const auto d = static_cast<int>(x.cols());
  const int features_per_split = (max_features <= 0 || max_features > d) ? d : max_features;

  DecisionTree tree;
  tree.n_classes = n_classes;
  tree.n_features = d;

  std::vector<std::size_t> samples;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (sample_weight[i] > 0.0) samples.push_back(static_cast<std::size_t>(i));
  }
  if (samples.empty()) throw Error(ErrorCode::TooFewSamples, kModule, "tree has no weighted samples");

  struct Task {
    std::size_t begin, end;
    int depth;
    int node;
  };
  std::vector<Task> stack{{0, samples.size(), 0, 0}};
  tree.nodes.emplace_back();

  std::vector<int> feature_order(static_cast<std::size_t>(d));
  std::vector<std::pair<double, std::size_t>> sorted;
  std::vector<double> node_counts(static_cast<std::size_t>(n_classes));
  std::vector<double> left_counts(static_cast<std::size_t>(n_classes));
  std::vector<double> right_counts(static_cast<std::size_t>(n_classes));

  while (!stack.empty()) {
    const Task task = stack.back();
    stack.pop_back();

    std::fill(node_counts.begin(), node_counts.end(), 0.0);
    for (std::size_t s = task.begin; s < task.end; ++s) {
      const auto i = samples[s];
      node_counts[static_cast<std::size_t>(y[i])] += sample_weight[static_cast<Eigen::Index>(i)];
    }
    const double total = std::accumulate(node_counts.begin(), node_counts.end(), 0.0);
    {
      TreeNode& node = tree.nodes[static_cast<std::size_t>(task.node)];
      node.weight = total;
      node.impurity = impurity(node_counts, total, criterion);
      node.value.resize(node_counts.size());
      for (std::size_t k = 0; k < node_counts.size(); ++k) node.value[k] = node_counts[k] / total;
    }
    const auto classes_present = std::count_if(node_counts.begin(), node_counts.end(), [](double c) { return c > 0.0; });
    const bool at_depth_cap = max_depth > 0 && task.depth >= max_depth;
    if (classes_present <= 1 || at_depth_cap || task.end - task.begin < 2) continue;

    std::iota(feature_order.begin(), feature_order.end(), 0);
    std::shuffle(feature_order.begin(), feature_order.end(), rng);

    Split best;
    int evaluated = 0;
    for (int f : feature_order) {
      if (evaluated >= features_per_split) break;
      sorted.clear();
      for (std::size_t s = task.begin; s < task.end; ++s) {
        sorted.emplace_back(x(static_cast<Eigen::Index>(samples[s]), f), samples[s]);
      }
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;  // constant here; does not count
      ++evaluated;

      std::fill(left_counts.begin(), left_counts.end(), 0.0);
      right_counts = node_counts;
      double left_total = 0.0;
      for (std::size_t s = 0; s + 1 < sorted.size(); ++s) {
        const auto i = sorted[s].second;
        const double w = sample_weight[static_cast<Eigen::Index>(i)];
        left_counts[static_cast<std::size_t>(y[i])] += w;
        right_counts[static_cast<std::size_t>(y[i])] -= w;
        left_total += w;
        if (sorted[s].first == sorted[s + 1].first) continue;
        const double right_total = total - left_total;
        const double score = -(left_total * impurity(left_counts, left_total, criterion) +
                               right_total * impurity(right_counts, right_total, criterion));
        if (score > best.score) {
          best.score = score;
          best.feature = f;
          const double lo = sorted[s].first;
          const double hi = sorted[s + 1].first;
          double mid = lo + (hi - lo) / 2.0;
          if (mid >= hi) mid = lo;
          best.threshold = mid;
        }
      }
    }
    if (best.feature < 0) continue;

    auto middle = std::stable_partition(samples.begin() + static_cast<std::ptrdiff_t>(task.begin),
                                        samples.begin() + static_cast<std::ptrdiff_t>(task.end),
                                        [&](std::size_t i) {
                                          return x(static_cast<Eigen::Index>(i), best.feature) <= best.threshold;
                                        });
    const auto split_at = static_cast<std::size_t>(middle - samples.begin());

    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[static_cast<std::size_t>(task.node)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left_id;
    node.right = left_id + 1;
    stack.push_back({split_at, task.end, task.depth + 1, left_id + 1});
    stack.push_back({task.begin, split_at, task.depth + 1, left_id});
  }
  return tree;
}

const std::vector<double>& DecisionTree::leaf_distribution(const Eigen::Ref<const RowVector>& row) const {
  std::size_t id = 0;
  while (nodes[id].feature >= 0) {
    const TreeNode& node = nodes[id];
    id = static_cast<std::size_t>(row[node.feature] <= node.threshold ? node.left : node.right);
  }
  return nodes[id].value;
}

int DecisionTree::predict_one(const Eigen::Ref<const RowVector>& row) const { return argmax(leaf_distribution(row)); }

int DecisionTree::depth() const {
  std::vector<int> depth_of(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    if (nodes[id].feature < 0) continue;
    for (int child : {nodes[id].left, nodes[id].right}) {
      depth_of[static_cast<std::size_t>(child)] = depth_of[id] + 1;
      deepest = std::max(deepest, depth_of[id] + 1);
    }
  }
  return deepest;
}

Vector DecisionTree::impurity_decrease() const {
  Vector out = Vector::Zero(n_features);
  if (nodes.empty() || nodes.front().weight <= 0.0) return out;
  const double root_weight = nodes.front().weight;
  for (const auto& node : nodes) {
    if (node.feature < 0) continue;
    const auto& l = nodes[static_cast<std::size_t>(node.left)];
    const auto& r = nodes[static_cast<std::size_t>(node.right)];
    out[node.feature] +=
        (node.weight * node.impurity - l.weight * l.impurity - r.weight * r.impurity) / root_weight;
  }
  return out;
}

RandomForest RandomForest::fit(const Matrix& x, const Labels& y, int n_classes, const RandomForestParams& params,
                               std::uint64_t seed, int threads) {
  const auto d = static_cast<int>(x.cols());
  const int max_features =
      params.max_features > 0 ? params.max_features : std::max(1, static_cast<int>(std::floor(std::sqrt(d))));
  RandomForest forest;
  forest.n_classes = n_classes;
  forest.trees.resize(static_cast<std::size_t>(params.n_estimators));
  const auto n = x.rows();
  parallel_for(forest.trees.size(), threads, [&](std::size_t t) {
    std::mt19937_64 rng(derive_seed(seed, t));
    Vector weight = Vector::Ones(n);
    if (params.bootstrap) {
      weight.setZero();
      std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
      for (Eigen::Index i = 0; i < n; ++i) weight[pick(rng)] += 1.0;
    }
    forest.trees[t] = DecisionTree::fit(x, y, n_classes, weight, params.criterion, params.max_depth, max_features, rng);
  });
  return forest;
}

Matrix RandomForest::predict_scores(const Matrix& x) const {
  Matrix votes = Matrix::Zero(x.rows(), n_classes);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (const auto& tree : trees) votes(r, tree.predict_one(x.row(r))) += 1.0;
  }
  return votes / static_cast<double>(trees.size());
}

AdaBoost AdaBoost::fit(const Matrix& x, const Labels& y, int n_classes, const AdaBoostParams& params,
                       std::uint64_t seed) {
  const auto n = x.rows();
  AdaBoost model;
  model.n_classes = n_classes;
  Vector weight = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (int m = 0; m < params.n_estimators; ++m) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(m)));
    DecisionTree stump = DecisionTree::fit(x, y, n_classes, weight, Criterion::Gini, 1, 0, rng);
    std::vector<bool> miss(static_cast<std::size_t>(n));
    double error = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      miss[static_cast<std::size_t>(i)] = stump.predict_one(x.row(i)) != y[static_cast<std::size_t>(i)];
      if (miss[static_cast<std::size_t>(i)]) error += weight[i];
    }
    error /= weight.sum();
    if (error <= 0.0) {
      // A perfect learner ends boosting.
      model.stumps.push_back(std::move(stump));
      model.weights.push_back(1.0);
      break;
    }
    if (error >= 1.0 - 1.0 / n_classes) {
      if (model.stumps.empty()) {
        model.stumps.push_back(std::move(stump));
        model.weights.push_back(1.0);
      }
      break;
    }
    const double alpha = std::log((1.0 - error) / error) + std::log(static_cast<double>(n_classes - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (miss[static_cast<std::size_t>(i)]) weight[i] *= std::exp(alpha);
    }
    weight /= weight.sum();
    model.stumps.push_back(std::move(stump));
    model.weights.push_back(alpha);
  }
  return model;
}

Matrix AdaBoost::decision(const Matrix& x, std::size_t rounds) const {
  Matrix out = Matrix::Zero(x.rows(), n_classes);
  rounds = std::min(rounds, stumps.size());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (std::size_t m = 0; m < rounds; ++m) out(r, stumps[m].predict_one(x.row(r))) += weights[m];
  }
  return out;
}

Matrix AdaBoost::predict_scores(const Matrix& x) const {
  Matrix scores = decision(x, stumps.size());
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  return scores / total;
}

std::vector<Labels> AdaBoost::staged_predict(const Matrix& x) const {
  std::vector<Labels> stages;
  Matrix running = Matrix::Zero(x.rows(), n_classes);
  for (std::size_t m = 0; m < stumps.size(); ++m) {
    Labels labels(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      running(r, stumps[m].predict_one(x.row(r))) += weights[m];
      Eigen::Index best = 0;
      running.row(r).maxCoeff(&best);
      labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
    }
    stages.push_back(std::move(labels));
  }
  return stages;
}

}  // namespace batauth
