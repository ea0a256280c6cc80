#include <batauth/error.hpp>
#include <batauth/metrics.hpp>
#include <batauth/models.hpp>
#include <batauth/parallel.hpp>

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

namespace batauth {

namespace {

constexpr std::string_view kModule = "ml-models";

Labels take(const Labels& y, const IndexList& rows) {
  Labels out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

}  // namespace

std::vector<Fold> stratified_kfold(const Labels& y, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::BadArgument, kModule, "k must be at least 2");
  std::map<int, IndexList> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
  for (const auto& [label, rows] : by_class) {
    if (rows.size() < static_cast<std::size_t>(k)) {
      throw Error(ErrorCode::ClassTooSmall, kModule,
                  "class " + std::to_string(label) + " has " + std::to_string(rows.size()) + " rows, need " +
                      std::to_string(k));
    }
  }
  std::vector<std::size_t> fold_of(y.size());
  std::size_t offset = 0;
  for (auto& [label, rows] : by_class) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(label)));
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t i = 0; i < rows.size(); ++i) fold_of[rows[i]] = (offset + i) % static_cast<std::size_t>(k);
    offset += rows.size();
  }
  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      (f == fold_of[i] ? folds[f].validation : folds[f].train).push_back(i);
    }
  }
  return folds;
}

GridSearchResult grid_search(const ModelSpec& spec, const Matrix& x, const Labels& y, int k,
                             const TrainOptions& options) {
  const auto candidates = expand_grid(spec.kind, spec.grid);
  const auto folds = stratified_kfold(y, k, spec.seed);
  TrainOptions fold_options = options;
  if (fold_options.n_classes <= 0 && !y.empty()) fold_options.n_classes = *std::max_element(y.begin(), y.end()) + 1;
  fold_options.threads = 1;

  const std::size_t cells = candidates.size() * folds.size();
  std::vector<double> scores(cells, -std::numeric_limits<double>::infinity());
  std::vector<std::string> errors(cells);
  parallel_for(cells, options.threads, [&](std::size_t cell) {
    const auto& params = candidates[cell / folds.size()];
    const auto& fold = folds[cell % folds.size()];
    try {
      const Matrix train_x = x(fold.train, Eigen::all);
      const TrainedModel model = train(params, train_x, take(y, fold.train), spec.seed, fold_options);
      const Matrix val_x = x(fold.validation, Eigen::all);
      scores[cell] = macro_f1(take(y, fold.validation), model.predict(val_x));
    } catch (const std::exception& e) {
      errors[cell] = e.what();
    }
  });

  GridSearchResult result;
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    CandidateResult candidate;
    candidate.params = candidates[c];
    bool failed = false;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const std::size_t cell = c * folds.size() + f;
      candidate.fold_scores.push_back(scores[cell]);
      if (!errors[cell].empty()) {
        failed = true;
        if (candidate.error.empty()) candidate.error = errors[cell];
      }
    }
    candidate.mean_score =
        failed ? -std::numeric_limits<double>::infinity()
               : std::accumulate(candidate.fold_scores.begin(), candidate.fold_scores.end(), 0.0) /
                     static_cast<double>(folds.size());
    if (!failed && (!found || candidate.mean_score > best)) {
      best = candidate.mean_score;
      result.best_index = c;
      found = true;
    }
    result.candidates.push_back(std::move(candidate));
  }
  if (!found) {
    throw Error(ErrorCode::GridExhausted, kModule,
                "every grid candidate failed; first error: " + result.candidates.front().error);
  }
  TrainOptions final_options = fold_options;
  final_options.threads = options.threads;
  result.model = train(candidates[result.best_index], x, y, spec.seed, final_options);
  return result;
}

}  // namespace batauth
