#include <batauth/error.hpp>
#include <batauth/eval.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace batauth {

namespace {

constexpr std::string_view kModule = "eval-explain";

using json = nlohmann::json;

std::map<int, IndexList> rows_by_label(const Labels& y) {
  std::map<int, IndexList> out;
  for (std::size_t i = 0; i < y.size(); ++i) out[y[i]].push_back(i);
  return out;
}

Labels take(const Labels& y, const IndexList& rows) {
  Labels out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

IndexList compose(const IndexList& outer, const IndexList& inner) {
  IndexList out;
  out.reserve(inner.size());
  for (auto i : inner) out.push_back(outer[i]);
  return out;
}

const Labels& target_labels(const FeatureMatrix& m, Target t) {
  return t == Target::Architecture ? m.arch_labels : m.model_labels;
}

const std::vector<std::string>& target_names(const FeatureMatrix& m, Target t) {
  return t == Target::Architecture ? m.arch_names : m.model_names;
}

/// Dense relabelling of the classes present, in ascending label order.
Labels compact(const Labels& y, std::vector<int>* original = nullptr) {
  std::map<int, int> id;
  for (int v : y) id.emplace(v, 0);
  int next = 0;
  for (auto& [label, mapped] : id) {
    mapped = next++;
    if (original) original->push_back(label);
  }
  Labels out;
  out.reserve(y.size());
  for (int v : y) out.push_back(id[v]);
  return out;
}

struct FitOutcome {
  std::vector<ModelResult> models;
  std::size_t features_kept = 0;
};

FitOutcome fit_and_score(const Matrix& x, const Labels& y, const TrainTestSplit& split, int n_classes,
                         const std::vector<ModelSpec>& specs, const EvalConfig& config,
                         const std::string& catalog_version, bool binary) {
  const Matrix train_x = x(split.train, Eigen::all);
  const Labels train_y = take(y, split.train);
  const Matrix test_x = x(split.test, Eigen::all);
  const Labels test_y = take(y, split.test);

  TrainOptions options;
  options.n_classes = n_classes;
  options.threads = config.threads;
  options.catalog_version = catalog_version;
  if (config.select_features) options.mask = select_features(train_x, train_y, config.fdr).keep;

  FitOutcome outcome;
  outcome.features_kept = options.mask.empty()
                              ? static_cast<std::size_t>(x.cols())
                              : static_cast<std::size_t>(std::count(options.mask.begin(), options.mask.end(), true));
  for (const auto& spec : specs) {
    const GridSearchResult search = grid_search(spec, train_x, train_y, config.cv_folds, options);
    ModelResult r;
    r.kind = spec.kind;
    r.hyperparams = hyperparams_to_json(search.model.hyperparams);
    r.cv_macro_f1 = search.candidates[search.best_index].mean_score;
    r.converged = search.model.converged;
    const Labels predicted = search.model.predict(test_x);
    r.model = std::make_shared<const TrainedModel>(search.model);
    r.confusion = confusion_matrix(test_y, predicted, n_classes);
    r.metrics = binary ? metrics(batauth::binary_counts(test_y, predicted)) : metrics(r.confusion);
    outcome.models.push_back(std::move(r));
  }
  return outcome;
}

json metric_json(const MetricSet& m) {
  json j = {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
            {"f1", m.f1},             {"degenerate", m.degenerate}};
  if (m.binary) {
    j["far"] = m.far;
    j["frr"] = m.frr;
  }
  return j;
}

json confusion_json(const ConfusionMatrix& c) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < c.counts.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index k = 0; k < c.counts.cols(); ++k) row.push_back(c.counts(r, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

json model_result_json(const ModelResult& r) {
  return {{"model", to_string(r.kind)},
          {"hyperparams", r.hyperparams},
          {"cv_macro_f1", r.cv_macro_f1},
          {"metrics", metric_json(r.metrics)},
          {"confusion", confusion_json(r.confusion)},
          {"converged", r.converged}};
}

std::vector<ModelKind> kinds_in(const AuthenticationResult& result) {
  std::vector<ModelKind> kinds;
  if (!result.cells.empty()) {
    for (const auto& m : result.cells.front().models) kinds.push_back(m.kind);
  }
  return kinds;
}

std::vector<int> balances_in(const AuthenticationResult& result) {
  std::vector<int> out;
  for (const auto& cell : result.cells) {
    if (std::find(out.begin(), out.end(), cell.legit_percent) == out.end()) out.push_back(cell.legit_percent);
  }
  return out;
}

void csv_row(std::string& out, std::string_view task, std::string_view model, const std::string& balance,
             const MetricSet& m) {
  out += std::string(task) + "," + std::string(model) + "," + balance + "," + format_double(m.accuracy) + "," +
         format_double(m.precision) + "," + format_double(m.recall) + "," + format_double(m.f1) + ",";
  if (m.binary) out += format_double(m.far) + "," + format_double(m.frr);
  else out += ",";
  out += "\n";
}

}  // namespace

std::string_view to_string(Task task) noexcept {
  switch (task) {
    case Task::ArchIdentification: return "arch_identification";
    case Task::ModelIdentification: return "model_identification";
    case Task::ArchAuthentication: return "arch_authentication";
    case Task::ModelAuthentication: return "model_authentication";
  }
  return "arch_identification";
}

std::string_view to_string(Target target) noexcept {
  return target == Target::Architecture ? "architecture" : "model";
}

Target parse_target(std::string_view text) {
  if (text == "architecture") return Target::Architecture;
  if (text == "model") return Target::Model;
  throw Error(ErrorCode::BadArgument, kModule, "target must be 'architecture' or 'model'");
}

void validate_balance(int legit_percent) {
  if (std::find(std::begin(kBalanceLevels), std::end(kBalanceLevels), legit_percent) == std::end(kBalanceLevels)) {
    throw Error(ErrorCode::BadArgument, kModule,
                "balance level " + std::to_string(legit_percent) + " is not one of 50, 40, 30, 20");
  }
}

std::string balance_label(int legit_percent) {
  return std::to_string(legit_percent) + "/" + std::to_string(100 - legit_percent);
}

TrainTestSplit split_train_test(const Labels& y, double ratio, std::uint64_t seed, bool stratified) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::BadArgument, kModule, "train ratio must lie in (0, 1)");
  TrainTestSplit split;
  auto deal = [&](IndexList rows, std::uint64_t stream) {
    const auto n = rows.size();
    if (n < 2) {
      throw Error(ErrorCode::ClassTooSmall, kModule, "a class needs at least 2 rows to be split");
    }
    std::mt19937_64 rng(derive_seed(seed, stream));
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround((1.0 - ratio) * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    split.test.insert(split.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  };
  if (stratified) {
    for (const auto& [label, rows] : rows_by_label(y)) deal(rows, static_cast<std::uint64_t>(static_cast<std::uint32_t>(label)));
  } else {
    IndexList all(y.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    deal(std::move(all), 0);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

IndexList undersample(const Labels& y, std::uint64_t seed) {
  const auto groups = rows_by_label(y);
  if (groups.size() < 2) throw Error(ErrorCode::SingleClass, kModule, "undersampling needs at least 2 classes");
  std::size_t minority = y.size();
  for (const auto& [label, rows] : groups) minority = std::min(minority, rows.size());
  IndexList out;
  for (auto [label, rows] : groups) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::uint32_t>(label))));
    std::shuffle(rows.begin(), rows.end(), rng);
    out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::mt19937_64 rng(derive_seed(seed, ~std::uint64_t{0}));
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

AuthScenario make_auth_scenario(const Labels& y, int legit_label, int legit_percent, std::uint64_t seed) {
  validate_balance(legit_percent);
  auto groups = rows_by_label(y);
  const auto legit_it = groups.find(legit_label);
  if (legit_it == groups.end()) {
    throw Error(ErrorCode::LabelAbsent, kModule, "label " + std::to_string(legit_label) + " is not present");
  }
  IndexList legit = legit_it->second;
  groups.erase(legit_it);
  std::size_t pool = 0;
  for (const auto& [label, rows] : groups) pool += rows.size();
  if (legit.empty() || pool == 0) {
    throw Error(ErrorCode::InfeasibleBalance, kModule, "need both legitimate and counterfeit rows");
  }

  const auto p = static_cast<std::size_t>(legit_percent);
  const std::size_t total = std::min(legit.size() * 100 / p, pool * 100 / (100 - p));
  const std::size_t n_legit =
      std::min(legit.size(), static_cast<std::size_t>(std::llround(static_cast<double>(total * p) / 100.0)));
  const std::size_t n_counterfeit = std::min(pool, total - n_legit);
  if (n_legit == 0 || n_counterfeit == 0) {
    throw Error(ErrorCode::InfeasibleBalance, kModule,
                "too few rows for a " + balance_label(legit_percent) + " scenario");
  }

  // Water-fill the counterfeit quota over the other classes in label order.
  std::vector<std::size_t> quota(groups.size(), 0);
  std::size_t remaining = n_counterfeit;
  while (remaining > 0) {
    std::size_t open = 0;
    std::size_t g = 0;
    for (const auto& [label, rows] : groups) open += quota[g++] < rows.size() ? 1 : 0;
    const std::size_t share = std::max<std::size_t>(1, remaining / open);
    g = 0;
    for (const auto& [label, rows] : groups) {
      const std::size_t add = std::min({share, rows.size() - quota[g], remaining});
      quota[g++] += add;
      remaining -= add;
      if (remaining == 0) break;
    }
  }

  AuthScenario scenario;
  std::mt19937_64 legit_rng(derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::uint32_t>(legit_label))));
  std::shuffle(legit.begin(), legit.end(), legit_rng);
  std::vector<std::pair<std::size_t, int>> chosen;
  for (std::size_t i = 0; i < n_legit; ++i) chosen.emplace_back(legit[i], 1);
  std::size_t g = 0;
  for (auto [label, rows] : groups) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::uint32_t>(label))));
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t i = 0; i < quota[g]; ++i) chosen.emplace_back(rows[i], 0);
    ++g;
  }
  std::sort(chosen.begin(), chosen.end());
  for (const auto& [row, label] : chosen) {
    scenario.rows.push_back(row);
    scenario.y.push_back(label);
  }
  scenario.n_legit = n_legit;
  scenario.n_counterfeit = n_counterfeit;
  return scenario;
}

json eval_config_to_json(const EvalConfig& c) {
  json targets = json::array();
  for (auto t : c.targets) targets.push_back(to_string(t));
  return {{"train_ratio", c.train_ratio},
          {"stratified", c.stratified},
          {"undersample_before_split", c.undersample_before_split},
          {"select_features", c.select_features},
          {"fdr", c.fdr},
          {"cv_folds", c.cv_folds},
          {"targets", std::move(targets)},
          {"balances", c.balances},
          {"seed", c.seed}};
}

ConfusionCounts binary_counts(const ModelResult& result) {
  if (result.confusion.counts.rows() != 2) {
    throw Error(ErrorCode::BadArgument, kModule, "binary counts need a 2 x 2 confusion matrix");
  }
  return one_vs_rest(result.confusion, 1);
}

MetricSet average_metrics(const AuthenticationResult& result, ModelKind kind, int legit_percent) {
  MetricSet avg;
  std::size_t count = 0;
  for (const auto& cell : result.cells) {
    if (legit_percent != 0 && cell.legit_percent != legit_percent) continue;
    for (const auto& m : cell.models) {
      if (m.kind != kind) continue;
      avg.accuracy += m.metrics.accuracy;
      avg.precision += m.metrics.precision;
      avg.recall += m.metrics.recall;
      avg.f1 += m.metrics.f1;
      avg.far += m.metrics.far;
      avg.frr += m.metrics.frr;
      avg.degenerate = avg.degenerate || m.metrics.degenerate;
      ++count;
    }
  }
  if (count == 0) return avg;
  const auto n = static_cast<double>(count);
  avg.accuracy /= n;
  avg.precision /= n;
  avg.recall /= n;
  avg.f1 /= n;
  avg.far /= n;
  avg.frr /= n;
  return avg;
}

EvalReport run_identification(const FeatureMatrix& matrix, const std::vector<ModelSpec>& specs,
                              const EvalConfig& config) {
  matrix.check();
  EvalReport report;
  report.config = config;
  for (std::size_t t = 0; t < config.targets.size(); ++t) {
    const Target target = config.targets[t];
    const Labels& labels = target_labels(matrix, target);
    const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(target));

    IndexList pool(labels.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    if (config.undersample_before_split) pool = undersample(labels, derive_seed(seed, 1));
    std::vector<int> original;
    const Labels y = compact(take(labels, pool), &original);
    if (original.size() < 2) throw Error(ErrorCode::SingleClass, kModule, "identification needs 2 or more classes");

    TrainTestSplit split = split_train_test(y, config.train_ratio, derive_seed(seed, 2), config.stratified);
    if (!config.undersample_before_split) {
      const IndexList kept = compose(split.train, undersample(take(y, split.train), derive_seed(seed, 1)));
      split.train = kept;
      std::sort(split.train.begin(), split.train.end());
    }
    const Matrix x = matrix.values(pool, Eigen::all);

    IdentificationResult result;
    result.task = target == Target::Architecture ? Task::ArchIdentification : Task::ModelIdentification;
    for (int label : original) result.class_names.push_back(target_names(matrix, target)[static_cast<std::size_t>(label)]);
    result.n_train = split.train.size();
    result.n_test = split.test.size();
    std::vector<ModelSpec> seeded = specs;
    for (auto& s : seeded) s.seed = derive_seed(seed, 3, s.seed);
    auto outcome = fit_and_score(x, y, split, static_cast<int>(original.size()), seeded, config,
                                 matrix.catalog_version, false);
    result.features_kept = outcome.features_kept;
    result.models = std::move(outcome.models);
    report.identification.push_back(std::move(result));
  }
  return report;
}

EvalReport run_authentication(const FeatureMatrix& matrix, const std::vector<ModelSpec>& specs,
                              const EvalConfig& config) {
  matrix.check();
  for (int b : config.balances) validate_balance(b);
  EvalReport report;
  report.config = config;
  for (const Target target : config.targets) {
    const Labels& labels = target_labels(matrix, target);
    const auto& names = target_names(matrix, target);
    const std::uint64_t seed = derive_seed(config.seed, 16 + static_cast<std::uint64_t>(target));
    std::vector<int> present;
    compact(labels, &present);
    if (present.size() < 2) throw Error(ErrorCode::SingleClass, kModule, "authentication needs 2 or more labels");

    AuthenticationResult result;
    result.task = target == Target::Architecture ? Task::ArchAuthentication : Task::ModelAuthentication;
    for (int legit : present) {
      for (int balance : config.balances) {
        const std::uint64_t cell_seed =
            derive_seed(seed, static_cast<std::uint64_t>(legit), static_cast<std::uint64_t>(balance));
        const AuthScenario scenario = make_auth_scenario(labels, legit, balance, derive_seed(cell_seed, 0));
        const TrainTestSplit split =
            split_train_test(scenario.y, config.train_ratio, derive_seed(cell_seed, 1), config.stratified);
        const Matrix x = matrix.values(scenario.rows, Eigen::all);
        std::vector<ModelSpec> seeded = specs;
        for (auto& s : seeded) s.seed = derive_seed(cell_seed, 2, s.seed);

        AuthenticationCell cell;
        cell.legit_label = names[static_cast<std::size_t>(legit)];
        cell.legit_percent = balance;
        cell.n_legit = scenario.n_legit;
        cell.n_counterfeit = scenario.n_counterfeit;
        cell.n_test = split.test.size();
        auto outcome = fit_and_score(x, scenario.y, split, 2, seeded, config, matrix.catalog_version, true);
        cell.features_kept = outcome.features_kept;
        cell.models = std::move(outcome.models);
        result.cells.push_back(std::move(cell));
      }
    }
    report.authentication.push_back(std::move(result));
  }
  return report;
}

json report_to_json(const EvalReport& report) {
  json identification = json::array();
  for (const auto& r : report.identification) {
    json models = json::array();
    for (const auto& m : r.models) models.push_back(model_result_json(m));
    identification.push_back({{"task", to_string(r.task)},
                              {"classes", r.class_names},
                              {"n_train", r.n_train},
                              {"n_test", r.n_test},
                              {"features_kept", r.features_kept},
                              {"models", std::move(models)}});
  }
  json authentication = json::array();
  for (const auto& r : report.authentication) {
    json cells = json::array();
    for (const auto& c : r.cells) {
      json models = json::array();
      for (const auto& m : c.models) {
        json mj = model_result_json(m);
        const auto counts = binary_counts(m);
        mj["counts"] = {{"tp", counts.tp}, {"tn", counts.tn}, {"fp", counts.fp}, {"fn", counts.fn}};
        models.push_back(std::move(mj));
      }
      cells.push_back({{"legit_label", c.legit_label},
                       {"legit_percent", c.legit_percent},
                       {"balance", balance_label(c.legit_percent)},
                       {"balance_counterfeit_first", std::to_string(100 - c.legit_percent) + "/" +
                                                         std::to_string(c.legit_percent)},
                       {"n_legit", c.n_legit},
                       {"n_counterfeit", c.n_counterfeit},
                       {"n_test", c.n_test},
                       {"features_kept", c.features_kept},
                       {"models", std::move(models)}});
    }
    json averages = json::array();
    for (ModelKind kind : kinds_in(r)) {
      json per_balance = json::object();
      for (int b : balances_in(r)) per_balance[balance_label(b)] = metric_json(average_metrics(r, kind, b));
      averages.push_back({{"model", to_string(kind)},
                          {"overall", metric_json(average_metrics(r, kind))},
                          {"by_balance", std::move(per_balance)}});
    }
    authentication.push_back(
        {{"task", to_string(r.task)}, {"cells", std::move(cells)}, {"averages", std::move(averages)}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"config", eval_config_to_json(report.config)},
          {"identification", std::move(identification)},
          {"authentication", std::move(authentication)}};
}

std::string report_to_csv(const EvalReport& report) {
  std::string out = "task,model,balance,accuracy,precision,recall,f1,far,frr\n";
  for (const auto& r : report.identification) {
    for (const auto& m : r.models) csv_row(out, to_string(r.task), short_name(m.kind), "", m.metrics);
  }
  for (const auto& r : report.authentication) {
    for (ModelKind kind : kinds_in(r)) {
      for (int b : balances_in(r)) csv_row(out, to_string(r.task), short_name(kind), balance_label(b), average_metrics(r, kind, b));
      csv_row(out, to_string(r.task), short_name(kind), "mean", average_metrics(r, kind));
    }
  }
  return out;
}

Vector mdi_importance(const TrainedModel& model) {
  std::vector<const DecisionTree*> trees;
  if (const auto* t = std::get_if<DecisionTree>(&model.classifier)) trees.push_back(t);
  else if (const auto* rf = std::get_if<RandomForest>(&model.classifier))
    for (const auto& t : rf->trees) trees.push_back(&t);
  else if (const auto* ab = std::get_if<AdaBoost>(&model.classifier))
    for (const auto& t : ab->stumps) trees.push_back(&t);
  else
    throw Error(ErrorCode::UnsupportedKind, kModule,
                std::string("MDI importance needs a tree model, got ") + std::string(to_string(model.kind)));

  const Eigen::Index kept = model.standardizer.mean.size();
  Vector inner = Vector::Zero(kept);
  for (const auto* tree : trees) {
    const Vector decrease = tree->impurity_decrease().cwiseMax(0.0);
    const double sum = decrease.sum();
    if (sum > 0.0) inner += decrease / sum;
  }
  const double total = inner.sum();
  inner = total > 0.0 ? Vector(inner / total) : Vector(Vector::Constant(kept, 1.0 / static_cast<double>(kept)));

  Vector out = Vector::Zero(model.input_width());
  Eigen::Index at = 0;
  for (std::size_t c = 0; c < model.mask.size(); ++c) {
    if (model.mask[c]) out[static_cast<Eigen::Index>(c)] = inner[at++];
  }
  return out;
}

PermutationImportance permutation_importance(const TrainedModel& model, const Matrix& x, const Labels& y,
                                             int repeats, std::uint64_t seed) {
  if (repeats < 1) throw Error(ErrorCode::BadArgument, kModule, "repeats must be >= 1");
  if (x.cols() != model.input_width()) {
    throw Error(ErrorCode::DimensionMismatch, kModule,
                "model expects " + std::to_string(model.input_width()) + " features, got " + std::to_string(x.cols()));
  }
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, kModule, "row count and label count differ");
  }
  PermutationImportance out;
  out.baseline = macro_f1(y, model.predict(x));
  out.mean_drop = Vector::Zero(x.cols());
  out.std_drop = Vector::Zero(x.cols());
  Matrix work = x;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (!model.mask[static_cast<std::size_t>(c)]) continue;
    Vector drops(repeats);
    for (int r = 0; r < repeats; ++r) {
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r)));
      std::shuffle(order.begin(), order.end(), rng);
      for (Eigen::Index i = 0; i < x.rows(); ++i) work(i, c) = x(order[static_cast<std::size_t>(i)], c);
      drops[r] = out.baseline - macro_f1(y, model.predict(work));
    }
    work.col(c) = x.col(c);
    out.mean_drop[c] = drops.mean();
    out.std_drop[c] = std::sqrt((drops.array() - drops.mean()).square().mean());
  }
  return out;
}

}  // namespace batauth
