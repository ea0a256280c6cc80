#include "support.hpp"

#include <batauth/metrics.hpp>
#include <batauth/models.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

using namespace batauth;
using batauth::test::error_of;

namespace {

Matrix column(std::initializer_list<double> values) {
  Matrix x(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) x(i++, 0) = v;
  return x;
}

double normal_pdf(double x, double mean, double var) {
  return std::exp(-(x - mean) * (x - mean) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Three well separated 2-D clusters of 15 points each.
void three_clusters(Matrix& x, Labels& y, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  const double centres[3][2] = {{0, 0}, {4, 0}, {0, 4}};
  x.resize(45, 2);
  y.resize(45);
  for (int i = 0; i < 45; ++i) {
    const int c = i / 15;
    y[static_cast<std::size_t>(i)] = c;
    x(i, 0) = centres[c][0] + n(rng);
    x(i, 1) = centres[c][1] + n(rng);
  }
}

}  // namespace

TEST_SUITE("ml-models") {
  TEST_CASE("GaussianNB matches the closed-form posterior") {
    const Matrix x = column({0, 1, 10, 11});
    const Labels y = {0, 0, 1, 1};
    const GaussianNb nb = GaussianNb::fit(x, y, 2, GaussianNbParams{});
    // Overall variance of {0,1,10,11} is 25.25; each class has variance 0.25.
    const double eps = 1e-9 * 25.25;
    for (double q : {0.4, 3.0, 5.5, 6.0, 10.7}) {
      const double pa = normal_pdf(q, 0.5, 0.25 + eps);
      const double pb = normal_pdf(q, 10.5, 0.25 + eps);
      const Matrix s = nb.predict_scores(column({q}));
      if (pa + pb > 1e-300) CHECK(s(0, 0) == doctest::Approx(pa / (pa + pb)).epsilon(1e-12));
    }
    const TrainedModel m = train(GaussianNbParams{}, x, y, 0);
    CHECK(m.predict(column({0.4})) == Labels{0});
  }

  TEST_CASE("decision tree stopping and memorisation") {
    // A constant column admits no split, so the root stays a leaf.
    const Matrix x = column({1, 1, 1});
    const TrainedModel flat = train(DecisionTreeParams{}, x, Labels{0, 1, 0}, 0);
    const auto& tree = std::get<DecisionTree>(flat.classifier);
    CHECK(tree.nodes.size() == 1);
    CHECK(flat.predict(x) == Labels{0, 0, 0});
    CHECK(error_of([&] { train(DecisionTreeParams{}, x, Labels{0, 0, 0}, 0); }) == ErrorCode::SingleClass);

    Matrix cx;
    Labels cy;
    three_clusters(cx, cy);
    CHECK(train(DecisionTreeParams{}, cx, cy, 0).predict(cx) == cy);
  }

  TEST_CASE("KNN with k=1 is perfect on its training set") {
    Matrix x;
    Labels y;
    three_clusters(x, y, 4);
    KnnParams p;
    p.k = 1;
    CHECK(train(p, x, y, 0).predict(x) == y);
  }

  TEST_CASE("scores are distributions and widths are checked") {
    Matrix x;
    Labels y;
    three_clusters(x, y);
    for (ModelKind kind : kAllModelKinds) {
      CAPTURE(to_string(kind));
      const TrainedModel m = train(default_hyperparams(kind), x, y, 3);
      CHECK(m.predict(x).size() == y.size());
      if (auto s = m.predict_scores(x)) {
        CHECK(((s->rowwise().sum().array() - 1.0).abs().maxCoeff()) < 1e-12);
        CHECK(s->minCoeff() >= 0.0);
      } else {
        CHECK(kind == ModelKind::SVM);
      }
      CHECK(error_of([&] { m.predict(Matrix::Zero(2, 3)); }) == ErrorCode::DimensionMismatch);
    }
  }

  TEST_CASE("standardised training features") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(5.0, 3.0);
    Matrix x(30, 3);
    for (Eigen::Index i = 0; i < 30; ++i) {
      x(i, 0) = n(rng);
      x(i, 1) = 7.0;
      x(i, 2) = 100.0 * n(rng);
    }
    Labels y(30);
    for (int i = 0; i < 30; ++i) y[static_cast<std::size_t>(i)] = i % 2;
    const TrainedModel m = train(GaussianNbParams{}, x, y, 0);
    const Matrix z = m.transform(x);
    const RowVector mean = z.colwise().mean();
    CHECK(mean.cwiseAbs().maxCoeff() < 1e-9);
    const RowVector sd = ((z.rowwise() - mean).array().square().colwise().mean()).sqrt();
    CHECK(sd[0] == doctest::Approx(1.0));
    CHECK(sd[1] == 0.0);
    CHECK(sd[2] == doctest::Approx(1.0));
  }

  TEST_CASE("one-tree forest without bootstrap equals a decision tree") {
    Matrix x;
    Labels y;
    three_clusters(x, y, 6);
    RandomForestParams rf;
    rf.n_estimators = 1;
    rf.bootstrap = false;
    rf.max_features = 2;
    for (Criterion c : {Criterion::Gini, Criterion::Entropy}) {
      rf.criterion = c;
      const RandomForest forest = RandomForest::fit(x, y, 3, rf, 17);
      std::mt19937_64 rng(derive_seed(17, 0));
      const DecisionTree tree = DecisionTree::fit(x, y, 3, Vector::Ones(x.rows()), c, 0, 2, rng);
      REQUIRE(forest.trees.size() == 1);
      CHECK(forest.trees[0].nodes.size() == tree.nodes.size());
      Matrix grid(100, 2);
      for (int i = 0; i < 100; ++i) grid.row(i) << (i % 10) * 0.5 - 0.5, (i / 10) * 0.5 - 0.5;
      const Matrix votes = forest.predict_scores(grid);
      for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        Eigen::Index best = 0;
        votes.row(i).maxCoeff(&best);
        CHECK(best == tree.predict_one(grid.row(i)));
      }
    }
  }

  TEST_CASE("AdaBoost training error never rises on separable 1-D data") {
    std::vector<double> values;
    Labels y;
    for (int i = 0; i < 40; ++i) {
      values.push_back(i * 0.25);
      y.push_back(i >= 13 ? 1 : 0);
    }
    Matrix x(40, 1);
    for (int i = 0; i < 40; ++i) x(i, 0) = values[static_cast<std::size_t>(i)];
    AdaBoostParams p;
    p.n_estimators = 20;
    const AdaBoost ab = AdaBoost::fit(x, y, 2, p, 0);
    double last = 1.0;
    for (const Labels& stage : ab.staged_predict(x)) {
      double err = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) err += stage[i] != y[i] ? 1.0 : 0.0;
      err /= static_cast<double>(y.size());
      CHECK(err <= last + 1e-15);
      last = err;
    }
    CHECK(last == 0.0);
  }

  TEST_CASE("QDA shrinkage") {
    Matrix x(8, 2);
    x << 0, 0, 1, 1, 2, 2, 3, 3, 10, 0, 11, 1, 12, 2, 13, 3;  // each class lies on a line
    const Labels y = {0, 0, 0, 0, 1, 1, 1, 1};
    CHECK(error_of([&] { Qda::fit(x, y, 2, QdaParams{0.0}); }) == ErrorCode::SingularCovariance);
    const Qda q = Qda::fit(x, y, 2, QdaParams{0.5});
    const Matrix s = q.predict_scores(x);
    for (int i = 0; i < 8; ++i) CHECK(s(i, y[static_cast<std::size_t>(i)]) > 0.5);
  }

  TEST_CASE("SVM separates and reports convergence") {
    Matrix x;
    Labels y;
    test::blobs(30, 2, 6.0, 3, x, y);
    for (SvmKernel k : {SvmKernel::Linear, SvmKernel::Rbf}) {
      SvmParams p;
      p.kernel = k;
      const TrainedModel m = train(p, x, y, 0);
      CHECK(m.converged);
      CHECK(macro_f1(y, m.predict(x)) == 1.0);
    }
    Matrix cx;
    Labels cy;
    three_clusters(cx, cy);
    CHECK(macro_f1(cy, train(SvmParams{}, cx, cy, 0).predict(cx)) == 1.0);
  }

  TEST_CASE("stratified folds") {
    Labels y(20);
    for (int i = 0; i < 20; ++i) y[static_cast<std::size_t>(i)] = i < 10 ? 0 : 1;
    const auto folds = stratified_kfold(y, 5, 42);
    REQUIRE(folds.size() == 5);
    std::multiset<std::size_t> seen;
    for (const auto& f : folds) {
      int a = 0, b = 0;
      for (auto i : f.validation) (y[i] == 0 ? a : b) += 1;
      CHECK(a == 2);
      CHECK(b == 2);
      CHECK(f.train.size() + f.validation.size() == 20);
      seen.insert(f.validation.begin(), f.validation.end());
    }
    CHECK(seen.size() == 20);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 20);
    const auto again = stratified_kfold(y, 5, 42);
    for (std::size_t k = 0; k < 5; ++k) CHECK(again[k].validation == folds[k].validation);

    Labels small = {0, 0, 0, 1, 1, 1, 1, 1};
    CHECK(error_of([&] { stratified_kfold(small, 5, 0); }) == ErrorCode::ClassTooSmall);
  }

  TEST_CASE("grid search picks the brute-force argmax") {
    // Two interleaved classes along a line: only the nearest neighbour is right.
    Matrix x(40, 1);
    Labels y(40);
    for (int i = 0; i < 40; ++i) {
      x(i, 0) = static_cast<double>(i / 2) + (i % 2 == 0 ? 0.0 : 0.01);
      y[static_cast<std::size_t>(i)] = (i / 2) % 2;
    }
    ModelSpec spec{ModelKind::KNN, {{"k", {3, 1}}}, 0};
    const GridSearchResult r = grid_search(spec, x, y, 5);

    const auto folds = stratified_kfold(y, 5, spec.seed);
    std::vector<double> oracle;
    for (int k : {3, 1}) {
      double total = 0.0;
      for (const auto& f : folds) {
        KnnParams p;
        p.k = k;
        Labels ty, vy;
        for (auto i : f.train) ty.push_back(y[i]);
        for (auto i : f.validation) vy.push_back(y[i]);
        const TrainedModel m = train(p, x(f.train, Eigen::all), ty, 0);
        total += macro_f1(vy, m.predict(x(f.validation, Eigen::all)));
      }
      oracle.push_back(total / 5.0);
    }
    CHECK(r.candidates[0].mean_score == doctest::Approx(oracle[0]));
    CHECK(r.candidates[1].mean_score == doctest::Approx(oracle[1]));
    CHECK(r.best_index == (oracle[1] > oracle[0] ? 1u : 0u));
    CHECK(std::get<KnnParams>(r.model.hyperparams).k == 1);

    const GridSearchResult single = grid_search(ModelSpec{ModelKind::KNN, {{"k", {3}}}, 0}, x, y, 5);
    CHECK(single.best_index == 0);
  }

  TEST_CASE("grid search of failing candidates") {
    Matrix x(20, 2);
    Labels y(20);
    for (int i = 0; i < 20; ++i) {
      x(i, 0) = i;
      x(i, 1) = 2.0 * i;  // collinear columns: every class covariance is singular
      y[static_cast<std::size_t>(i)] = i % 2;
    }
    CHECK(error_of([&] { grid_search(ModelSpec{ModelKind::QDA, {{"reg", {0.0}}}, 0}, x, y, 5); }) ==
          ErrorCode::GridExhausted);
    const GridSearchResult r = grid_search(ModelSpec{ModelKind::QDA, {{"reg", {0.0, 0.5}}}, 0}, x, y, 5);
    CHECK(r.candidates[0].mean_score == -std::numeric_limits<double>::infinity());
    CHECK(r.best_index == 1);
  }

  TEST_CASE("hyperparameter grids") {
    CHECK(expand_grid(ModelKind::SVM, default_grid(ModelKind::SVM)).size() == 18);
    CHECK(expand_grid(ModelKind::DecisionTree, default_grid(ModelKind::DecisionTree)).size() == 8);
    CHECK(error_of([] { expand_grid(ModelKind::KNN, {{"depth", {1}}}); }) == ErrorCode::BadHyperparams);
    CHECK(error_of([] { expand_grid(ModelKind::KNN, {{"k", {}}}); }) == ErrorCode::BadHyperparams);
    const auto grid = expand_grid(ModelKind::DecisionTree, default_grid(ModelKind::DecisionTree));
    CHECK(std::get<DecisionTreeParams>(grid[1]).max_depth == 8);
    CHECK(std::get<DecisionTreeParams>(grid[3]).max_depth == 0);
    CHECK(std::get<DecisionTreeParams>(grid[4]).criterion == Criterion::Entropy);
  }

  TEST_CASE("model JSON round trip for every kind") {
    Matrix x;
    Labels y;
    three_clusters(x, y, 12);
    for (ModelKind kind : kAllModelKinds) {
      CAPTURE(to_string(kind));
      TrainOptions opts;
      opts.mask = {true, true};
      opts.catalog_version = "test";
      TrainedModel m = train(default_hyperparams(kind), x, y, 5, opts);
      m.class_names = {"a", "b", "c"};
      const nlohmann::json j = model_to_json(m);
      const TrainedModel back = model_from_json(nlohmann::json::parse(j.dump()));
      CHECK(back.predict(x) == m.predict(x));
      CHECK(model_to_json(back).dump() == j.dump());
      CHECK(back.class_names == m.class_names);
    }
  }

  TEST_CASE("model files reject other versions") {
    Matrix x;
    Labels y;
    three_clusters(x, y);
    nlohmann::json j = model_to_json(train(GaussianNbParams{}, x, y, 0));
    j["format_version"] = kModelFormatVersion + 1;
    CHECK(error_of([&] { model_from_json(j); }) == ErrorCode::FormatVersionMismatch);
    j.erase("format_version");
    CHECK(error_of([&] { model_from_json(j); }) == ErrorCode::FormatVersionMismatch);
    CHECK(error_of([] { model_from_json(nlohmann::json{{"format_version", kModelFormatVersion}}); }) ==
          ErrorCode::FormatVersionMismatch);
  }

  TEST_CASE("training preconditions") {
    const Matrix x = column({1, 2, 3});
    CHECK(error_of([&] { train(GaussianNbParams{}, x, Labels{0, 1}, 0); }) == ErrorCode::DimensionMismatch);
    CHECK(error_of([&] { train(GaussianNbParams{}, x, Labels{1, 1, 1}, 0); }) == ErrorCode::SingleClass);
    Matrix bad = x;
    bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK(error_of([&] { train(GaussianNbParams{}, bad, Labels{0, 1, 1}, 0); }) == ErrorCode::NonFiniteValue);
  }

  TEST_CASE("training is deterministic") {
    Matrix x;
    Labels y;
    three_clusters(x, y, 21);
    for (ModelKind kind : {ModelKind::RandomForest, ModelKind::NeuralNet, ModelKind::AdaBoost}) {
      const auto a = model_to_json(train(default_hyperparams(kind), x, y, 9)).dump();
      TrainOptions threaded;
      threaded.threads = 4;
      const auto b = model_to_json(train(default_hyperparams(kind), x, y, 9, threaded)).dump();
      CHECK(a == b);
    }
  }
}
