#pragma once

#include <batauth/types.hpp>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace batauth {

enum class ModelKind { AdaBoost, DecisionTree, GaussianNB, KNN, NeuralNet, QDA, RandomForest, SVM };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::AdaBoost, ModelKind::DecisionTree, ModelKind::GaussianNB,
                                               ModelKind::KNN,      ModelKind::NeuralNet,    ModelKind::QDA,
                                               ModelKind::RandomForest, ModelKind::SVM};

std::string_view to_string(ModelKind kind) noexcept;
/// Short label used in report tables (AB, DT, GNB, KNN, NN, QDA, RF, SVM).
std::string_view short_name(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view text);

enum class Criterion { Gini, Entropy };
enum class Activation { Relu, Tanh };
enum class Solver { Sgd, Adam };
enum class KnnWeights { Uniform, Distance };
enum class SvmKernel { Linear, Rbf };

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

struct AdaBoostParams {
  int n_estimators = 50;
  bool operator==(const AdaBoostParams&) const = default;
};

struct DecisionTreeParams {
  Criterion criterion = Criterion::Gini;
  int max_depth = 0;     // 0 = unlimited
  int max_features = 0;  // 0 = all features
  bool operator==(const DecisionTreeParams&) const = default;
};

struct GaussianNbParams {
  double var_smoothing = 1e-9;
  bool operator==(const GaussianNbParams&) const = default;
};

struct KnnParams {
  int k = 5;
  KnnWeights weights = KnnWeights::Uniform;
  bool operator==(const KnnParams&) const = default;
};

struct NeuralNetParams {
  int hidden = 100;
  Activation activation = Activation::Relu;
  Solver solver = Solver::Adam;
  int max_epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double l2 = 1e-4;
  double tol = 1e-4;
  int patience = 10;
  bool operator==(const NeuralNetParams&) const = default;
};

struct QdaParams {
  double reg = 0.0;
  bool operator==(const QdaParams&) const = default;
};

struct RandomForestParams {
  Criterion criterion = Criterion::Gini;
  int n_estimators = 100;
  bool bootstrap = true;
  int max_features = 0;  // 0 = floor(sqrt(d))
  int max_depth = 0;
  bool operator==(const RandomForestParams&) const = default;
};

struct SvmParams {
  SvmKernel kernel = SvmKernel::Rbf;
  double c = 1.0;
  std::optional<double> gamma;  // empty = "scale", 1 / (d * var(X))
  double tol = 1e-3;
  bool operator==(const SvmParams&) const = default;
};

using Hyperparams = std::variant<AdaBoostParams, DecisionTreeParams, GaussianNbParams, KnnParams, NeuralNetParams,
                                 QdaParams, RandomForestParams, SvmParams>;

ModelKind kind_of(const Hyperparams& params) noexcept;
Hyperparams default_hyperparams(ModelKind kind);
nlohmann::json hyperparams_to_json(const Hyperparams& params);
/// Starts from the defaults of `kind` and overrides the keys present in `j`.
Hyperparams hyperparams_from_json(ModelKind kind, const nlohmann::json& j);

/// One searched dimension: name and candidate values (JSON scalars, e.g.
/// "gini", 16, null for an unlimited depth, "scale" for SVM gamma).
struct GridDimension {
  std::string name;
  std::vector<nlohmann::json> values;
};
using ParamGrid = std::vector<GridDimension>;

/// The default value grids for each kind.
ParamGrid default_grid(ModelKind kind);
/// Cartesian product, first dimension varying slowest.
std::vector<Hyperparams> expand_grid(ModelKind kind, const ParamGrid& grid);

struct ModelSpec {
  ModelKind kind = ModelKind::RandomForest;
  ParamGrid grid;
  std::uint64_t seed = 0;
};

ModelSpec default_spec(ModelKind kind, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Classifiers. Each works on already standardised, masked features with
// labels in [0, n_classes).
// ---------------------------------------------------------------------------

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double impurity = 0.0;
  double weight = 0.0;        // weighted sample count reaching the node
  std::vector<double> value;  // class distribution, sums to 1
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  int n_classes = 0;
  int n_features = 0;

  static DecisionTree fit(const Matrix& x, const Labels& y, int n_classes, const Vector& sample_weight,
                          Criterion criterion, int max_depth, int max_features, std::mt19937_64& rng);

  const std::vector<double>& leaf_distribution(const Eigen::Ref<const RowVector>& row) const;
  int predict_one(const Eigen::Ref<const RowVector>& row) const;
  int depth() const;
  /// Weighted impurity decrease summed per feature (not normalised).
  Vector impurity_decrease() const;
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  int n_classes = 0;

  static RandomForest fit(const Matrix& x, const Labels& y, int n_classes, const RandomForestParams& params,
                          std::uint64_t seed, int threads = 1);
  /// Vote fractions per class.
  Matrix predict_scores(const Matrix& x) const;
};

struct AdaBoost {
  std::vector<DecisionTree> stumps;
  std::vector<double> weights;
  int n_classes = 0;

  static AdaBoost fit(const Matrix& x, const Labels& y, int n_classes, const AdaBoostParams& params,
                      std::uint64_t seed);
  Matrix decision(const Matrix& x, std::size_t rounds) const;
  Matrix predict_scores(const Matrix& x) const;
  /// Predictions after each boosting round.
  std::vector<Labels> staged_predict(const Matrix& x) const;
};

struct GaussianNb {
  Matrix means;      // classes x features
  Matrix variances;  // classes x features, smoothing included
  Vector log_priors;
  double epsilon = 0.0;

  static GaussianNb fit(const Matrix& x, const Labels& y, int n_classes, const GaussianNbParams& params);
  Matrix joint_log_likelihood(const Matrix& x) const;
  Matrix predict_scores(const Matrix& x) const;
};

struct Knn {
  Matrix train_x;
  Labels train_y;
  int n_classes = 0;
  KnnParams params;

  static Knn fit(const Matrix& x, const Labels& y, int n_classes, const KnnParams& params);
  Matrix predict_scores(const Matrix& x) const;
};

struct NeuralNet {
  Eigen::MatrixXd w1;  // features x hidden
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // hidden x classes
  Eigen::VectorXd b2;
  Activation activation = Activation::Relu;
  std::vector<double> loss_curve;
  bool converged = false;

  static NeuralNet fit(const Matrix& x, const Labels& y, int n_classes, const NeuralNetParams& params,
                       std::uint64_t seed);
  Matrix predict_scores(const Matrix& x) const;
};

struct Qda {
  Matrix means;                           // classes x features
  std::vector<Eigen::MatrixXd> cholesky;  // lower factor of each regularised covariance
  Vector log_dets;
  Vector log_priors;

  static Qda fit(const Matrix& x, const Labels& y, int n_classes, const QdaParams& params);
  Matrix predict_scores(const Matrix& x) const;
};

/// One-vs-rest kernel SVM trained with SMO (second-order working-set selection).
struct Svm {
  struct Machine {
    Matrix support;      // support vectors by rows
    Vector coefficients; // alpha_i * y_i
    double rho = 0.0;
    bool converged = true;
    std::size_t iterations = 0;
  };
  std::vector<Machine> machines;  // one per class, or a single one for binary problems
  SvmKernel kernel = SvmKernel::Rbf;
  double gamma = 1.0;
  int n_classes = 0;

  static Svm fit(const Matrix& x, const Labels& y, int n_classes, const SvmParams& params);
  /// Decision values, one column per machine.
  Matrix decision(const Matrix& x) const;
  Labels predict(const Matrix& x) const;
  bool converged() const;
};

using Classifier = std::variant<AdaBoost, DecisionTree, GaussianNb, Knn, NeuralNet, Qda, RandomForest, Svm>;

// ---------------------------------------------------------------------------
// Trained pipeline model
// ---------------------------------------------------------------------------

struct Standardizer {
  Vector mean;
  Vector scale;  // population std, 1 for constant columns

  static Standardizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

inline constexpr int kModelFormatVersion = 1;

struct TrainedModel {
  ModelKind kind = ModelKind::RandomForest;
  Hyperparams hyperparams;
  Standardizer standardizer;
  std::vector<bool> mask;  // over input columns
  Classifier classifier;
  int n_classes = 0;
  std::vector<std::string> class_names;
  std::string catalog_version;
  std::uint64_t seed = 0;
  /// False when an iterative solver hit its cap.
  bool converged = true;
  /// Free-form provenance (pipeline kind, preprocessing parameters, task).
  nlohmann::json pipeline = nlohmann::json::object();

  Eigen::Index input_width() const noexcept { return static_cast<Eigen::Index>(mask.size()); }
  Labels predict(const Matrix& x) const;
  /// Per-class scores summing to 1; empty for SVM, which only reports labels.
  std::optional<Matrix> predict_scores(const Matrix& x) const;
  /// Masked and standardised view of `x`, as the classifier sees it.
  Matrix transform(const Matrix& x) const;
};

struct TrainOptions {
  std::vector<bool> mask;  // empty = keep every column
  int n_classes = 0;       // 0 = 1 + max label
  int threads = 1;
  std::string catalog_version;
};

/// Fits the standardiser on `x` and then the classifier for `params`.
TrainedModel train(const Hyperparams& params, const Matrix& x, const Labels& y, std::uint64_t seed,
                   const TrainOptions& options = {});

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Cross-validation and grid search
// ---------------------------------------------------------------------------

struct Fold {
  IndexList train;
  IndexList validation;
};

/// Stratified folds: each class is shuffled with `seed` and dealt round-robin.
std::vector<Fold> stratified_kfold(const Labels& y, int k, std::uint64_t seed);

struct CandidateResult {
  Hyperparams params;
  std::vector<double> fold_scores;
  double mean_score = 0.0;  // -inf when the candidate failed
  std::string error;
};

struct GridSearchResult {
  TrainedModel model;
  std::size_t best_index = 0;
  std::vector<CandidateResult> candidates;
};

/// Scores every grid candidate by mean macro-F1 over stratified folds, keeps
/// the first maximum in grid order and refits it on all of `x`.
GridSearchResult grid_search(const ModelSpec& spec, const Matrix& x, const Labels& y, int k = 5,
                             const TrainOptions& options = {});

}  // namespace batauth
