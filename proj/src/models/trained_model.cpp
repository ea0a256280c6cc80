#include <batauth/error.hpp>
#include <batauth/models.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace batauth {

namespace {

constexpr std::string_view kModule = "ml-models";

using json = nlohmann::json;

// JSON has no infinities; -inf log priors are stored as null.
json number_to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from_json(const json& v) {
  return v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>();
}

template <typename Derived>
json dense_to_json(const Eigen::MatrixBase<Derived>& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(number_to_json(m(r, c)));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

template <typename MatrixType>
MatrixType dense_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error(ErrorCode::FormatVersionMismatch, kModule, "matrix payload has the wrong size");
  }
  MatrixType m(rows, cols);
  std::size_t at = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number_from_json(data[at++]);
  return m;
}

Vector vector_from_json(const json& j) { return dense_from_json<Eigen::MatrixXd>(j).col(0); }

json tree_to_json(const DecisionTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.impurity, n.weight, n.value});
  }
  return {{"n_classes", tree.n_classes}, {"n_features", tree.n_features}, {"nodes", std::move(nodes)}};
}

DecisionTree tree_from_json(const json& j) {
  DecisionTree tree;
  tree.n_classes = j.at("n_classes").get<int>();
  tree.n_features = j.at("n_features").get<int>();
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.feature = n.at(0).get<int>();
    node.threshold = n.at(1).get<double>();
    node.left = n.at(2).get<int>();
    node.right = n.at(3).get<int>();
    node.impurity = n.at(4).get<double>();
    node.weight = n.at(5).get<double>();
    node.value = n.at(6).get<std::vector<double>>();
    tree.nodes.push_back(std::move(node));
  }
  const auto count = static_cast<int>(tree.nodes.size());
  for (const auto& node : tree.nodes) {
    if (node.feature >= 0 && (node.left <= 0 || node.left >= count || node.right <= 0 || node.right >= count)) {
      throw Error(ErrorCode::FormatVersionMismatch, kModule, "tree node points outside the tree");
    }
  }
  if (tree.nodes.empty()) throw Error(ErrorCode::FormatVersionMismatch, kModule, "tree has no nodes");
  return tree;
}

json classifier_to_json(const Classifier& classifier) {
  struct Visitor {
    json operator()(const AdaBoost& m) const {
      json stumps = json::array();
      for (const auto& s : m.stumps) stumps.push_back(tree_to_json(s));
      return {{"n_classes", m.n_classes}, {"stumps", std::move(stumps)}, {"weights", m.weights}};
    }
    json operator()(const DecisionTree& m) const { return tree_to_json(m); }
    json operator()(const GaussianNb& m) const {
      return {{"means", dense_to_json(m.means)},
              {"variances", dense_to_json(m.variances)},
              {"log_priors", dense_to_json(m.log_priors)},
              {"epsilon", m.epsilon}};
    }
    json operator()(const Knn& m) const {
      return {{"n_classes", m.n_classes}, {"train_x", dense_to_json(m.train_x)}, {"train_y", m.train_y}};
    }
    json operator()(const NeuralNet& m) const {
      return {{"w1", dense_to_json(m.w1)}, {"b1", dense_to_json(m.b1)}, {"w2", dense_to_json(m.w2)},
              {"b2", dense_to_json(m.b2)}, {"converged", m.converged}, {"loss_curve", m.loss_curve}};
    }
    json operator()(const Qda& m) const {
      json factors = json::array();
      for (const auto& l : m.cholesky) factors.push_back(dense_to_json(l));
      return {{"means", dense_to_json(m.means)},
              {"cholesky", std::move(factors)},
              {"log_dets", dense_to_json(m.log_dets)},
              {"log_priors", dense_to_json(m.log_priors)}};
    }
    json operator()(const RandomForest& m) const {
      json trees = json::array();
      for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
      return {{"n_classes", m.n_classes}, {"trees", std::move(trees)}};
    }
    json operator()(const Svm& m) const {
      json machines = json::array();
      for (const auto& s : m.machines) {
        machines.push_back({{"support", dense_to_json(s.support)},
                            {"coefficients", dense_to_json(s.coefficients)},
                            {"rho", s.rho},
                            {"converged", s.converged},
                            {"iterations", s.iterations}});
      }
      return {{"n_classes", m.n_classes}, {"gamma", m.gamma}, {"machines", std::move(machines)}};
    }
  };
  return std::visit(Visitor{}, classifier);
}

Classifier classifier_from_json(const Hyperparams& params, const json& j) {
  switch (kind_of(params)) {
    case ModelKind::AdaBoost: {
      AdaBoost m;
      m.n_classes = j.at("n_classes").get<int>();
      for (const auto& s : j.at("stumps")) m.stumps.push_back(tree_from_json(s));
      m.weights = j.at("weights").get<std::vector<double>>();
      return m;
    }
    case ModelKind::DecisionTree: return tree_from_json(j);
    case ModelKind::GaussianNB: {
      GaussianNb m;
      m.means = dense_from_json<Matrix>(j.at("means"));
      m.variances = dense_from_json<Matrix>(j.at("variances"));
      m.log_priors = vector_from_json(j.at("log_priors"));
      m.epsilon = j.at("epsilon").get<double>();
      return m;
    }
    case ModelKind::KNN: {
      Knn m;
      m.n_classes = j.at("n_classes").get<int>();
      m.train_x = dense_from_json<Matrix>(j.at("train_x"));
      m.train_y = j.at("train_y").get<Labels>();
      m.params = std::get<KnnParams>(params);
      return m;
    }
    case ModelKind::NeuralNet: {
      NeuralNet m;
      m.w1 = dense_from_json<Eigen::MatrixXd>(j.at("w1"));
      m.b1 = vector_from_json(j.at("b1"));
      m.w2 = dense_from_json<Eigen::MatrixXd>(j.at("w2"));
      m.b2 = vector_from_json(j.at("b2"));
      m.activation = std::get<NeuralNetParams>(params).activation;
      m.converged = j.at("converged").get<bool>();
      m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
      return m;
    }
    case ModelKind::QDA: {
      Qda m;
      m.means = dense_from_json<Matrix>(j.at("means"));
      for (const auto& l : j.at("cholesky")) m.cholesky.push_back(dense_from_json<Eigen::MatrixXd>(l));
      m.log_dets = vector_from_json(j.at("log_dets"));
      m.log_priors = vector_from_json(j.at("log_priors"));
      return m;
    }
    case ModelKind::RandomForest: {
      RandomForest m;
      m.n_classes = j.at("n_classes").get<int>();
      for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
      return m;
    }
    case ModelKind::SVM: {
      Svm m;
      m.kernel = std::get<SvmParams>(params).kernel;
      m.n_classes = j.at("n_classes").get<int>();
      m.gamma = j.at("gamma").get<double>();
      for (const auto& s : j.at("machines")) {
        Svm::Machine machine;
        machine.support = dense_from_json<Matrix>(s.at("support"));
        machine.coefficients = vector_from_json(s.at("coefficients"));
        machine.rho = s.at("rho").get<double>();
        machine.converged = s.at("converged").get<bool>();
        machine.iterations = s.at("iterations").get<std::size_t>();
        m.machines.push_back(std::move(machine));
      }
      return m;
    }
  }
  throw Error(ErrorCode::FormatVersionMismatch, kModule, "unknown model kind");
}

Matrix tree_scores(const DecisionTree& tree, const Matrix& x) {
  Matrix out(x.rows(), tree.n_classes);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const auto& dist = tree.leaf_distribution(x.row(r));
    for (int k = 0; k < tree.n_classes; ++k) out(r, k) = dist[static_cast<std::size_t>(k)];
  }
  return out;
}

Labels argmax_rows(const Matrix& scores) {
  Labels out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    scores.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

struct ScoreVisitor {
  Matrix z;
  std::optional<Matrix> operator()(const DecisionTree& m) const { return tree_scores(m, z); }
  std::optional<Matrix> operator()(const Svm&) const { return std::nullopt; }
  template <typename Model>
  std::optional<Matrix> operator()(const Model& m) const {
    return m.predict_scores(z);
  }
};

}  // namespace

Standardizer Standardizer::fit(const Matrix& x) {
  Standardizer s;
  const auto n = static_cast<double>(x.rows());
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double var = (x.col(c).array() - s.mean[c]).square().sum() / n;
    s.scale[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, kModule,
                "standardizer expects " + std::to_string(mean.size()) + " columns, got " + std::to_string(x.cols()));
  }
  return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

Matrix TrainedModel::transform(const Matrix& x) const {
  if (x.cols() != input_width()) {
    throw Error(ErrorCode::DimensionMismatch, kModule,
                "model expects " + std::to_string(input_width()) + " features, got " + std::to_string(x.cols()));
  }
  std::vector<Eigen::Index> keep;
  for (std::size_t c = 0; c < mask.size(); ++c) {
    if (mask[c]) keep.push_back(static_cast<Eigen::Index>(c));
  }
  return standardizer.apply(x(Eigen::all, keep));
}

std::optional<Matrix> TrainedModel::predict_scores(const Matrix& x) const {
  return std::visit(ScoreVisitor{transform(x)}, classifier);
}

Labels TrainedModel::predict(const Matrix& x) const {
  if (const auto* svm = std::get_if<Svm>(&classifier)) return svm->predict(transform(x));
  if (const auto* tree = std::get_if<DecisionTree>(&classifier)) {
    const Matrix z = transform(x);
    Labels out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index r = 0; r < z.rows(); ++r) out[static_cast<std::size_t>(r)] = tree->predict_one(z.row(r));
    return out;
  }
  return argmax_rows(*predict_scores(x));
}

TrainedModel train(const Hyperparams& params, const Matrix& x, const Labels& y, std::uint64_t seed,
                   const TrainOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, kModule,
                std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) + " labels");
  }
  if (!options.mask.empty() && options.mask.size() != static_cast<std::size_t>(x.cols())) {
    throw Error(ErrorCode::DimensionMismatch, kModule, "mask width does not match the feature count");
  }
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteValue, kModule, "training features must be finite");
  if (y.empty()) throw Error(ErrorCode::TooFewSamples, kModule, "no training rows");
  const int max_label = *std::max_element(y.begin(), y.end());
  if (*std::min_element(y.begin(), y.end()) < 0) throw Error(ErrorCode::BadArgument, kModule, "labels must be >= 0");
  const int n_classes = options.n_classes > 0 ? options.n_classes : max_label + 1;
  if (max_label >= n_classes) throw Error(ErrorCode::BadArgument, kModule, "label exceeds the class count");
  const std::set<int> present(y.begin(), y.end());
  if (present.size() < 2) throw Error(ErrorCode::SingleClass, kModule, "training data has a single class");
  if (y.size() < present.size()) throw Error(ErrorCode::TooFewSamples, kModule, "fewer rows than classes");

  TrainedModel model;
  model.kind = kind_of(params);
  model.hyperparams = params;
  model.mask = options.mask.empty() ? std::vector<bool>(static_cast<std::size_t>(x.cols()), true) : options.mask;
  if (std::none_of(model.mask.begin(), model.mask.end(), [](bool b) { return b; })) {
    throw Error(ErrorCode::BadArgument, kModule, "mask keeps no features");
  }
  model.n_classes = n_classes;
  model.catalog_version = options.catalog_version;
  model.seed = seed;

  std::vector<Eigen::Index> keep;
  for (std::size_t c = 0; c < model.mask.size(); ++c) {
    if (model.mask[c]) keep.push_back(static_cast<Eigen::Index>(c));
  }
  const Matrix masked = x(Eigen::all, keep);
  model.standardizer = Standardizer::fit(masked);
  const Matrix z = model.standardizer.apply(masked);

  struct Visitor {
    const Matrix& z;
    const Labels& y;
    int k;
    std::uint64_t seed;
    int threads;
    Classifier operator()(const AdaBoostParams& p) const { return AdaBoost::fit(z, y, k, p, seed); }
    Classifier operator()(const DecisionTreeParams& p) const {
      std::mt19937_64 rng(derive_seed(seed, 0));
      return DecisionTree::fit(z, y, k, Vector::Ones(z.rows()), p.criterion, p.max_depth, p.max_features, rng);
    }
    Classifier operator()(const GaussianNbParams& p) const { return GaussianNb::fit(z, y, k, p); }
    Classifier operator()(const KnnParams& p) const { return Knn::fit(z, y, k, p); }
    Classifier operator()(const NeuralNetParams& p) const { return NeuralNet::fit(z, y, k, p, seed); }
    Classifier operator()(const QdaParams& p) const { return Qda::fit(z, y, k, p); }
    Classifier operator()(const RandomForestParams& p) const { return RandomForest::fit(z, y, k, p, seed, threads); }
    Classifier operator()(const SvmParams& p) const { return Svm::fit(z, y, k, p); }
  };
  model.classifier = std::visit(Visitor{z, y, n_classes, seed, options.threads}, params);
  if (const auto* net = std::get_if<NeuralNet>(&model.classifier)) model.converged = net->converged;
  if (const auto* svm = std::get_if<Svm>(&model.classifier)) model.converged = svm->converged();
  return model;
}

json model_to_json(const TrainedModel& model) {
  json mask = json::array();
  for (bool b : model.mask) mask.push_back(b);
  return {{"format_version", kModelFormatVersion},
          {"kind", to_string(model.kind)},
          {"hyperparams", hyperparams_to_json(model.hyperparams)},
          {"standardizer", {{"mean", dense_to_json(model.standardizer.mean)},
                            {"scale", dense_to_json(model.standardizer.scale)}}},
          {"mask", std::move(mask)},
          {"n_classes", model.n_classes},
          {"class_names", model.class_names},
          {"parameters", classifier_to_json(model.classifier)},
          {"seed", model.seed},
          {"catalog_version", model.catalog_version},
          {"converged", model.converged},
          {"pipeline", model.pipeline}};
}

TrainedModel model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("format_version") || j["format_version"] != kModelFormatVersion) {
    throw Error(ErrorCode::FormatVersionMismatch, kModule,
                "expected model format_version " + std::to_string(kModelFormatVersion));
  }
  try {
    TrainedModel model;
    model.kind = parse_model_kind(j.at("kind").get<std::string>());
    model.hyperparams = hyperparams_from_json(model.kind, j.at("hyperparams"));
    model.standardizer.mean = vector_from_json(j.at("standardizer").at("mean"));
    model.standardizer.scale = vector_from_json(j.at("standardizer").at("scale"));
    model.mask = j.at("mask").get<std::vector<bool>>();
    model.n_classes = j.at("n_classes").get<int>();
    model.class_names = j.at("class_names").get<std::vector<std::string>>();
    model.classifier = classifier_from_json(model.hyperparams, j.at("parameters"));
    model.seed = j.at("seed").get<std::uint64_t>();
    model.catalog_version = j.at("catalog_version").get<std::string>();
    model.converged = j.at("converged").get<bool>();
    model.pipeline = j.value("pipeline", json::object());
    const auto kept = std::count(model.mask.begin(), model.mask.end(), true);
    if (kept != model.standardizer.mean.size() || kept != model.standardizer.scale.size()) {
      throw Error(ErrorCode::FormatVersionMismatch, kModule, "standardizer width does not match the mask");
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatVersionMismatch, kModule, std::string("malformed model file: ") + e.what());
  }
}

}  // namespace batauth
