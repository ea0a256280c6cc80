#include <batauth/error.hpp>
#include <batauth/models.hpp>

#include <cmath>

namespace batauth {

namespace {

constexpr std::string_view kModule = "ml-models";

using json = nlohmann::json;

[[noreturn]] void bad(const std::string& message) { throw Error(ErrorCode::BadHyperparams, kModule, message); }

std::string criterion_name(Criterion c) { return c == Criterion::Gini ? "gini" : "entropy"; }

Criterion criterion_from(const json& v) {
  if (v == "gini") return Criterion::Gini;
  if (v == "entropy") return Criterion::Entropy;
  bad("criterion must be 'gini' or 'entropy'");
}

int positive_int(const json& v, std::string_view key) {
  if (!v.is_number_integer() || v.get<long>() <= 0) bad(std::string(key) + " must be a positive integer");
  return v.get<int>();
}

int non_negative_int(const json& v, std::string_view key) {
  if (!v.is_number_integer() || v.get<long>() < 0) bad(std::string(key) + " must be a non-negative integer");
  return v.get<int>();
}

double positive_number(const json& v, std::string_view key) {
  if (!v.is_number() || !(v.get<double>() > 0.0)) bad(std::string(key) + " must be a positive number");
  return v.get<double>();
}

double non_negative_number(const json& v, std::string_view key) {
  if (!v.is_number() || !(v.get<double>() >= 0.0)) bad(std::string(key) + " must be a non-negative number");
  return v.get<double>();
}

/// null or 0 means unlimited.
int depth_from(const json& v) { return v.is_null() ? 0 : non_negative_int(v, "max_depth"); }

json depth_to(int depth) { return depth == 0 ? json(nullptr) : json(depth); }

template <typename Fn>
void for_each_key(const json& j, Fn&& apply) {
  if (!j.is_object()) bad("hyperparameters must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!apply(it.key(), it.value())) bad("unknown hyperparameter '" + it.key() + "'");
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::AdaBoost: return "AdaBoost";
    case ModelKind::DecisionTree: return "DecisionTree";
    case ModelKind::GaussianNB: return "GaussianNB";
    case ModelKind::KNN: return "KNN";
    case ModelKind::NeuralNet: return "NeuralNet";
    case ModelKind::QDA: return "QDA";
    case ModelKind::RandomForest: return "RandomForest";
    case ModelKind::SVM: return "SVM";
  }
  return "RandomForest";
}

std::string_view short_name(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::AdaBoost: return "AB";
    case ModelKind::DecisionTree: return "DT";
    case ModelKind::GaussianNB: return "GNB";
    case ModelKind::KNN: return "KNN";
    case ModelKind::NeuralNet: return "NN";
    case ModelKind::QDA: return "QDA";
    case ModelKind::RandomForest: return "RF";
    case ModelKind::SVM: return "SVM";
  }
  return "RF";
}

ModelKind parse_model_kind(std::string_view text) {
  for (ModelKind kind : kAllModelKinds) {
    if (text == to_string(kind) || text == short_name(kind)) return kind;
  }
  throw Error(ErrorCode::BadHyperparams, kModule, "unknown model kind '" + std::string(text) + "'");
}

ModelKind kind_of(const Hyperparams& params) noexcept { return static_cast<ModelKind>(params.index()); }

Hyperparams default_hyperparams(ModelKind kind) {
  switch (kind) {
    case ModelKind::AdaBoost: return AdaBoostParams{};
    case ModelKind::DecisionTree: return DecisionTreeParams{};
    case ModelKind::GaussianNB: return GaussianNbParams{};
    case ModelKind::KNN: return KnnParams{};
    case ModelKind::NeuralNet: return NeuralNetParams{};
    case ModelKind::QDA: return QdaParams{};
    case ModelKind::RandomForest: return RandomForestParams{};
    case ModelKind::SVM: return SvmParams{};
  }
  return RandomForestParams{};
}

json hyperparams_to_json(const Hyperparams& params) {
  struct Visitor {
    json operator()(const AdaBoostParams& p) const { return {{"n_estimators", p.n_estimators}}; }
    json operator()(const DecisionTreeParams& p) const {
      return {{"criterion", criterion_name(p.criterion)}, {"max_depth", depth_to(p.max_depth)},
              {"max_features", p.max_features}};
    }
    json operator()(const GaussianNbParams& p) const { return {{"var_smoothing", p.var_smoothing}}; }
    json operator()(const KnnParams& p) const {
      return {{"k", p.k}, {"weights", p.weights == KnnWeights::Uniform ? "uniform" : "distance"}};
    }
    json operator()(const NeuralNetParams& p) const {
      return {{"hidden", p.hidden},
              {"activation", p.activation == Activation::Relu ? "relu" : "tanh"},
              {"solver", p.solver == Solver::Adam ? "adam" : "sgd"},
              {"max_epochs", p.max_epochs},
              {"batch_size", p.batch_size},
              {"learning_rate", p.learning_rate},
              {"l2", p.l2},
              {"tol", p.tol},
              {"patience", p.patience}};
    }
    json operator()(const QdaParams& p) const { return {{"reg", p.reg}}; }
    json operator()(const RandomForestParams& p) const {
      return {{"criterion", criterion_name(p.criterion)}, {"n_estimators", p.n_estimators},
              {"bootstrap", p.bootstrap}, {"max_features", p.max_features},
              {"max_depth", depth_to(p.max_depth)}};
    }
    json operator()(const SvmParams& p) const {
      return {{"kernel", p.kernel == SvmKernel::Rbf ? "rbf" : "linear"},
              {"C", p.c},
              {"gamma", p.gamma ? json(*p.gamma) : json("scale")},
              {"tol", p.tol}};
    }
  };
  return std::visit(Visitor{}, params);
}

Hyperparams hyperparams_from_json(ModelKind kind, const json& j) {
  switch (kind) {
    case ModelKind::AdaBoost: {
      AdaBoostParams p;
      for_each_key(j, [&](const std::string& k, const json& v) {
        if (k != "n_estimators") return false;
        p.n_estimators = positive_int(v, k);
        return true;
      });
      return p;
    }
    case ModelKind::DecisionTree: {
      DecisionTreeParams p;
      for_each_key(j, [&](const std::string& k, const json& v) {
        if (k == "criterion") p.criterion = criterion_from(v);
        else if (k == "max_depth") p.max_depth = depth_from(v);
        else if (k == "max_features") p.max_features = non_negative_int(v, k);
        else return false;
        return true;
      });
      return p;
    }
    case ModelKind::GaussianNB: {
      GaussianNbParams p;
      for_each_key(j, [&](const std::string& k, const json& v) {
        if (k != "var_smoothing") return false;
        p.var_smoothing = positive_number(v, k);
        return true;
      });
      return p;
    }
    case ModelKind::KNN: {
      KnnParams p;
      for_each_key(j, [&](const std::string& k, const json& v) {
        if (k == "k") {
          p.k = positive_int(v, k);
        } else if (k == "weights") {
          if (v == "uniform") p.weights = KnnWeights::Uniform;
          else if (v == "distance") p.weights = KnnWeights::Distance;
          else bad("weights must be 'uniform' or 'distance'");
        } else {
          return false;
        }
        return true;
      });
      return p;
    }
    case ModelKind::NeuralNet: {
      NeuralNetParams p;
      for_each_key(j, [&](const std::string& k, const json& v) {
        if (k == "hidden") {
          p.hidden = positive_int(v, k);
        } else if (k == "activation") {
          if (v == "relu") p.activation = Activation::Relu;
          else if (v == "tanh") p.activation = Activation::Tanh;
          else bad("activation must be 'relu' or 'tanh'");
        } else if (k == "solver") {
          if (v == "adam") p.solver = Solver::Adam;
          else if (v == "sgd") p.solver = Solver::Sgd;
          else bad("solver must be 'sgd' or 'adam'");
        } else if (k == "max_epochs") {
          p.max_epochs = positive_int(v, k);
        } else if (k == "batch_size") {
          p.batch_size = positive_int(v, k);
        } else if (k == "learning_rate") {
          p.learning_rate = positive_number(v, k);
        } else if (k == "l2") {
          p.l2 = non_negative_number(v, k);
        } else if (k == "tol") {
          p.tol = non_negative_number(v, k);
        } else if (k == "patience") {
          p.patience = positive_int(v, k);
        } else {
          return false;
        }
        return true;
      });
      return p;
    }
    case ModelKind::QDA: {
      QdaParams p;
      for_each_key(j, [&](const std::string& k, const json& v) {
        if (k != "reg") return false;
        p.reg = non_negative_number(v, k);
        if (p.reg > 1.0) bad("reg must lie in [0, 1]");
        return true;
      });
      return p;
    }
    case ModelKind::RandomForest: {
      RandomForestParams p;
      for_each_key(j, [&](const std::string& k, const json& v) {
        if (k == "criterion") {
          p.criterion = criterion_from(v);
        } else if (k == "n_estimators") {
          p.n_estimators = positive_int(v, k);
        } else if (k == "bootstrap") {
          if (!v.is_boolean()) bad("bootstrap must be a boolean");
          p.bootstrap = v.get<bool>();
        } else if (k == "max_features") {
          p.max_features = non_negative_int(v, k);
        } else if (k == "max_depth") {
          p.max_depth = depth_from(v);
        } else {
          return false;
        }
        return true;
      });
      return p;
    }
    case ModelKind::SVM: {
      SvmParams p;
      for_each_key(j, [&](const std::string& k, const json& v) {
        if (k == "kernel") {
          if (v == "rbf") p.kernel = SvmKernel::Rbf;
          else if (v == "linear") p.kernel = SvmKernel::Linear;
          else bad("kernel must be 'linear' or 'rbf'");
        } else if (k == "C") {
          p.c = positive_number(v, k);
        } else if (k == "gamma") {
          if (v == "scale") p.gamma.reset();
          else p.gamma = positive_number(v, k);
        } else if (k == "tol") {
          p.tol = positive_number(v, k);
        } else {
          return false;
        }
        return true;
      });
      return p;
    }
  }
  bad("unknown model kind");
}

ParamGrid default_grid(ModelKind kind) {
  switch (kind) {
    case ModelKind::AdaBoost: return {{"n_estimators", {50, 100, 200}}};
    case ModelKind::DecisionTree:
      return {{"criterion", {"gini", "entropy"}}, {"max_depth", {4, 8, 16, nullptr}}};
    case ModelKind::GaussianNB: return {{"var_smoothing", {1e-9, 1e-7, 1e-5}}};
    case ModelKind::KNN: return {{"k", {1, 3, 5, 9}}, {"weights", {"uniform", "distance"}}};
    case ModelKind::NeuralNet:
      return {{"hidden", {50, 100, 200}}, {"activation", {"relu", "tanh"}}, {"solver", {"sgd", "adam"}}};
    case ModelKind::QDA: return {{"reg", {0.0, 0.1, 0.5}}};
    case ModelKind::RandomForest: return {{"criterion", {"gini", "entropy"}}, {"n_estimators", {100, 200}}};
    case ModelKind::SVM:
      return {{"kernel", {"linear", "rbf"}}, {"C", {0.1, 1.0, 10.0}}, {"gamma", {"scale", 0.01, 0.1}}};
  }
  return {};
}

std::vector<Hyperparams> expand_grid(ModelKind kind, const ParamGrid& grid) {
  for (const auto& dim : grid) {
    if (dim.values.empty()) bad("grid dimension '" + dim.name + "' has no values");
  }
  std::vector<Hyperparams> out;
  std::vector<std::size_t> cursor(grid.size(), 0);
  while (true) {
    json assignment = json::object();
    for (std::size_t d = 0; d < grid.size(); ++d) assignment[grid[d].name] = grid[d].values[cursor[d]];
    out.push_back(hyperparams_from_json(kind, assignment));
    // Odometer increment with the last dimension fastest.
    std::size_t d = grid.size();
    while (d > 0) {
      --d;
      if (++cursor[d] < grid[d].values.size()) break;
      cursor[d] = 0;
      if (d == 0) return out;
    }
    if (grid.empty()) return out;
  }
}

ModelSpec default_spec(ModelKind kind, std::uint64_t seed) { return ModelSpec{kind, default_grid(kind), seed}; }

}  // namespace batauth
