#pragma once

#include <batauth/features.hpp>
#include <batauth/metrics.hpp>
#include <batauth/models.hpp>
#include <batauth/types.hpp>

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace batauth {

enum class Task { ArchIdentification, ModelIdentification, ArchAuthentication, ModelAuthentication };
enum class Target { Architecture, Model };

std::string_view to_string(Task task) noexcept;
std::string_view to_string(Target target) noexcept;
Target parse_target(std::string_view text);

/// Legitimate share of an authentication scenario, in percent.
inline constexpr int kBalanceLevels[] = {50, 40, 30, 20};
void validate_balance(int legit_percent);
/// "50/50", "40/60", ...
std::string balance_label(int legit_percent);

struct TrainTestSplit {
  IndexList train;
  IndexList test;
};

/// Per-class test share round((1 - ratio) * n_c), kept within [1, n_c - 1]
/// when stratified. Index lists are ascending.
TrainTestSplit split_train_test(const Labels& y, double ratio, std::uint64_t seed, bool stratified = true);

/// Rows that keep every class at the minority-class count, shuffled by seed.
IndexList undersample(const Labels& y, std::uint64_t seed);

struct AuthScenario {
  IndexList rows;  // ascending
  Labels y;        // 1 = legitimate, 0 = counterfeit
  std::size_t n_legit = 0;
  std::size_t n_counterfeit = 0;
};

/// Largest legit/counterfeit draw with the requested legitimate share; the
/// counterfeit draw is spread as evenly as possible over the other classes.
AuthScenario make_auth_scenario(const Labels& y, int legit_label, int legit_percent, std::uint64_t seed);

struct EvalConfig {
  double train_ratio = 0.8;
  bool stratified = true;
  bool undersample_before_split = true;
  bool select_features = false;
  double fdr = 0.05;
  int cv_folds = 5;
  std::vector<Target> targets = {Target::Architecture, Target::Model};
  std::vector<int> balances = {50, 40, 30, 20};
  std::uint64_t seed = 0;
  int threads = 1;
};

nlohmann::json eval_config_to_json(const EvalConfig& config);

struct ModelResult {
  ModelKind kind = ModelKind::RandomForest;
  nlohmann::json hyperparams;
  double cv_macro_f1 = 0.0;
  MetricSet metrics;
  ConfusionMatrix confusion;
  bool converged = true;
  /// The refit winner; not serialised with the report.
  std::shared_ptr<const TrainedModel> model;
};

struct IdentificationResult {
  Task task = Task::ArchIdentification;
  std::vector<std::string> class_names;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t features_kept = 0;
  std::vector<ModelResult> models;
};

struct AuthenticationCell {
  std::string legit_label;
  int legit_percent = 50;
  std::size_t n_legit = 0;
  std::size_t n_counterfeit = 0;
  std::size_t n_test = 0;
  std::size_t features_kept = 0;
  std::vector<ModelResult> models;  // binary confusion, class 1 = legitimate
};

struct AuthenticationResult {
  Task task = Task::ArchAuthentication;
  std::vector<AuthenticationCell> cells;  // label-major, balances in configured order
};

inline constexpr int kReportSchemaVersion = 1;

struct EvalReport {
  std::vector<IdentificationResult> identification;
  std::vector<AuthenticationResult> authentication;
  EvalConfig config;
};

/// Binary counts of one authentication result.
ConfusionCounts binary_counts(const ModelResult& result);

/// Arithmetic means over legitimate labels of the per-cell metrics for one
/// model kind at one balance level (0 = all balances).
MetricSet average_metrics(const AuthenticationResult& result, ModelKind kind, int legit_percent = 0);

/// Per target: undersample, split, optional selection on the training part,
/// grid search per spec, test metrics.
EvalReport run_identification(const FeatureMatrix& matrix, const std::vector<ModelSpec>& specs,
                              const EvalConfig& config);

/// Per target, legitimate label and balance level: scenario, split, optional
/// selection, grid search per spec, binary test metrics with FAR/FRR.
EvalReport run_authentication(const FeatureMatrix& matrix, const std::vector<ModelSpec>& specs,
                              const EvalConfig& config);

nlohmann::json report_to_json(const EvalReport& report);
/// Flat table: task, model, balance, accuracy, precision, recall, f1, far, frr.
/// Authentication rows hold averages over legitimate labels.
std::string report_to_csv(const EvalReport& report);

/// Mean impurity decrease per input column, averaged over trees and
/// normalised to sum 1. Masked-out columns get 0.
Vector mdi_importance(const TrainedModel& model);

struct PermutationImportance {
  double baseline = 0.0;  // macro-F1 on the unpermuted data
  Vector mean_drop;
  Vector std_drop;
};

/// Model-agnostic substitute for SHAP: mean and population std of the
/// macro-F1 drop when one column is shuffled, over `repeats` shuffles.
PermutationImportance permutation_importance(const TrainedModel& model, const Matrix& x, const Labels& y,
                                             int repeats, std::uint64_t seed);

}  // namespace batauth
