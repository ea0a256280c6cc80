#pragma once

#include <batauth/config.hpp>
#include <batauth/eval.hpp>
#include <batauth/features.hpp>
#include <batauth/models.hpp>
#include <batauth/pipeline.hpp>

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace batauth {

/// Exit codes of every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitValidation = 2;

/// Runs `body`, mapping BadConfig to 2 and any other failure to 1 with a
/// one-line message on `err`.
int guarded(std::ostream& err, const std::function<void()>& body);

std::string read_text(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_text(const std::filesystem::path& path, std::string_view text);

/// CSV file, or a directory whose *.csv files are read in name order.
DatasetCatalog load_catalog(PipelineKind kind, const std::filesystem::path& input, const SampleMeta& meta_defaults = {});
/// "frequency" in the header means an EIS sweep file, otherwise cycles.
PipelineKind sniff_pipeline_kind(std::string_view csv_text);

TrainedModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOptions {
  PipelineKind kind = PipelineKind::Dca;
  std::optional<std::filesystem::path> specs_path;  // empty = demo specs
  SynthConfig synth;
  std::filesystem::path out = "data.csv";
};

DatasetCatalog synthesize(PipelineKind kind, const SynthConfig& synth);
void cmd_synth(const SynthOptions& options, std::ostream& out);

// ---------------------------------------------------------------------------
// run / evaluate
// ---------------------------------------------------------------------------

struct RunOverrides {
  std::optional<int> threads;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::uint64_t> seed;
};

struct RunResult {
  EvalReport report;
  nlohmann::json report_json;
  std::string report_csv;
  std::filesystem::path output_dir;
  int threads = 1;
};

/// Thread count by precedence: flag, BATAUTH_THREADS, config.
int resolve_threads(const RunConfig& config, const std::optional<int>& flag);

/// Loads or synthesises the data, evaluates every configured task and writes
/// report.json, report.csv and models/ into the output directory.
RunResult execute_run(RunConfig config, const RunOverrides& overrides = {});
int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides, std::ostream& out,
            std::ostream& err);

// ---------------------------------------------------------------------------
// Stage commands
// ---------------------------------------------------------------------------

struct StageOptions {
  PipelineKind kind = PipelineKind::Dca;
  std::filesystem::path input;
  std::filesystem::path out;
  DcaConfig dca;
  EisConfig eis;
  int threads = 1;
};

/// Validates the records and writes the label catalog JSON.
void cmd_ingest(const StageOptions& options, std::ostream& out);
/// One processed series CSV per record, record_<i>.csv.
void cmd_process(const StageOptions& options, std::ostream& out);
/// Feature CSV; with `binary_out`, also the binary matrix and its JSON sidecar.
void cmd_extract(const StageOptions& options, const std::optional<std::filesystem::path>& binary_out,
                 std::ostream& out);

/// Feature CSV or binary (with a .json sidecar next to it).
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);

struct SelectOptions {
  std::filesystem::path features;
  Target target = Target::Architecture;
  double fdr = 0.05;
  std::filesystem::path out;
};

/// Writes {"fdr", "kept", "features": [{name, p_value, keep}]}.
void cmd_select(const SelectOptions& options, std::ostream& out);
std::vector<bool> load_mask(const std::filesystem::path& path, const std::vector<std::string>& feature_names);

struct TrainCommandOptions {
  std::filesystem::path features;
  Target target = Target::Architecture;
  ModelKind kind = ModelKind::RandomForest;
  std::optional<std::filesystem::path> mask;
  std::optional<std::string> legit;  // one-vs-rest authenticator for this label
  std::uint64_t seed = 0;
  int cv_folds = 5;
  int threads = 1;
  std::filesystem::path out;
};

/// Grid search over the default grid on the whole feature file.
void cmd_train(const TrainCommandOptions& options, std::ostream& out);

struct ExplainOptions {
  std::filesystem::path model;
  std::filesystem::path features;
  Target target = Target::Architecture;
  std::optional<std::string> legit;
  int repeats = 5;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

/// feature,mdi,permutation_mean,permutation_std; mdi is empty for non-tree models.
void cmd_explain(const ExplainOptions& options, std::ostream& out);

// ---------------------------------------------------------------------------
// authenticate / bench
// ---------------------------------------------------------------------------

struct Decision {
  std::string cell_id;
  std::optional<long> cycle_index;
  int class_index = 0;
  std::string label;
  std::optional<double> score;  // empty for SVM
};

/// Featurises every record of `sample_csv` (kind sniffed from the header)
/// with the model's preprocessing parameters and predicts.
std::vector<Decision> authenticate(const TrainedModel& model, std::string_view sample_csv);
void cmd_authenticate(const std::filesystem::path& model_path, const std::filesystem::path& sample_path, bool as_json,
                      std::ostream& out);

struct BenchRow {
  ModelKind kind = ModelKind::RandomForest;
  double time_ms = 0.0;  // median per-sample predict latency
  double size_kb = 0.0;  // serialised model size
  std::size_t samples = 0;
};

/// Times single-row predictions of every sample `repeats` times.
BenchRow bench_model(const TrainedModel& model, const Matrix& features, int repeats);
/// model,time_ms,size_kb
std::string bench_csv(const std::vector<BenchRow>& rows);
void cmd_bench(const std::vector<std::filesystem::path>& models, const std::filesystem::path& samples, int repeats,
               std::ostream& out);

/// Features of every record in a raw measurement CSV, with the preprocessing
/// parameters stored in the model (defaults when absent).
Matrix featurize_samples(const TrainedModel& model, std::string_view sample_csv, std::vector<SampleMeta>* meta = nullptr);

}  // namespace batauth
