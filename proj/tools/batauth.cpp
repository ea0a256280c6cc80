#include <batauth/commands.hpp>
#include <batauth/error.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace batauth;
namespace fs = std::filesystem;

const std::map<std::string, PipelineKind> kKinds{{"dca", PipelineKind::Dca}, {"eis", PipelineKind::Eis}};
const std::map<std::string, Target> kTargets{{"architecture", Target::Architecture}, {"model", Target::Model}};

template <typename E>
CLI::Option* add_enum(CLI::App* cmd, const std::string& name, E& var, const std::map<std::string, E>& choices,
                      const std::string& description) {
  std::vector<std::string> keys;
  for (const auto& [k, v] : choices) keys.push_back(k);
  return cmd->add_option_function<std::string>(name, [&var, &choices](const std::string& s) { var = choices.at(s); },
                                               description)
      ->check(CLI::IsMember(keys));
}

void add_stage_options(CLI::App* cmd, StageOptions& o) {
  add_enum(cmd, "--kind", o.kind, kKinds, "dca or eis (default dca)");
  cmd->add_option("--input", o.input, "measurement CSV or directory of CSVs")->required();
  cmd->add_option("--eps-volts", o.dca.eps_volts, "DCA clean threshold (V)");
  cmd->add_option("--savgol-window", o.dca.savgol_window, "Savitzky-Golay window (odd)");
  cmd->add_option("--savgol-polyorder", o.dca.savgol_polyorder, "Savitzky-Golay polynomial order");
  cmd->add_option("--resample-n", o.dca.resample_n, "DCA resample length");
  cmd->add_option("--eis-m", o.eis.m, "EIS log-frequency grid length");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Battery authentication pipeline: DCA and EIS features, classifiers, evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("batauth 1.0 (") + kCatalogVersion + ")");

  // synth
  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic measurement CSV");
  add_enum(synth_cmd, "--kind", synth.kind, kKinds, "dca or eis (default dca)");
  synth_cmd->add_option("--specs", synth.specs_path, "JSON cell spec file (default: demo specs)");
  synth_cmd->add_option("--noise", synth.synth.noise_std, "relative noise of the demo specs");
  synth_cmd->add_option("--cells", synth.synth.cells_per_spec, "cells per spec")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--cycles", synth.synth.cycles_per_cell, "cycles per cell")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--sweeps", synth.synth.sweeps_per_spec, "EIS sweeps per spec")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--n-points", synth.synth.n_points, "points per cycle");
  synth_cmd->add_option("--n-freq", synth.synth.n_freq, "frequencies per sweep");
  synth_cmd->add_option("--seed", synth.synth.seed, "generator seed");
  synth_cmd->add_option("--out", synth.out, "output CSV")->required();

  // stage commands
  StageOptions ingest, process, extract;
  auto* ingest_cmd = app.add_subcommand("ingest", "validate measurements and write the label catalog");
  add_stage_options(ingest_cmd, ingest);
  ingest_cmd->add_option("--out", ingest.out, "catalog JSON")->required();

  auto* process_cmd = app.add_subcommand("process", "write processed dQ/dV or Nyquist series per record");
  add_stage_options(process_cmd, process);
  process_cmd->add_option("--out", process.out, "output directory")->required();

  std::optional<fs::path> binary_out;
  auto* extract_cmd = app.add_subcommand("extract", "extract the feature matrix");
  add_stage_options(extract_cmd, extract);
  extract_cmd->add_option("--out", extract.out, "feature CSV")->required();
  extract_cmd->add_option("--binary", binary_out, "also write a binary matrix (plus .json sidecar)");

  SelectOptions select;
  auto* select_cmd = app.add_subcommand("select", "relevance-test features and write a mask");
  select_cmd->add_option("--features", select.features, "feature CSV or binary")->required();
  add_enum(select_cmd, "--target", select.target, kTargets, "architecture or model (default architecture)");
  select_cmd->add_option("--fdr", select.fdr, "false discovery rate")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  select_cmd->add_option("--out", select.out, "mask JSON")->required();

  TrainCommandOptions train;
  std::string train_kind = "RandomForest";
  auto* train_cmd = app.add_subcommand("train", "grid-search and fit one model on a feature file");
  train_cmd->add_option("--features", train.features, "feature CSV or binary")->required();
  add_enum(train_cmd, "--target", train.target, kTargets, "architecture or model (default architecture)");
  train_cmd->add_option("--model", train_kind, "AdaBoost, DecisionTree, GaussianNB, KNN, NeuralNet, QDA, RandomForest, SVM");
  train_cmd->add_option("--legit", train.legit, "train a one-vs-rest authenticator for this label");
  train_cmd->add_option("--mask", train.mask, "mask JSON from select");
  train_cmd->add_option("--seed", train.seed, "model seed");
  train_cmd->add_option("--folds", train.cv_folds, "cross-validation folds")->check(CLI::Range(2, 100));
  train_cmd->add_option("--threads", train.threads, "worker threads")->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", train.out, "model JSON")->required();

  // run / evaluate
  fs::path config_path;
  RunOverrides overrides;
  auto* run_cmd = app.add_subcommand("run", "run a full experiment from a config file");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "alias of run");
  for (auto* cmd : {run_cmd, evaluate_cmd}) {
    cmd->add_option("--config", config_path, "JSON run config")->required();
    cmd->add_option("--threads", overrides.threads, "worker threads (overrides BATAUTH_THREADS and config)");
    cmd->add_option("--output", overrides.output_dir, "output directory (overrides config)");
    cmd->add_option("--seed", overrides.seed, "evaluation seed (overrides config)");
  }

  ExplainOptions explain;
  auto* explain_cmd = app.add_subcommand("explain", "MDI and permutation importances of a model");
  explain_cmd->add_option("--model", explain.model, "model JSON")->required();
  explain_cmd->add_option("--features", explain.features, "feature CSV or binary")->required();
  add_enum(explain_cmd, "--target", explain.target, kTargets, "architecture or model (default architecture)");
  explain_cmd->add_option("--legit", explain.legit, "legitimate label of an authenticator");
  explain_cmd->add_option("--repeats", explain.repeats, "shuffles per feature");
  explain_cmd->add_option("--seed", explain.seed, "shuffle seed");
  explain_cmd->add_option("--out", explain.out, "importance CSV")->required();

  std::vector<fs::path> bench_models;
  fs::path bench_samples;
  int bench_repeats = 10;
  auto* bench_cmd = app.add_subcommand("bench", "median per-sample latency and size of models");
  bench_cmd->add_option("--model", bench_models, "model JSON (repeatable)")->required();
  bench_cmd->add_option("--samples", bench_samples, "measurement CSV")->required();
  bench_cmd->add_option("--repeats", bench_repeats, "timing repeats");

  fs::path auth_model, auth_sample;
  bool auth_json = false;
  auto* auth_cmd = app.add_subcommand("authenticate", "classify measurement records with a model");
  auth_cmd->add_option("--model", auth_model, "model JSON")->required();
  auth_cmd->add_option("--sample", auth_sample, "measurement CSV")->required();
  auth_cmd->add_flag("--json", auth_json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  auto& out = std::cout;
  auto& err = std::cerr;
  if (*run_cmd || *evaluate_cmd) return cmd_run(config_path, overrides, out, err);
  return guarded(err, [&] {
    if (*synth_cmd) cmd_synth(synth, out);
    else if (*ingest_cmd) cmd_ingest(ingest, out);
    else if (*process_cmd) cmd_process(process, out);
    else if (*extract_cmd) cmd_extract(extract, binary_out, out);
    else if (*select_cmd) cmd_select(select, out);
    else if (*train_cmd) {
      train.kind = parse_model_kind(train_kind);
      cmd_train(train, out);
    } else if (*explain_cmd) cmd_explain(explain, out);
    else if (*bench_cmd) cmd_bench(bench_models, bench_samples, bench_repeats, out);
    else if (*auth_cmd) cmd_authenticate(auth_model, auth_sample, auth_json, out);
  });
}
