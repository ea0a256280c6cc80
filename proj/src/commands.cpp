#include <batauth/commands.hpp>
#include <batauth/error.hpp>
#include <batauth/parallel.hpp>
#include <batauth/synth.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace batauth {

namespace {

constexpr std::string_view kModule = "cli";

using json = nlohmann::json;
namespace fs = std::filesystem;

json dca_json(const DcaConfig& c) {
  return {{"eps_volts", c.eps_volts},
          {"savgol_window", c.savgol_window},
          {"savgol_polyorder", c.savgol_polyorder},
          {"resample_n", c.resample_n}};
}

DcaConfig dca_from_json(const json& j) {
  DcaConfig c;
  c.eps_volts = j.value("eps_volts", c.eps_volts);
  c.savgol_window = j.value("savgol_window", c.savgol_window);
  c.savgol_polyorder = j.value("savgol_polyorder", c.savgol_polyorder);
  c.resample_n = j.value("resample_n", c.resample_n);
  return c;
}

json pipeline_json(PipelineKind kind, const DcaConfig& dca, const EisConfig& eis) {
  json j = {{"kind", to_string(kind)}};
  if (kind == PipelineKind::Dca) j["dca"] = dca_json(dca);
  else j["eis"] = {{"m", eis.m}};
  return j;
}

PipelineKind kind_from_width(Eigen::Index width) {
  return width == static_cast<Eigen::Index>(kFeaturesPerChannel) ? PipelineKind::Dca : PipelineKind::Eis;
}

/// File-name friendly form of a label.
std::string slug(std::string_view text) {
  std::string out;
  for (char ch : text) {
    const bool plain = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-';
    out += plain ? ch : '_';
  }
  return out;
}

std::string fixed(double value, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

const Labels& labels_for(const FeatureMatrix& m, Target target) {
  return target == Target::Architecture ? m.arch_labels : m.model_labels;
}

const std::vector<std::string>& names_for(const FeatureMatrix& m, Target target) {
  return target == Target::Architecture ? m.arch_names : m.model_names;
}

/// Labels of `m` for `target`, or 1/0 for legit/other when `legit` is set.
Labels task_labels(const FeatureMatrix& m, Target target, const std::optional<std::string>& legit,
                   std::vector<std::string>& class_names) {
  const Labels& y = labels_for(m, target);
  const auto& names = names_for(m, target);
  if (!legit) {
    class_names = names;
    return y;
  }
  const auto it = std::find(names.begin(), names.end(), *legit);
  if (it == names.end()) throw Error(ErrorCode::LabelAbsent, kModule, "label '" + *legit + "' not in the feature file");
  const int id = static_cast<int>(it - names.begin());
  Labels out(y.size());
  std::transform(y.begin(), y.end(), out.begin(), [id](int v) { return v == id ? 1 : 0; });
  class_names = {"not_authenticated", "authenticated"};
  return out;
}

void save_model(const fs::path& path, const TrainedModel& model) { write_text(path, model_to_json(model).dump() + "\n"); }

}  // namespace

int guarded(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::BadConfig ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << kModule << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, kModule, "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, kModule, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::Io, kModule, "write failed for " + path.string());
}

PipelineKind sniff_pipeline_kind(std::string_view csv_text) {
  const std::string_view header = csv_text.substr(0, csv_text.find('\n'));
  return header.find("frequency") != std::string_view::npos ? PipelineKind::Eis : PipelineKind::Dca;
}

DatasetCatalog load_catalog(PipelineKind kind, const fs::path& input, const SampleMeta& meta_defaults) {
  std::vector<fs::path> files;
  if (fs::is_directory(input)) {
    for (const auto& entry : fs::directory_iterator(input)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::EmptyDataset, kModule, "no .csv files in " + input.string());
  } else {
    files.push_back(input);
  }
  if (kind == PipelineKind::Dca) {
    std::vector<CycleRecord> cycles;
    for (const auto& f : files) {
      auto part = parse_cycle_csv(read_text(f), meta_defaults);
      std::move(part.begin(), part.end(), std::back_inserter(cycles));
    }
    return build_catalog(std::move(cycles));
  }
  std::vector<EisSpectrum> spectra;
  for (const auto& f : files) {
    auto part = parse_eis_csv(read_text(f), meta_defaults);
    std::move(part.begin(), part.end(), std::back_inserter(spectra));
  }
  return build_catalog(std::move(spectra));
}

TrainedModel load_model(const fs::path& path) {
  const json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::FormatVersionMismatch, "ml-models", "malformed model file " + path.string());
  }
  return model_from_json(j);
}

// ---------------------------------------------------------------------------

DatasetCatalog synthesize(PipelineKind kind, const SynthConfig& synth) {
  const auto specs = synth.resolved_specs();
  if (kind == PipelineKind::Dca) {
    return gen_dataset(specs, synth.cells_per_spec, synth.cycles_per_cell, synth.seed,
                       CycleDatasetOptions{synth.n_points});
  }
  EisDatasetOptions options;
  options.n_freq = synth.n_freq;
  return gen_eis_dataset(specs, synth.sweeps_per_spec, synth.seed, options);
}

void cmd_synth(const SynthOptions& options, std::ostream& out) {
  SynthConfig synth = options.synth;
  if (options.specs_path) {
    const json j = json::parse(read_text(*options.specs_path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::BadSpec, "synth-lab", "spec file is not valid JSON");
    synth.specs = specs_from_json(j);
  }
  const DatasetCatalog catalog = synthesize(options.kind, synth);
  write_text(options.out, options.kind == PipelineKind::Dca ? write_cycle_csv(catalog.cycles)
                                                            : write_eis_csv(catalog.spectra));
  out << "wrote " << catalog.size() << (options.kind == PipelineKind::Dca ? " cycles" : " sweeps") << " ("
      << catalog.model_labels.size() << " models, " << catalog.arch_labels.size() << " architectures) to "
      << options.out.string() << "\n";
}

// ---------------------------------------------------------------------------

int resolve_threads(const RunConfig& config, const std::optional<int>& flag) {
  if (flag) {
    if (*flag < 1) throw Error(ErrorCode::BadConfig, kModule, "--threads: must be >= 1");
    return *flag;
  }
  if (auto env = threads_from_env()) return *env;
  return config.threads;
}

RunResult execute_run(RunConfig config, const RunOverrides& overrides) {
  RunResult result;
  result.threads = resolve_threads(config, overrides.threads);
  if (overrides.output_dir) config.output_dir = *overrides.output_dir;
  if (overrides.seed) {
    config.eval.seed = *overrides.seed;
    config.canonical["eval"]["seed"] = *overrides.seed;
  }
  result.output_dir = config.output_dir;

  DatasetCatalog catalog;
  if (config.synth) {
    catalog = synthesize(config.pipeline, *config.synth);
    write_text(config.output_dir / "data.csv", config.pipeline == PipelineKind::Dca ? write_cycle_csv(catalog.cycles)
                                                                                     : write_eis_csv(catalog.spectra));
  } else {
    catalog = load_catalog(config.pipeline, config.input, config.meta_defaults);
  }

  PipelineConfig pipeline{config.pipeline, config.dca, config.eis, result.threads};
  const FeatureMatrix matrix = build_feature_matrix(catalog, pipeline);

  EvalConfig eval = config.eval;
  eval.threads = result.threads;
  EvalReport report;
  report.config = eval;
  if (config.identification) report.identification = run_identification(matrix, config.models, eval).identification;
  if (config.authentication) report.authentication = run_authentication(matrix, config.models, eval).authentication;

  json seeds = {{"eval", eval.seed}, {"models", json::array()}};
  for (const auto& m : config.models) seeds["models"].push_back({{"kind", to_string(m.kind)}, {"seed", m.seed}});
  seeds["synth"] = config.synth ? json(config.synth->seed) : json(nullptr);

  result.report_json = report_to_json(report);
  result.report_json["provenance"] = {{"config_hash", fnv1a_hex(config.canonical.dump())},
                                      {"catalog_version", matrix.catalog_version},
                                      {"pipeline", to_string(config.pipeline)},
                                      {"n_samples", matrix.rows()},
                                      {"n_features", matrix.cols()},
                                      {"seeds", std::move(seeds)}};
  result.report_csv = report_to_csv(report);
  write_text(config.output_dir / "report.json", result.report_json.dump(2) + "\n");
  write_text(config.output_dir / "report.csv", result.report_csv);

  const json base = pipeline_json(config.pipeline, config.dca, config.eis);
  const fs::path models_dir = config.output_dir / "models";
  for (const auto& r : report.identification) {
    for (const auto& m : r.models) {
      if (!m.model) continue;
      TrainedModel model = *m.model;
      model.class_names = r.class_names;
      model.pipeline = base;
      model.pipeline["task"] = to_string(r.task);
      save_model(models_dir / (std::string(to_string(r.task)) + "_" + std::string(short_name(m.kind)) + ".json"),
                 model);
    }
  }
  for (const auto& r : report.authentication) {
    for (const auto& cell : r.cells) {
      for (const auto& m : cell.models) {
        if (!m.model) continue;
        TrainedModel model = *m.model;
        model.class_names = {"not_authenticated", "authenticated"};
        model.pipeline = base;
        model.pipeline["task"] = to_string(r.task);
        model.pipeline["legit_label"] = cell.legit_label;
        model.pipeline["legit_percent"] = cell.legit_percent;
        const std::string name = std::string(to_string(r.task)) + "_" + slug(cell.legit_label) + "_" +
                                 std::to_string(cell.legit_percent) + "-" + std::to_string(100 - cell.legit_percent) +
                                 "_" + std::string(short_name(m.kind)) + ".json";
        save_model(models_dir / name, model);
      }
    }
  }
  result.report = std::move(report);
  return result;
}

int cmd_run(const fs::path& config_path, const RunOverrides& overrides, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunResult result = execute_run(load_run_config(config_path), overrides);
    for (const auto& r : result.report.identification) {
      for (const auto& m : r.models) {
        out << to_string(r.task) << " " << short_name(m.kind) << " macro-F1 " << fixed(m.metrics.f1) << "\n";
      }
    }
    for (const auto& r : result.report.authentication) {
      std::vector<ModelKind> kinds;
      for (const auto& c : r.cells) {
        for (const auto& m : c.models) {
          if (std::find(kinds.begin(), kinds.end(), m.kind) == kinds.end()) kinds.push_back(m.kind);
        }
      }
      for (ModelKind kind : kinds) {
        const MetricSet avg = average_metrics(r, kind);
        out << to_string(r.task) << " " << short_name(kind) << " F1 " << fixed(avg.f1) << " FAR " << fixed(avg.far)
            << " FRR " << fixed(avg.frr) << "\n";
      }
    }
    out << "report: " << (result.output_dir / "report.json").string() << "\n";
  });
}

// ---------------------------------------------------------------------------

void cmd_ingest(const StageOptions& options, std::ostream& out) {
  const DatasetCatalog catalog = load_catalog(options.kind, options.input);
  json j = json::parse(catalog_to_json(catalog));
  j["records"] = catalog.size();
  j["pipeline"] = to_string(options.kind);
  write_text(options.out, j.dump(2) + "\n");
  out << "ingested " << catalog.size() << " records\n";
}

void cmd_process(const StageOptions& options, std::ostream& out) {
  const DatasetCatalog catalog = load_catalog(options.kind, options.input);
  std::vector<std::string> files(catalog.size());
  parallel_for(catalog.size(), options.threads, [&](std::size_t i) {
    files[i] = options.kind == PipelineKind::Dca ? dca_series_to_csv(process_cycle(catalog.cycles[i], options.dca))
                                                 : nyquist_to_csv(process_spectrum(catalog.spectra[i], options.eis));
  });
  for (std::size_t i = 0; i < files.size(); ++i) {
    write_text(options.out / ("record_" + std::to_string(i) + ".csv"), files[i]);
  }
  out << "processed " << files.size() << " records into " << options.out.string() << "\n";
}

void cmd_extract(const StageOptions& options, const std::optional<fs::path>& binary_out, std::ostream& out) {
  const DatasetCatalog catalog = load_catalog(options.kind, options.input);
  const FeatureMatrix m =
      build_feature_matrix(catalog, PipelineConfig{options.kind, options.dca, options.eis, options.threads});
  write_text(options.out, feature_matrix_to_csv(m));
  if (binary_out) {
    write_text(*binary_out, feature_matrix_to_binary(m));
    fs::path sidecar = *binary_out;
    sidecar += ".json";
    write_text(sidecar, feature_matrix_sidecar(m));
  }
  out << "extracted " << m.rows() << " x " << m.cols() << " features\n";
}

FeatureMatrix load_feature_matrix(const fs::path& path) {
  if (path.extension() == ".csv") return feature_matrix_from_csv(read_text(path));
  fs::path sidecar = path;
  sidecar += ".json";
  return feature_matrix_from_binary(read_text(path), read_text(sidecar));
}

void cmd_select(const SelectOptions& options, std::ostream& out) {
  const FeatureMatrix m = load_feature_matrix(options.features);
  const SelectionMask mask = select_features(m.values, labels_for(m, options.target), options.fdr);
  json features = json::array();
  for (std::size_t i = 0; i < mask.keep.size(); ++i) {
    const double p = mask.p_values[static_cast<Eigen::Index>(i)];
    features.push_back({{"name", m.feature_names[i]}, {"p_value", std::isfinite(p) ? json(p) : json(nullptr)},
                        {"keep", static_cast<bool>(mask.keep[i])}});
  }
  const json j = {{"fdr", options.fdr}, {"target", to_string(options.target)}, {"kept", mask.kept()},
                  {"features", std::move(features)}};
  write_text(options.out, j.dump(2) + "\n");
  out << "kept " << mask.kept() << " of " << mask.keep.size() << " features\n";
}

std::vector<bool> load_mask(const fs::path& path, const std::vector<std::string>& feature_names) {
  const json j = json::parse(read_text(path), nullptr, false);
  if (j.is_discarded() || !j.contains("features") || !j["features"].is_array()) {
    throw Error(ErrorCode::BadArgument, kModule, "mask file " + path.string() + " is malformed");
  }
  const auto& features = j["features"];
  if (features.size() != feature_names.size()) {
    throw Error(ErrorCode::DimensionMismatch, kModule, "mask width differs from the feature file");
  }
  std::vector<bool> keep(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].value("name", "") != feature_names[i]) {
      throw Error(ErrorCode::CatalogMismatch, kModule, "mask feature " + std::to_string(i) + " has a different name");
    }
    keep[i] = features[i].value("keep", false);
  }
  return keep;
}

void cmd_train(const TrainCommandOptions& options, std::ostream& out) {
  const FeatureMatrix m = load_feature_matrix(options.features);
  std::vector<std::string> class_names;
  const Labels y = task_labels(m, options.target, options.legit, class_names);
  TrainOptions train_options;
  train_options.threads = options.threads;
  train_options.catalog_version = m.catalog_version;
  train_options.n_classes = static_cast<int>(class_names.size());
  if (options.mask) train_options.mask = load_mask(*options.mask, m.feature_names);
  const GridSearchResult search =
      grid_search(default_spec(options.kind, options.seed), m.values, y, options.cv_folds, train_options);
  TrainedModel model = search.model;
  model.class_names = class_names;
  model.pipeline = {{"kind", to_string(kind_from_width(m.cols()))}, {"target", to_string(options.target)}};
  if (options.legit) model.pipeline["legit_label"] = *options.legit;
  save_model(options.out, model);
  out << short_name(options.kind) << " cv macro-F1 " << fixed(search.candidates[search.best_index].mean_score)
      << " -> " << options.out.string() << "\n";
}

void cmd_explain(const ExplainOptions& options, std::ostream& out) {
  const TrainedModel model = load_model(options.model);
  const FeatureMatrix m = load_feature_matrix(options.features);
  std::vector<std::string> names;
  const Labels raw = task_labels(m, options.target, options.legit, names);

  // Map feature-file class ids onto the model's class order by name.
  Labels y;
  IndexList rows;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& name = names[static_cast<std::size_t>(raw[i])];
    const auto it = std::find(model.class_names.begin(), model.class_names.end(), name);
    if (it == model.class_names.end()) continue;
    rows.push_back(i);
    y.push_back(static_cast<int>(it - model.class_names.begin()));
  }
  if (rows.empty()) throw Error(ErrorCode::LabelAbsent, kModule, "no rows carry a class known to the model");
  const Matrix x = m.values(rows, Eigen::all);

  std::optional<Vector> mdi;
  if (model.kind == ModelKind::RandomForest || model.kind == ModelKind::DecisionTree || model.kind == ModelKind::AdaBoost) {
    mdi = mdi_importance(model);
  }
  const PermutationImportance perm = permutation_importance(model, x, y, options.repeats, options.seed);

  std::string csv = "feature,mdi,permutation_mean,permutation_std\n";
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    csv += m.feature_names[static_cast<std::size_t>(c)] + "," + (mdi ? format_double((*mdi)[c]) : std::string()) +
           "," + format_double(perm.mean_drop[c]) + "," + format_double(perm.std_drop[c]) + "\n";
  }
  write_text(options.out, csv);
  out << "baseline macro-F1 " << fixed(perm.baseline) << ", importances -> " << options.out.string() << "\n"
      << "permutation importance is a model-agnostic substitute for SHAP values\n";
}

// ---------------------------------------------------------------------------

Matrix featurize_samples(const TrainedModel& model, std::string_view sample_csv, std::vector<SampleMeta>* meta) {
  if (!model.catalog_version.empty() && model.catalog_version != kCatalogVersion) {
    throw Error(ErrorCode::CatalogMismatch, kModule,
                "model uses feature catalog " + model.catalog_version + ", this build provides " + kCatalogVersion);
  }
  const PipelineKind kind = sniff_pipeline_kind(sample_csv);
  const DcaConfig dca = model.pipeline.contains("dca") ? dca_from_json(model.pipeline["dca"]) : DcaConfig{};
  EisConfig eis;
  if (model.pipeline.contains("eis")) eis.m = model.pipeline["eis"].value("m", eis.m);
  const FeatureCatalog catalog = catalog_default(channel_count(kind));

  std::vector<Vector> rows;
  if (kind == PipelineKind::Dca) {
    for (const auto& c : parse_cycle_csv(sample_csv, {})) {
      rows.push_back(featurize(c, dca, catalog).values);
      if (meta) meta->push_back(c.meta);
    }
  } else {
    for (const auto& s : parse_eis_csv(sample_csv, {})) {
      rows.push_back(featurize(s, eis, catalog).values);
      if (meta) meta->push_back(s.meta);
    }
  }
  Matrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(catalog.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return x;
}

std::vector<Decision> authenticate(const TrainedModel& model, std::string_view sample_csv) {
  std::vector<SampleMeta> meta;
  const Matrix x = featurize_samples(model, sample_csv, &meta);
  const Labels predicted = model.predict(x);
  const auto scores = model.predict_scores(x);
  std::vector<Decision> out;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    Decision d;
    d.cell_id = meta[i].cell_id;
    d.cycle_index = meta[i].cycle_index;
    d.class_index = predicted[i];
    const auto c = static_cast<std::size_t>(predicted[i]);
    d.label = c < model.class_names.size() ? model.class_names[c] : std::to_string(predicted[i]);
    if (scores) d.score = (*scores)(static_cast<Eigen::Index>(i), predicted[i]);
    out.push_back(std::move(d));
  }
  return out;
}

void cmd_authenticate(const fs::path& model_path, const fs::path& sample_path, bool as_json, std::ostream& out) {
  const TrainedModel model = load_model(model_path);
  const auto decisions = authenticate(model, read_text(sample_path));
  if (as_json) {
    json arr = json::array();
    for (const auto& d : decisions) {
      arr.push_back({{"cell_id", d.cell_id},
                     {"cycle_index", d.cycle_index ? json(*d.cycle_index) : json(nullptr)},
                     {"label", d.label},
                     {"class_index", d.class_index},
                     {"score", d.score ? json(*d.score) : json(nullptr)}});
    }
    out << json{{"model", to_string(model.kind)}, {"decisions", std::move(arr)}}.dump() << "\n";
    return;
  }
  for (const auto& d : decisions) {
    out << (d.cell_id.empty() ? std::string("sample") : d.cell_id);
    if (d.cycle_index) out << " #" << *d.cycle_index;
    out << ": " << d.label;
    if (d.score) out << " (score " << fixed(*d.score) << ")";
    out << "\n";
  }
}

BenchRow bench_model(const TrainedModel& model, const Matrix& features, int repeats) {
  if (repeats < 1) throw Error(ErrorCode::BadArgument, kModule, "bench repeats must be >= 1");
  if (features.rows() == 0) throw Error(ErrorCode::EmptyDataset, kModule, "bench needs at least one sample");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(repeats) * static_cast<std::size_t>(features.rows()));
  volatile int sink = 0;
  for (int r = 0; r < repeats; ++r) {
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
      const Matrix row = features.row(i);
      const auto start = std::chrono::steady_clock::now();
      sink = sink + model.predict(row).front();
      const auto stop = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
  }
  const auto mid = times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2);
  std::nth_element(times.begin(), mid, times.end());
  double median = *mid;
  if (times.size() % 2 == 0) median = 0.5 * (median + *std::max_element(times.begin(), mid));
  BenchRow row;
  row.kind = model.kind;
  row.time_ms = median;
  row.size_kb = static_cast<double>(model_to_json(model).dump().size()) / 1024.0;
  row.samples = static_cast<std::size_t>(features.rows());
  return row;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "model,time_ms,size_kb\n";
  for (const auto& r : rows) out += std::string(short_name(r.kind)) + "," + fixed(r.time_ms) + "," + fixed(r.size_kb, 3) + "\n";
  return out;
}

void cmd_bench(const std::vector<fs::path>& models, const fs::path& samples, int repeats, std::ostream& out) {
  if (repeats < 1) throw Error(ErrorCode::BadArgument, kModule, "--repeats must be >= 1");
  const std::string text = read_text(samples);
  std::vector<BenchRow> rows;
  for (const auto& path : models) {
    const TrainedModel model = load_model(path);
    rows.push_back(bench_model(model, featurize_samples(model, text), repeats));
  }
  out << bench_csv(rows);
}

}  // namespace batauth
