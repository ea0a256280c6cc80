#include <batauth/error.hpp>
#include <batauth/parallel.hpp>
#include <batauth/pipeline.hpp>

namespace batauth {

namespace {

constexpr std::string_view kModule = "feature-engine";

template <typename Record, typename Config>
FeatureMatrix extract_all(const std::vector<Record>& records, const Config& config, const DatasetCatalog& catalog,
                          PipelineKind kind, int threads) {
  if (records.empty()) {
    throw Error(ErrorCode::EmptyDataset, kModule,
                std::string("no ") + (kind == PipelineKind::Dca ? "cycles" : "spectra") + " to featurize");
  }
  const FeatureCatalog features = catalog_default(channel_count(kind));
  FeatureMatrix m;
  m.feature_names = features.names();
  m.catalog_version = features.version;
  m.model_names = catalog.model_labels;
  m.arch_names = catalog.arch_labels;
  m.values.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(features.size()));
  m.imputed_counts.resize(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const FeatureVector v = featurize(records[i], config, features);
    m.values.row(static_cast<Eigen::Index>(i)) = v.values.transpose();
    m.imputed_counts[i] = v.imputed_count;
  });
  for (const auto& r : records) {
    m.model_labels.push_back(catalog.model_id(r.meta.battery_model));
    m.arch_labels.push_back(catalog.arch_id(r.meta.architecture));
    m.meta.push_back(r.meta);
  }
  return m;
}

}  // namespace

std::string_view to_string(PipelineKind kind) noexcept { return kind == PipelineKind::Dca ? "dca" : "eis"; }

PipelineKind parse_pipeline_kind(std::string_view text) {
  if (text == "dca") return PipelineKind::Dca;
  if (text == "eis") return PipelineKind::Eis;
  throw Error(ErrorCode::BadArgument, kModule, "pipeline must be 'dca' or 'eis'");
}

int channel_count(PipelineKind kind) noexcept { return kind == PipelineKind::Dca ? 1 : 2; }

FeatureVector featurize(const CycleRecord& cycle, const DcaConfig& config, const FeatureCatalog& catalog) {
  const DcaSeries series = process_cycle(cycle, config);
  return extract_features({series.dqdv}, catalog);
}

FeatureVector featurize(const EisSpectrum& spectrum, const EisConfig& config, const FeatureCatalog& catalog) {
  const NyquistChannels channels = process_spectrum(spectrum, config);
  return extract_features({channels.re_z, channels.neg_im_z}, catalog);
}

FeatureMatrix build_feature_matrix(const DatasetCatalog& catalog, const PipelineConfig& config) {
  if (config.kind == PipelineKind::Dca) {
    validate(config.dca);
    return extract_all(catalog.cycles, config.dca, catalog, config.kind, config.threads);
  }
  validate(config.eis);
  return extract_all(catalog.spectra, config.eis, catalog, config.kind, config.threads);
}

}  // namespace batauth
