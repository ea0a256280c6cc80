#pragma once

#include <batauth/core_data.hpp>
#include <batauth/dca.hpp>
#include <batauth/eis.hpp>
#include <batauth/features.hpp>

#include <string_view>

namespace batauth {

enum class PipelineKind { Dca, Eis };

std::string_view to_string(PipelineKind kind) noexcept;
PipelineKind parse_pipeline_kind(std::string_view text);

struct PipelineConfig {
  PipelineKind kind = PipelineKind::Dca;
  DcaConfig dca;
  EisConfig eis;
  int threads = 1;
};

/// 1 channel for DCA (dQ/dV), 2 for EIS (Re Z, -Im Z).
int channel_count(PipelineKind kind) noexcept;

FeatureVector featurize(const CycleRecord& cycle, const DcaConfig& config, const FeatureCatalog& catalog);
FeatureVector featurize(const EisSpectrum& spectrum, const EisConfig& config, const FeatureCatalog& catalog);

/// Processes every record of the catalog that matches the pipeline kind and
/// extracts the default feature catalog. Rows follow record order.
FeatureMatrix build_feature_matrix(const DatasetCatalog& catalog, const PipelineConfig& config);

}  // namespace batauth
