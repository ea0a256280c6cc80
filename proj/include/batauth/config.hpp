#pragma once

#include <batauth/core_data.hpp>
#include <batauth/dca.hpp>
#include <batauth/eis.hpp>
#include <batauth/eval.hpp>
#include <batauth/models.hpp>
#include <batauth/pipeline.hpp>
#include <batauth/synth.hpp>

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace batauth {

/// Optional data generation block of a run config.
struct SynthConfig {
  std::vector<SyntheticCellSpec> specs;  // empty = demo_specs(noise_std)
  double noise_std = 0.02;
  int cells_per_spec = 10;
  int cycles_per_cell = 20;
  int sweeps_per_spec = 40;
  int n_points = 1000;
  int n_freq = 60;
  std::uint64_t seed = 0;

  std::vector<SyntheticCellSpec> resolved_specs() const;
};

struct RunConfig {
  PipelineKind pipeline = PipelineKind::Dca;
  std::filesystem::path input;  // ignored when synth is set
  std::filesystem::path output_dir = "out";
  SampleMeta meta_defaults;
  DcaConfig dca;
  EisConfig eis;
  std::string catalog_version;
  std::vector<ModelSpec> models;
  bool identification = true;
  bool authentication = true;
  /// Selection flag and FDR level live in eval.select_features / eval.fdr.
  EvalConfig eval;
  int threads = 1;
  std::optional<SynthConfig> synth;
  /// The config as read, minus the thread count; hashed for provenance.
  nlohmann::json canonical;
};

/// Validates every key; unknown keys and bad values throw BadConfig naming
/// the field. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Thread count from BATAUTH_THREADS if set and valid.
std::optional<int> threads_from_env();

}  // namespace batauth
