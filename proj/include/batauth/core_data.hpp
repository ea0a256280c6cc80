#pragma once

#include <batauth/types.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace batauth {

enum class CycleKind { Charge, Discharge };

std::string_view to_string(CycleKind kind) noexcept;
CycleKind parse_cycle_kind(std::string_view text);

/// Provenance and condition labels attached to every cycle or sweep.
struct SampleMeta {
  std::string dataset_id;
  std::string cell_id;
  std::string battery_model;
  std::string architecture;
  std::optional<double> soc_percent;
  std::optional<double> soh_percent;
  std::optional<double> temperature_c;
  std::optional<long> cycle_index;

  bool operator==(const SampleMeta&) const = default;
};

/// One charge or discharge cycle. Capacity is in amp-hours.
struct CycleRecord {
  Vector voltage;
  Vector capacity;
  CycleKind cycle_kind = CycleKind::Charge;
  SampleMeta meta;

  std::size_t size() const noexcept { return static_cast<std::size_t>(voltage.size()); }
  bool operator==(const CycleRecord& other) const;
};

/// One impedance sweep, frequency strictly increasing.
struct EisSpectrum {
  Vector frequency;
  Vector z_real;
  Vector z_imag;
  SampleMeta meta;

  std::size_t size() const noexcept { return static_cast<std::size_t>(frequency.size()); }
  bool operator==(const EisSpectrum& other) const;
};

struct CycleParseOptions {
  std::size_t min_length = 16;
  /// Allowed backwards step of capacity, as a fraction of the cycle's capacity range.
  double monotone_tolerance = 0.005;
  bool check_monotone = true;
};

struct EisParseOptions {
  std::size_t min_length = 8;
};

void validate_meta(const SampleMeta& meta);
void validate_cycle(const CycleRecord& cycle, const CycleParseOptions& options = {});
void validate_spectrum(const EisSpectrum& spectrum, const EisParseOptions& options = {});

/// Parses voltage/capacity rows. Rows are grouped by (cell_id, cycle_index,
/// cycle_kind) in order of first appearance; missing meta columns fall back
/// to `meta_defaults`.
std::vector<CycleRecord> parse_cycle_csv(std::string_view text, const SampleMeta& meta_defaults,
                                         const CycleParseOptions& options = {});

/// Parses impedance rows grouped by (cell_id, sweep_id); each sweep is sorted by frequency.
std::vector<EisSpectrum> parse_eis_csv(std::string_view text, const SampleMeta& meta_defaults,
                                       const EisParseOptions& options = {});

/// Canonical writers; their output parses back to the same records.
std::string write_cycle_csv(const std::vector<CycleRecord>& records);
std::string write_eis_csv(const std::vector<EisSpectrum>& spectra);

struct DatasetCatalog {
  std::vector<CycleRecord> cycles;
  std::vector<EisSpectrum> spectra;
  std::vector<std::string> model_labels;
  std::vector<std::string> arch_labels;

  int model_id(std::string_view name) const;
  int arch_id(std::string_view name) const;
  std::size_t size() const noexcept { return cycles.size() + spectra.size(); }
};

/// Label ids are assigned in first-appearance order.
DatasetCatalog build_catalog(std::vector<CycleRecord> records);
DatasetCatalog build_catalog(std::vector<EisSpectrum> spectra);

/// {"models":[...],"architectures":[...]}
std::string catalog_to_json(const DatasetCatalog& catalog);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

}  // namespace batauth
