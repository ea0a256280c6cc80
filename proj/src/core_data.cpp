#include <batauth/core_data.hpp>
#include <batauth/error.hpp>

#include "csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace batauth {

namespace {

constexpr std::string_view kModule = "core-data";

bool same_values(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

std::string text_or(const detail::CsvTable& table, std::size_t row, std::optional<std::size_t> col,
                    const std::string& fallback) {
  if (!col) return fallback;
  auto cell = table.cell(row, *col);
  return cell.empty() ? fallback : std::string(cell);
}

SampleMeta row_meta(const detail::CsvTable& table, std::size_t row, const SampleMeta& defaults) {
  SampleMeta meta = defaults;
  meta.dataset_id = text_or(table, row, table.column("dataset_id"), defaults.dataset_id);
  meta.cell_id = text_or(table, row, table.column("cell_id"), defaults.cell_id);
  meta.battery_model = text_or(table, row, table.column("battery_model"), defaults.battery_model);
  meta.architecture = text_or(table, row, table.column("architecture"), defaults.architecture);
  if (auto v = table.optional_number(row, table.column("soc_percent"))) meta.soc_percent = v;
  if (auto v = table.optional_number(row, table.column("soh_percent"))) meta.soh_percent = v;
  if (auto v = table.optional_number(row, table.column("temperature_c"))) meta.temperature_c = v;
  return meta;
}

void check_plain(const std::string& field, std::string_view what) {
  if (field.find_first_of(",\n\r\"") != std::string::npos) {
    throw Error(ErrorCode::BadMeta, kModule, std::string(what) + " '" + field + "' contains a CSV delimiter");
  }
}

std::string optional_text(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string meta_prefix(const SampleMeta& meta) {
  check_plain(meta.dataset_id, "dataset_id");
  check_plain(meta.cell_id, "cell_id");
  check_plain(meta.battery_model, "battery_model");
  check_plain(meta.architecture, "architecture");
  return meta.dataset_id + "," + meta.cell_id + "," + meta.battery_model + "," + meta.architecture + "," +
         optional_text(meta.soc_percent) + "," + optional_text(meta.soh_percent) + "," +
         optional_text(meta.temperature_c);
}

template <typename Record>
std::vector<std::string> labels_of(const std::vector<Record>& records, std::string SampleMeta::*field) {
  std::vector<std::string> labels;
  for (const auto& r : records) {
    const std::string& name = r.meta.*field;
    if (std::find(labels.begin(), labels.end(), name) == labels.end()) labels.push_back(name);
  }
  return labels;
}

int index_of(const std::vector<std::string>& labels, std::string_view name) {
  auto it = std::find(labels.begin(), labels.end(), name);
  if (it == labels.end()) throw Error(ErrorCode::LabelAbsent, kModule, "unknown label '" + std::string(name) + "'");
  return static_cast<int>(it - labels.begin());
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::string_view to_string(CycleKind kind) noexcept { return kind == CycleKind::Charge ? "charge" : "discharge"; }

CycleKind parse_cycle_kind(std::string_view text) {
  if (text == "charge") return CycleKind::Charge;
  if (text == "discharge") return CycleKind::Discharge;
  throw Error(ErrorCode::BadCsv, kModule, "cycle_kind must be 'charge' or 'discharge', got '" + std::string(text) + "'");
}

bool CycleRecord::operator==(const CycleRecord& other) const {
  return cycle_kind == other.cycle_kind && meta == other.meta && same_values(voltage, other.voltage) &&
         same_values(capacity, other.capacity);
}

bool EisSpectrum::operator==(const EisSpectrum& other) const {
  return meta == other.meta && same_values(frequency, other.frequency) && same_values(z_real, other.z_real) &&
         same_values(z_imag, other.z_imag);
}

void validate_meta(const SampleMeta& meta) {
  if (meta.battery_model.empty()) throw Error(ErrorCode::BadMeta, kModule, "battery_model is empty");
  if (meta.architecture.empty()) throw Error(ErrorCode::BadMeta, kModule, "architecture is empty");
  auto in_percent = [](const std::optional<double>& v) { return !v || (*v >= 0.0 && *v <= 100.0); };
  if (!in_percent(meta.soc_percent)) throw Error(ErrorCode::BadMeta, kModule, "soc_percent outside [0, 100]");
  if (!in_percent(meta.soh_percent)) throw Error(ErrorCode::BadMeta, kModule, "soh_percent outside [0, 100]");
}

void validate_cycle(const CycleRecord& cycle, const CycleParseOptions& options) {
  validate_meta(cycle.meta);
  if (cycle.voltage.size() != cycle.capacity.size()) {
    throw Error(ErrorCode::BadCsv, kModule, "voltage and capacity lengths differ");
  }
  if (cycle.size() < options.min_length) {
    throw Error(ErrorCode::TooShortCycle, kModule,
                "cycle of cell '" + cycle.meta.cell_id + "' has " + std::to_string(cycle.size()) + " points, need " +
                    std::to_string(options.min_length));
  }
  if (!cycle.voltage.allFinite() || !cycle.capacity.allFinite()) {
    throw Error(ErrorCode::NonFiniteValue, kModule, "cycle contains non-finite values");
  }
  if (!options.check_monotone || cycle.size() < 2) return;
  const double range = cycle.capacity.maxCoeff() - cycle.capacity.minCoeff();
  const double tol = options.monotone_tolerance * range;
  const double sign = cycle.cycle_kind == CycleKind::Charge ? 1.0 : -1.0;
  for (Eigen::Index i = 1; i < cycle.capacity.size(); ++i) {
    if (sign * (cycle.capacity[i] - cycle.capacity[i - 1]) < -tol) {
      throw Error(ErrorCode::NonMonotoneCapacity, kModule,
                  "capacity of " + std::string(to_string(cycle.cycle_kind)) + " cycle moves backwards at sample " +
                      std::to_string(i));
    }
  }
}

void validate_spectrum(const EisSpectrum& spectrum, const EisParseOptions& options) {
  validate_meta(spectrum.meta);
  const auto n = spectrum.frequency.size();
  if (spectrum.z_real.size() != n || spectrum.z_imag.size() != n) {
    throw Error(ErrorCode::BadCsv, kModule, "frequency and impedance lengths differ");
  }
  if (spectrum.size() < options.min_length) {
    throw Error(ErrorCode::TooShortCycle, kModule,
                "sweep has " + std::to_string(n) + " points, need " + std::to_string(options.min_length));
  }
  if (!spectrum.frequency.allFinite() || !spectrum.z_real.allFinite() || !spectrum.z_imag.allFinite()) {
    throw Error(ErrorCode::NonFiniteValue, kModule, "sweep contains non-finite values");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (spectrum.frequency[i] <= 0.0) throw Error(ErrorCode::NonPositiveFrequency, kModule, "frequency <= 0");
    if (i > 0 && spectrum.frequency[i] <= spectrum.frequency[i - 1]) {
      throw Error(ErrorCode::DuplicateFrequency, kModule, "frequencies not strictly increasing");
    }
  }
}

std::vector<CycleRecord> parse_cycle_csv(std::string_view text, const SampleMeta& meta_defaults,
                                         const CycleParseOptions& options) {
  detail::CsvTable table(text, kModule);
  const auto v_col = table.require_column("voltage");
  const auto q_col = table.require_column("capacity");
  const auto index_col = table.column("cycle_index");
  const auto kind_col = table.column("cycle_kind");

  struct Group {
    SampleMeta meta;
    std::optional<CycleKind> kind;
    std::vector<double> v, q;
  };
  using Key = std::tuple<std::string, std::optional<long>, std::string>;
  std::map<Key, std::size_t> group_of;
  std::vector<Group> groups;

  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double v = table.number(r, v_col);
    const double q = table.number(r, q_col);
    SampleMeta meta = row_meta(table, r, meta_defaults);
    if (auto idx = table.optional_number(r, index_col)) meta.cycle_index = static_cast<long>(std::llround(*idx));
    std::optional<CycleKind> kind;
    std::string kind_text;
    if (kind_col && !table.cell(r, *kind_col).empty()) {
      kind = parse_cycle_kind(table.cell(r, *kind_col));
      kind_text = std::string(to_string(*kind));
    }
    Key key{meta.cell_id, meta.cycle_index, kind_text};
    auto [it, inserted] = group_of.emplace(key, groups.size());
    if (inserted) groups.push_back(Group{meta, kind, {}, {}});
    groups[it->second].v.push_back(v);
    groups[it->second].q.push_back(q);
  }

  std::vector<CycleRecord> records;
  records.reserve(groups.size());
  for (auto& g : groups) {
    CycleRecord rec;
    rec.voltage = Eigen::Map<const Vector>(g.v.data(), static_cast<Eigen::Index>(g.v.size()));
    rec.capacity = Eigen::Map<const Vector>(g.q.data(), static_cast<Eigen::Index>(g.q.size()));
    rec.cycle_kind = g.kind.value_or(g.q.back() < g.q.front() ? CycleKind::Discharge : CycleKind::Charge);
    rec.meta = std::move(g.meta);
    validate_cycle(rec, options);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<EisSpectrum> parse_eis_csv(std::string_view text, const SampleMeta& meta_defaults,
                                       const EisParseOptions& options) {
  detail::CsvTable table(text, kModule);
  const auto f_col = table.require_column("frequency");
  const auto re_col = table.require_column("z_real");
  const auto im_col = table.require_column("z_imag");
  const auto sweep_col = table.column("sweep_id");

  struct Group {
    SampleMeta meta;
    std::vector<std::array<double, 3>> rows;
  };
  std::map<std::pair<std::string, std::string>, std::size_t> group_of;
  std::vector<Group> groups;

  for (std::size_t r = 0; r < table.rows(); ++r) {
    const double f = table.number(r, f_col);
    if (f <= 0.0) {
      throw Error(ErrorCode::NonPositiveFrequency, kModule, "line " + std::to_string(table.line_of(r)) + ": frequency <= 0");
    }
    const double re = table.number(r, re_col);
    const double im = table.number(r, im_col);
    SampleMeta meta = row_meta(table, r, meta_defaults);
    if (auto idx = table.optional_number(r, table.column("cycle_index"))) meta.cycle_index = std::llround(*idx);
    std::string sweep = sweep_col ? std::string(table.cell(r, *sweep_col)) : std::string();
    auto [it, inserted] = group_of.emplace(std::make_pair(meta.cell_id, sweep), groups.size());
    if (inserted) groups.push_back(Group{meta, {}});
    groups[it->second].rows.push_back({f, re, im});
  }

  std::vector<EisSpectrum> spectra;
  spectra.reserve(groups.size());
  for (auto& g : groups) {
    std::stable_sort(g.rows.begin(), g.rows.end(), [](const auto& a, const auto& b) { return a[0] < b[0]; });
    const auto n = static_cast<Eigen::Index>(g.rows.size());
    EisSpectrum s;
    s.frequency.resize(n);
    s.z_real.resize(n);
    s.z_imag.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s.frequency[i] = g.rows[static_cast<std::size_t>(i)][0];
      s.z_real[i] = g.rows[static_cast<std::size_t>(i)][1];
      s.z_imag[i] = g.rows[static_cast<std::size_t>(i)][2];
    }
    s.meta = std::move(g.meta);
    validate_spectrum(s, options);
    spectra.push_back(std::move(s));
  }
  return spectra;
}

std::string write_cycle_csv(const std::vector<CycleRecord>& records) {
  std::string out =
      "dataset_id,cell_id,battery_model,architecture,soc_percent,soh_percent,temperature_c,cycle_index,cycle_kind,"
      "voltage,capacity\n";
  for (const auto& rec : records) {
    const std::string prefix = meta_prefix(rec.meta) + "," +
                               (rec.meta.cycle_index ? std::to_string(*rec.meta.cycle_index) : std::string()) + "," +
                               std::string(to_string(rec.cycle_kind)) + ",";
    for (Eigen::Index i = 0; i < rec.voltage.size(); ++i) {
      out += prefix;
      out += format_double(rec.voltage[i]);
      out += ',';
      out += format_double(rec.capacity[i]);
      out += '\n';
    }
  }
  return out;
}

std::string write_eis_csv(const std::vector<EisSpectrum>& spectra) {
  std::string out =
      "dataset_id,cell_id,battery_model,architecture,soc_percent,soh_percent,temperature_c,cycle_index,sweep_id,"
      "frequency,z_real,z_imag\n";
  for (std::size_t s = 0; s < spectra.size(); ++s) {
    const auto& sp = spectra[s];
    const std::string prefix = meta_prefix(sp.meta) + "," +
                               (sp.meta.cycle_index ? std::to_string(*sp.meta.cycle_index) : std::string()) + "," +
                               std::to_string(s) + ",";
    for (Eigen::Index i = 0; i < sp.frequency.size(); ++i) {
      out += prefix;
      out += format_double(sp.frequency[i]);
      out += ',';
      out += format_double(sp.z_real[i]);
      out += ',';
      out += format_double(sp.z_imag[i]);
      out += '\n';
    }
  }
  return out;
}

int DatasetCatalog::model_id(std::string_view name) const { return index_of(model_labels, name); }
int DatasetCatalog::arch_id(std::string_view name) const { return index_of(arch_labels, name); }

DatasetCatalog build_catalog(std::vector<CycleRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptyDataset, kModule, "no records to catalog");
  DatasetCatalog catalog;
  catalog.model_labels = labels_of(records, &SampleMeta::battery_model);
  catalog.arch_labels = labels_of(records, &SampleMeta::architecture);
  catalog.cycles = std::move(records);
  return catalog;
}

DatasetCatalog build_catalog(std::vector<EisSpectrum> spectra) {
  if (spectra.empty()) throw Error(ErrorCode::EmptyDataset, kModule, "no spectra to catalog");
  DatasetCatalog catalog;
  catalog.model_labels = labels_of(spectra, &SampleMeta::battery_model);
  catalog.arch_labels = labels_of(spectra, &SampleMeta::architecture);
  catalog.spectra = std::move(spectra);
  return catalog;
}

std::string catalog_to_json(const DatasetCatalog& catalog) {
  nlohmann::ordered_json j;
  j["models"] = catalog.model_labels;
  j["architectures"] = catalog.arch_labels;
  return j.dump();
}

}  // namespace batauth
