#include <batauth/features.hpp>

#include "csv.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

namespace batauth {

namespace {

constexpr std::string_view kModule = "feature-engine";

constexpr std::array<double, 9> kQuantiles{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
constexpr std::array<int, 7> kLags{1, 2, 3, 5, 10, 20, 50};
constexpr std::array<int, 4> kPeakSupports{1, 3, 5, 10};
constexpr int kFftCoefficients = 16;
constexpr std::array<double, 4> kCwtWidths{2.0, 5.0, 10.0, 20.0};

std::string fixed(double value, int digits) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
  return buffer;
}

double skewness(const Vector& x) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  const auto c = x.array() - x.mean();
  const double m2 = c.square().mean();
  const double m3 = c.cube().mean();
  if (!(m2 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  // Adjusted Fisher-Pearson coefficient.
  return std::sqrt(n * (n - 1.0)) / (n - 2.0) * m3 / std::pow(m2, 1.5);
}

double kurtosis(const Vector& x) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 4) return std::numeric_limits<double>::quiet_NaN();
  const auto c = x.array() - x.mean();
  const double m2 = c.square().mean();
  const double m4 = c.square().square().mean();
  if (!(m2 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  // Bias-corrected excess kurtosis.
  return ((n + 1.0) * m4 / (m2 * m2) - 3.0 * (n - 1.0)) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
}

double linear_trend_slope(const Vector& x) {
  const Eigen::Index n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const Vector t = Vector::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  const auto tc = t.array() - t.mean();
  return (tc * (x.array() - x.mean())).sum() / tc.square().sum();
}

std::optional<double> evaluate(const FeatureEntry& entry, const Vector& x) {
  const Eigen::Index n = x.size();
  if (n == 0) return std::nullopt;
  switch (entry.family) {
    case FeatureFamily::Mean: return x.mean();
    case FeatureFamily::StandardDeviation: return std::sqrt((x.array() - x.mean()).square().mean());
    case FeatureFamily::Variance: return (x.array() - x.mean()).square().mean();
    case FeatureFamily::Skewness: return skewness(x);
    case FeatureFamily::Kurtosis: return kurtosis(x);
    case FeatureFamily::Minimum: return x.minCoeff();
    case FeatureFamily::Maximum: return x.maxCoeff();
    case FeatureFamily::Median: return feature_quantile(x, 0.5);
    case FeatureFamily::AbsEnergy: return x.squaredNorm();
    case FeatureFamily::MeanAbsChange:
      if (n < 2) return std::nullopt;
      return (x.tail(n - 1) - x.head(n - 1)).cwiseAbs().mean();
    case FeatureFamily::LinearTrendSlope: return linear_trend_slope(x);
    case FeatureFamily::CountAboveMean: return static_cast<double>((x.array() > x.mean()).count());
    case FeatureFamily::CountBelowMean: return static_cast<double>((x.array() < x.mean()).count());
    case FeatureFamily::Quantile: return feature_quantile(x, entry.param);
    case FeatureFamily::Autocorrelation: return feature_autocorrelation(x, static_cast<Eigen::Index>(entry.param));
    case FeatureFamily::NumberPeaks:
      return static_cast<double>(feature_number_peaks(x, static_cast<Eigen::Index>(entry.param)));
    case FeatureFamily::RangeCount: {
      const double lo = x.minCoeff();
      const double hi = x.maxCoeff();
      if (!(lo < hi)) return std::nullopt;
      const int bin = static_cast<int>(entry.param);
      const double width = (hi - lo) / kRangeCountBins;
      const double bin_lo = lo + width * bin;
      // The last bin is closed on the right so the maximum is counted.
      const double bin_hi = bin + 1 == kRangeCountBins ? std::nextafter(hi, std::numeric_limits<double>::infinity())
                                                        : lo + width * (bin + 1);
      return static_cast<double>(feature_range_count(x, bin_lo, bin_hi));
    }
    case FeatureFamily::FftAbs:
    case FeatureFamily::FftAngle: {
      const auto k = static_cast<Eigen::Index>(entry.param);
      if (k >= n) return std::nullopt;
      const auto c = feature_fft_coefficient(x, k);
      return entry.family == FeatureFamily::FftAbs ? c.abs : c.angle;
    }
    case FeatureFamily::CwtCoefficient: {
      const auto slot = static_cast<Eigen::Index>(entry.param2);
      const auto position = static_cast<Eigen::Index>(
          std::llround(static_cast<double>(slot) * static_cast<double>(n - 1) / (kCwtPositions - 1)));
      return feature_cwt_coefficient(x, entry.param, position);
    }
  }
  return std::nullopt;
}

void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); }

template <typename T>
T take(std::string_view& in) {
  if (in.size() < sizeof(T)) throw Error(ErrorCode::BadCsv, kModule, "truncated feature matrix binary");
  T v;
  std::memcpy(&v, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return v;
}

void assign_label_ids(const std::vector<std::string>& names_by_row, Labels& ids, std::vector<std::string>& names) {
  ids.clear();
  names.clear();
  for (const auto& name : names_by_row) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      names.push_back(name);
      it = names.end() - 1;
    }
    ids.push_back(static_cast<int>(it - names.begin()));
  }
}

}  // namespace

std::vector<std::string> FeatureCatalog::names() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.name);
  return out;
}

FeatureCatalog catalog_default(int channels) {
  if (channels != 1 && channels != 2) {
    throw Error(ErrorCode::UnsupportedChannelCount, kModule,
                "catalog supports 1 or 2 channels, got " + std::to_string(channels));
  }
  FeatureCatalog catalog;
  catalog.version = kCatalogVersion;
  catalog.channels = channels;
  for (int ch = 0; ch < channels; ++ch) {
    const std::string prefix = channels == 1 ? std::string() : "ch" + std::to_string(ch) + "_";
    auto add = [&](std::string name, FeatureFamily family, double p = 0.0, double p2 = 0.0) {
      catalog.entries.push_back(FeatureEntry{prefix + std::move(name), family, ch, p, p2});
    };
    add("mean", FeatureFamily::Mean);
    add("standard_deviation", FeatureFamily::StandardDeviation);
    add("variance", FeatureFamily::Variance);
    add("skewness", FeatureFamily::Skewness);
    add("kurtosis", FeatureFamily::Kurtosis);
    add("minimum", FeatureFamily::Minimum);
    add("maximum", FeatureFamily::Maximum);
    add("median", FeatureFamily::Median);
    add("abs_energy", FeatureFamily::AbsEnergy);
    add("mean_abs_change", FeatureFamily::MeanAbsChange);
    add("linear_trend_slope", FeatureFamily::LinearTrendSlope);
    add("count_above_mean", FeatureFamily::CountAboveMean);
    add("count_below_mean", FeatureFamily::CountBelowMean);
    for (double q : kQuantiles) add("quantile__q_" + fixed(q, 1), FeatureFamily::Quantile, q);
    for (int lag : kLags) add("autocorrelation__lag_" + std::to_string(lag), FeatureFamily::Autocorrelation, lag);
    for (int s : kPeakSupports) add("number_peaks__n_" + std::to_string(s), FeatureFamily::NumberPeaks, s);
    for (int b = 0; b < kRangeCountBins; ++b) add("range_count__bin_" + std::to_string(b), FeatureFamily::RangeCount, b);
    for (int k = 0; k < kFftCoefficients; ++k) {
      add("fft_coefficient__k_" + std::to_string(k) + "__abs", FeatureFamily::FftAbs, k);
      add("fft_coefficient__k_" + std::to_string(k) + "__angle", FeatureFamily::FftAngle, k);
    }
    for (double w : kCwtWidths) {
      for (int slot = 0; slot < kCwtPositions; ++slot) {
        add("cwt_coefficient__w_" + fixed(w, 0) + "__p_" + std::to_string(slot), FeatureFamily::CwtCoefficient, w,
            slot);
      }
    }
  }
  return catalog;
}

FeatureVector extract_features(const std::vector<Vector>& channels, const FeatureCatalog& catalog) {
  if (static_cast<int>(channels.size()) != catalog.channels) {
    throw Error(ErrorCode::CatalogMismatch, kModule,
                "catalog expects " + std::to_string(catalog.channels) + " channel(s), got " +
                    std::to_string(channels.size()));
  }
  FeatureVector out;
  out.catalog_version = catalog.version;
  out.values.resize(static_cast<Eigen::Index>(catalog.size()));
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& entry = catalog.entries[i];
    auto value = evaluate(entry, channels[static_cast<std::size_t>(entry.channel)]);
    if (!value || !std::isfinite(*value)) {
      ++out.imputed_count;
      value = 0.0;
    }
    out.values[static_cast<Eigen::Index>(i)] = *value;
  }
  return out;
}

FeatureMatrix FeatureMatrix::subset(const IndexList& rows) const {
  FeatureMatrix out;
  out.feature_names = feature_names;
  out.catalog_version = catalog_version;
  out.model_names = model_names;
  out.arch_names = arch_names;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(r));
    if (!model_labels.empty()) out.model_labels.push_back(model_labels[r]);
    if (!arch_labels.empty()) out.arch_labels.push_back(arch_labels[r]);
    if (!meta.empty()) out.meta.push_back(meta[r]);
    if (!imputed_counts.empty()) out.imputed_counts.push_back(imputed_counts[r]);
  }
  return out;
}

void FeatureMatrix::check() const {
  const auto n = static_cast<std::size_t>(values.rows());
  if (feature_names.size() != static_cast<std::size_t>(values.cols())) {
    throw Error(ErrorCode::CatalogMismatch, kModule, "feature names do not match matrix width");
  }
  if (model_labels.size() != n || arch_labels.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, kModule, "label columns do not match matrix height");
  }
}

std::string feature_matrix_to_csv(const FeatureMatrix& matrix) {
  matrix.check();
  std::string out;
  for (const auto& name : matrix.feature_names) out += name + ",";
  out += "battery_model,architecture,cell_id\n";
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      out += format_double(matrix.values(r, c));
      out += ',';
    }
    const auto i = static_cast<std::size_t>(r);
    out += matrix.model_names[static_cast<std::size_t>(matrix.model_labels[i])] + "," +
           matrix.arch_names[static_cast<std::size_t>(matrix.arch_labels[i])] + "," +
           (matrix.meta.empty() ? std::string() : matrix.meta[i].cell_id) + "\n";
  }
  return out;
}

FeatureMatrix feature_matrix_from_csv(std::string_view text) {
  detail::CsvTable table(text, kModule);
  const auto model_col = table.require_column("battery_model");
  const auto arch_col = table.require_column("architecture");
  const auto cell_col = table.require_column("cell_id");
  if (model_col != cell_col - 2 || arch_col != cell_col - 1) {
    throw Error(ErrorCode::BadCsv, kModule, "label columns must trail the feature columns");
  }
  FeatureMatrix m;
  m.catalog_version = kCatalogVersion;
  m.feature_names.assign(table.header().begin(), table.header().begin() + static_cast<std::ptrdiff_t>(model_col));
  m.values.resize(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(model_col));
  std::vector<std::string> models, archs;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (std::size_t c = 0; c < model_col; ++c) {
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = table.number(r, c);
    }
    models.emplace_back(table.cell(r, model_col));
    archs.emplace_back(table.cell(r, arch_col));
    SampleMeta meta;
    meta.battery_model = models.back();
    meta.architecture = archs.back();
    meta.cell_id = std::string(table.cell(r, cell_col));
    m.meta.push_back(std::move(meta));
  }
  assign_label_ids(models, m.model_labels, m.model_names);
  assign_label_ids(archs, m.arch_labels, m.arch_names);
  m.imputed_counts.assign(table.rows(), 0);
  return m;
}

// Layout: "BAFM", u64 rows, u64 cols, rows*cols f64 row-major, rows*(i32 model, i32 arch).
// Host byte order, which is little-endian on every supported target.
std::string feature_matrix_to_binary(const FeatureMatrix& matrix) {
  matrix.check();
  std::string out = "BAFM";
  put_u64(out, static_cast<std::uint64_t>(matrix.rows()));
  put_u64(out, static_cast<std::uint64_t>(matrix.cols()));
  out.append(reinterpret_cast<const char*>(matrix.values.data()),
             static_cast<std::size_t>(matrix.values.size()) * sizeof(double));
  for (std::size_t r = 0; r < matrix.model_labels.size(); ++r) {
    const std::int32_t ids[2] = {matrix.model_labels[r], matrix.arch_labels[r]};
    out.append(reinterpret_cast<const char*>(ids), sizeof ids);
  }
  return out;
}

std::string feature_matrix_sidecar(const FeatureMatrix& matrix) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["catalog_version"] = matrix.catalog_version;
  j["rows"] = matrix.rows();
  j["cols"] = matrix.cols();
  j["feature_names"] = matrix.feature_names;
  j["model_names"] = matrix.model_names;
  j["arch_names"] = matrix.arch_names;
  j["imputed_counts"] = matrix.imputed_counts;
  std::vector<std::string> cells;
  for (const auto& m : matrix.meta) cells.push_back(m.cell_id);
  j["cell_ids"] = cells;
  return j.dump(2);
}

FeatureMatrix feature_matrix_from_binary(std::string_view binary, std::string_view sidecar_json) {
  const auto j = nlohmann::json::parse(sidecar_json);
  if (j.value("format_version", 0) != 1) {
    throw Error(ErrorCode::FormatVersionMismatch, kModule, "unsupported feature matrix format_version");
  }
  if (binary.substr(0, 4) != "BAFM") throw Error(ErrorCode::BadCsv, kModule, "bad feature matrix magic");
  binary.remove_prefix(4);
  const auto rows = take<std::uint64_t>(binary);
  const auto cols = take<std::uint64_t>(binary);
  FeatureMatrix m;
  m.catalog_version = j.at("catalog_version").get<std::string>();
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.model_names = j.at("model_names").get<std::vector<std::string>>();
  m.arch_names = j.at("arch_names").get<std::vector<std::string>>();
  m.imputed_counts = j.at("imputed_counts").get<std::vector<std::size_t>>();
  m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const std::size_t bytes = rows * cols * sizeof(double);
  if (binary.size() < bytes) throw Error(ErrorCode::BadCsv, kModule, "truncated feature matrix binary");
  std::memcpy(m.values.data(), binary.data(), bytes);
  binary.remove_prefix(bytes);
  for (std::uint64_t r = 0; r < rows; ++r) {
    m.model_labels.push_back(take<std::int32_t>(binary));
    m.arch_labels.push_back(take<std::int32_t>(binary));
  }
  const auto cells = j.value("cell_ids", std::vector<std::string>{});
  for (std::uint64_t r = 0; r < rows; ++r) {
    SampleMeta meta;
    meta.battery_model = m.model_names.at(static_cast<std::size_t>(m.model_labels[r]));
    meta.architecture = m.arch_names.at(static_cast<std::size_t>(m.arch_labels[r]));
    if (r < cells.size()) meta.cell_id = cells[r];
    m.meta.push_back(std::move(meta));
  }
  m.check();
  return m;
}

std::size_t SelectionMask::kept() const { return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true)); }

double mann_whitney_p(const Vector& values, const std::vector<bool>& in_group) {
  const auto n = static_cast<std::size_t>(values.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[static_cast<Eigen::Index>(a)] < values[static_cast<Eigen::Index>(b)]; });

  double rank_sum = 0.0;
  double tie_term = 0.0;
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && values[static_cast<Eigen::Index>(order[j])] == values[static_cast<Eigen::Index>(order[i])]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k) {
      if (in_group[order[k]]) {
        rank_sum += mid_rank;
        ++n1;
      }
    }
    i = j;
  }
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n - n1);
  if (n1 == 0 || n1 == n) return 1.0;
  const double total = a + b;
  const double u = rank_sum - a * (a + 1.0) / 2.0;
  const double mean = a * b / 2.0;
  const double var = a * b / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
  if (!(var > 0.0)) return 1.0;
  const double z = std::max(0.0, std::abs(u - mean) - 0.5) / std::sqrt(var);
  return std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
}

std::vector<bool> benjamini_yekutieli(const Vector& p_values, double level) {
  const auto m = static_cast<std::size_t>(p_values.size());
  std::vector<bool> rejected(m, false);
  if (m == 0) return rejected;
  double harmonic = 0.0;
  for (std::size_t i = 1; i <= m; ++i) harmonic += 1.0 / static_cast<double>(i);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return p_values[static_cast<Eigen::Index>(a)] < p_values[static_cast<Eigen::Index>(b)];
  });
  std::size_t cutoff = 0;
  for (std::size_t k = 1; k <= m; ++k) {
    const double threshold = static_cast<double>(k) * level / (static_cast<double>(m) * harmonic);
    if (p_values[static_cast<Eigen::Index>(order[k - 1])] <= threshold) cutoff = k;
  }
  for (std::size_t k = 0; k < cutoff; ++k) rejected[order[k]] = true;
  return rejected;
}

SelectionMask select_features(const Matrix& x, const Labels& y, double fdr) {
  if (!(fdr > 0.0 && fdr < 1.0)) throw Error(ErrorCode::BadArgument, kModule, "fdr level must lie in (0, 1)");
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw Error(ErrorCode::DimensionMismatch, kModule, "label count does not match matrix rows");
  }
  std::vector<int> classes(y.begin(), y.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw Error(ErrorCode::SingleClass, kModule, "feature selection needs at least 2 classes");
  for (int c : classes) {
    if (std::count(y.begin(), y.end(), c) < 5) {
      throw Error(ErrorCode::TooFewSamples, kModule, "class " + std::to_string(c) + " has fewer than 5 samples");
    }
  }

  const Eigen::Index d = x.cols();
  SelectionMask mask;
  mask.fdr_level = fdr;
  mask.keep.assign(static_cast<std::size_t>(d), false);
  mask.p_values = Vector::Ones(d);

  // Binary targets need one test; multiclass targets test each class against the rest.
  const std::size_t tests = classes.size() == 2 ? 1 : classes.size();
  std::vector<std::vector<bool>> groups;
  for (std::size_t t = 0; t < tests; ++t) {
    std::vector<bool> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] == classes[t];
    groups.push_back(std::move(g));
  }

  std::vector<Eigen::Index> tested;
  for (Eigen::Index f = 0; f < d; ++f) {
    const Vector column = x.col(f);
    if (column.minCoeff() == column.maxCoeff()) continue;
    double p = 1.0;
    for (const auto& g : groups) p = std::min(p, mann_whitney_p(column, g));
    mask.p_values[f] = std::min(1.0, p * static_cast<double>(tests));
    tested.push_back(f);
  }

  Vector tested_p(static_cast<Eigen::Index>(tested.size()));
  for (std::size_t i = 0; i < tested.size(); ++i) tested_p[static_cast<Eigen::Index>(i)] = mask.p_values[tested[i]];
  const auto rejected = benjamini_yekutieli(tested_p, fdr);
  for (std::size_t i = 0; i < tested.size(); ++i) {
    if (rejected[i]) mask.keep[static_cast<std::size_t>(tested[i])] = true;
  }
  if (mask.kept() == 0) {
    Eigen::Index best = tested.empty() ? 0 : tested.front();
    for (auto f : tested) {
      if (mask.p_values[f] < mask.p_values[best]) best = f;
    }
    mask.keep[static_cast<std::size_t>(best)] = true;
  }
  return mask;
}

}  // namespace batauth
