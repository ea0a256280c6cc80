#pragma once

#include <batauth/core_data.hpp>
#include <batauth/error.hpp>
#include <batauth/types.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace batauth {

// ---------------------------------------------------------------------------
// Feature primitives. All take any Eigen vector expression.
// ---------------------------------------------------------------------------

/// Linear-interpolation quantile of the sorted values (position q*(n-1)).
template <typename Derived>
double feature_quantile(const Eigen::MatrixBase<Derived>& x, double q) {
  if (x.size() == 0) throw Error(ErrorCode::EmptySeries, "feature-engine", "quantile of an empty series");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorCode::BadArgument, "feature-engine", "quantile q outside [0, 1]");
  std::vector<double> sorted(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) sorted[static_cast<std::size_t>(i)] = x[i];
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return frac == 0.0 ? sorted[lo] : sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// R(lag) = sum (x_t - mu)(x_{t+lag} - mu) / ((n - lag) var), population moments.
/// Empty when the series has zero variance or the lag does not fit.
template <typename Derived>
std::optional<double> feature_autocorrelation(const Eigen::MatrixBase<Derived>& x, Eigen::Index lag) {
  const Eigen::Index n = x.size();
  if (lag < 0 || lag >= n) return std::nullopt;
  const double mu = x.mean();
  const auto centered = (x.array() - mu).matrix();
  const double var = centered.squaredNorm() / static_cast<double>(n);
  if (!(var > 0.0)) return std::nullopt;
  const double num = centered.head(n - lag).dot(centered.tail(n - lag));
  return num / (static_cast<double>(n - lag) * var);
}

/// Indices whose value is strictly greater than `support` neighbours on each side.
template <typename Derived>
std::size_t feature_number_peaks(const Eigen::MatrixBase<Derived>& x, Eigen::Index support) {
  if (support < 1) throw Error(ErrorCode::BadArgument, "feature-engine", "peak support must be >= 1");
  std::size_t peaks = 0;
  for (Eigen::Index i = support; i + support < x.size(); ++i) {
    bool is_peak = true;
    for (Eigen::Index j = 1; j <= support && is_peak; ++j) {
      is_peak = x[i] > x[i - j] && x[i] > x[i + j];
    }
    peaks += is_peak ? 1 : 0;
  }
  return peaks;
}

/// Count of values in [lo, hi).
template <typename Derived>
std::size_t feature_range_count(const Eigen::MatrixBase<Derived>& x, double lo, double hi) {
  if (!(lo < hi)) throw Error(ErrorCode::BadInterval, "feature-engine", "range_count needs lo < hi");
  return static_cast<std::size_t>((x.array() >= lo && x.array() < hi).count());
}

struct FftCoefficient {
  double abs = 0.0;
  double angle = 0.0;  // radians
};

/// k-th coefficient of the unnormalised DFT, sum_t x_t exp(-2 pi i k t / n).
template <typename Derived>
FftCoefficient feature_fft_coefficient(const Eigen::MatrixBase<Derived>& x, Eigen::Index k) {
  const Eigen::Index n = x.size();
  if (k < 0 || k >= n) {
    throw Error(ErrorCode::IndexOutOfRange, "feature-engine",
                "fft coefficient " + std::to_string(k) + " out of range for length " + std::to_string(n));
  }
  double re = 0.0;
  double im = 0.0;
  // For k > 0 the twiddles sum to zero, so an offset drops out; removing x[0]
  // makes a constant signal give exactly zero.
  const double offset = k == 0 ? 0.0 : x[0];
  for (Eigen::Index t = 0; t < n; ++t) {
    // Reduce k*t modulo n before scaling so large products keep full precision.
    const double phase = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
    re += (x[t] - offset) * std::cos(phase);
    im += (x[t] - offset) * std::sin(phase);
  }
  return {std::hypot(re, im), std::atan2(im, re)};
}

/// Ricker (Mexican hat) wavelet of width w evaluated at offset t.
inline double ricker(double t, double width) {
  const double amplitude = 2.0 / (std::sqrt(3.0 * width) * std::pow(std::numbers::pi, 0.25));
  const double ratio = (t * t) / (width * width);
  return amplitude * (1.0 - ratio) * std::exp(-ratio / 2.0);
}

/// Convolution of x with a Ricker kernel truncated at |t| <= 8w, zero-padded, at `position`.
template <typename Derived>
double feature_cwt_coefficient(const Eigen::MatrixBase<Derived>& x, double width, Eigen::Index position) {
  if (!(width > 0.0)) throw Error(ErrorCode::BadWidth, "feature-engine", "wavelet width must be > 0");
  if (position < 0 || position >= x.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "feature-engine", "cwt position out of range");
  }
  const auto reach = static_cast<Eigen::Index>(std::floor(8.0 * width));
  const Eigen::Index first = std::max<Eigen::Index>(0, position - reach);
  const Eigen::Index last = std::min<Eigen::Index>(x.size() - 1, position + reach);
  double acc = 0.0;
  for (Eigen::Index k = first; k <= last; ++k) acc += x[k] * ricker(static_cast<double>(position - k), width);
  return acc;
}

// ---------------------------------------------------------------------------
// Catalog, extraction, selection.
// ---------------------------------------------------------------------------

enum class FeatureFamily {
  Mean,
  StandardDeviation,
  Variance,
  Skewness,
  Kurtosis,
  Minimum,
  Maximum,
  Median,
  AbsEnergy,
  MeanAbsChange,
  LinearTrendSlope,
  CountAboveMean,
  CountBelowMean,
  Quantile,
  Autocorrelation,
  NumberPeaks,
  RangeCount,
  FftAbs,
  FftAngle,
  CwtCoefficient,
};

struct FeatureEntry {
  std::string name;
  FeatureFamily family = FeatureFamily::Mean;
  int channel = 0;
  /// Family parameters: q, lag, support, bin, k, or (width, position slot).
  double param = 0.0;
  double param2 = 0.0;
};

inline constexpr const char* kCatalogVersion = "batauth-fc-1";
inline constexpr std::size_t kFeaturesPerChannel = 137;
inline constexpr int kRangeCountBins = 8;
inline constexpr int kCwtPositions = 16;

struct FeatureCatalog {
  std::vector<FeatureEntry> entries;
  std::string version;
  int channels = 1;

  std::size_t size() const noexcept { return entries.size(); }
  std::vector<std::string> names() const;
};

/// The fixed catalog: 137 features per channel. With two channels the names
/// carry ch0_/ch1_ prefixes.
FeatureCatalog catalog_default(int channels);

struct FeatureVector {
  Vector values;
  std::string catalog_version;
  std::size_t imputed_count = 0;
};

/// Evaluates every catalog entry in order; non-finite or undefined results
/// are replaced by 0 and counted.
FeatureVector extract_features(const std::vector<Vector>& channels, const FeatureCatalog& catalog);

/// Samples by rows, aligned to one catalog, with both label columns.
struct FeatureMatrix {
  Matrix values;
  std::vector<std::string> feature_names;
  std::string catalog_version;
  Labels model_labels;
  Labels arch_labels;
  std::vector<std::string> model_names;
  std::vector<std::string> arch_names;
  std::vector<SampleMeta> meta;
  std::vector<std::size_t> imputed_counts;

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index cols() const noexcept { return values.cols(); }
  /// Rows in the given order; label names are kept.
  FeatureMatrix subset(const IndexList& rows) const;
  void check() const;
};

std::string feature_matrix_to_csv(const FeatureMatrix& matrix);
FeatureMatrix feature_matrix_from_csv(std::string_view text);
/// Compact little-endian binary plus JSON sidecar (catalog version, names, imputation counts).
std::string feature_matrix_to_binary(const FeatureMatrix& matrix);
std::string feature_matrix_sidecar(const FeatureMatrix& matrix);
FeatureMatrix feature_matrix_from_binary(std::string_view binary, std::string_view sidecar_json);

struct SelectionMask {
  std::vector<bool> keep;
  Vector p_values;
  double fdr_level = 0.05;

  std::size_t kept() const;
};

/// Two-sided Mann-Whitney U p-value (normal approximation with tie and
/// continuity corrections) of `values` split by `in_group`.
double mann_whitney_p(const Vector& values, const std::vector<bool>& in_group);

/// Benjamini-Yekutieli step-up: true for hypotheses rejected at FDR `level`.
std::vector<bool> benjamini_yekutieli(const Vector& p_values, double level);

/// Mann-Whitney relevance test per feature (one-vs-rest with Bonferroni for
/// multiclass targets) followed by Benjamini-Yekutieli at `fdr`.
SelectionMask select_features(const Matrix& x, const Labels& y, double fdr);

}  // namespace batauth
