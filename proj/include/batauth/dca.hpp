#pragma once

#include <batauth/core_data.hpp>
#include <batauth/types.hpp>

#include <string>

namespace batauth {

enum class DcaStage { Raw, Cleaned, Smoothed, Resampled };

std::string_view to_string(DcaStage stage) noexcept;

/// Differential capacity dQ/dV (Ah/V) paired with voltage.
struct DcaSeries {
  Vector grid_voltage;
  Vector dqdv;
  DcaStage stage = DcaStage::Raw;
  SampleMeta meta;
  /// Number of non-finite entries (only possible at stage Raw).
  std::size_t nonfinite_count = 0;

  Eigen::Index size() const noexcept { return dqdv.size(); }
};

struct DcaConfig {
  double eps_volts = 1e-4;
  /// Clamped to the largest odd value not above the series length.
  int savgol_window = 51;
  int savgol_polyorder = 3;
  int resample_n = 512;
};

/// Forward differences (Q[i+1]-Q[i]) / (V[i+1]-V[i]) paired with the voltage
/// midpoint. Zero voltage steps produce +/-inf and are counted.
DcaSeries raw_differential_capacity(const CycleRecord& cycle);

/// Drops every sample whose voltage is within `eps_volts` of the last kept
/// sample. The first sample is always kept.
CycleRecord clean_dca(const CycleRecord& cycle, double eps_volts);

/// Least-squares smoothing weights for the centre point of a window, ordered
/// from the leftmost sample.
Vector savgol_coefficients(int window, int polyorder);

/// Savitzky-Golay smoothing with mirror padding (x[-k] = x[k]) at the edges.
Vector savgol_filter(const Vector& values, int window, int polyorder);
DcaSeries savgol_smooth(const DcaSeries& series, int window, int polyorder);

/// Sorts by voltage, averages duplicate voltages and linearly interpolates
/// onto `n` uniformly spaced voltages spanning the series.
DcaSeries resample_uniform(const DcaSeries& series, int n);

/// clean -> differentiate -> smooth -> resample.
DcaSeries process_cycle(const CycleRecord& cycle, const DcaConfig& config = {});

void validate(const DcaConfig& config);

/// grid_voltage,dqdv
std::string dca_series_to_csv(const DcaSeries& series);

}  // namespace batauth
