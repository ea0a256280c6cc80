#pragma once

#include <batauth/core_data.hpp>
#include <batauth/types.hpp>

#include <json.hpp>

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace batauth {

/// One Gaussian bump of dQ/dV.
struct DcaPeak {
  double mean_voltage = 0.0;  // V
  double amplitude = 0.0;     // Ah/V
  double width = 0.0;         // V, Gaussian standard deviation
  bool operator==(const DcaPeak&) const = default;
};

/// Randles cell with a Warburg element.
struct RandlesParams {
  double r0 = 0.0;             // ohm
  double rct = 0.0;            // ohm
  double cdl = 0.0;            // farad
  double warburg_sigma = 0.0;  // ohm s^-1/2
  bool operator==(const RandlesParams&) const = default;
};

/// Aging response: peaks move by shift_per_percent volts and lose
/// fade_per_percent of their amplitude for every percent of SOH lost.
struct SohDrift {
  double shift_per_percent = 0.0;
  double fade_per_percent = 0.0;
  bool operator==(const SohDrift&) const = default;
};

struct SyntheticCellSpec {
  std::string name;          // battery model label
  std::string architecture;  // chemistry label
  std::vector<DcaPeak> dca_peaks;
  double v_lo = 3.0;
  double v_hi = 4.2;
  double baseline = 0.0;  // Ah/V added everywhere
  RandlesParams randles;
  double noise_std = 0.0;  // relative
  SohDrift soh_drift;
  bool operator==(const SyntheticCellSpec&) const = default;
};

void validate(const SyntheticCellSpec& spec);

nlohmann::json spec_to_json(const SyntheticCellSpec& spec);
SyntheticCellSpec spec_from_json(const nlohmann::json& j);
/// Accepts a JSON array of specs or an object {"cells": [...]}.
std::vector<SyntheticCellSpec> specs_from_json(const nlohmann::json& j);

/// Noiseless dQ/dV of the spec at a given SOH.
double synthetic_dqdv(const SyntheticCellSpec& spec, double soh_percent, double voltage);

/// Charge cycle on a uniform voltage grid over [v_lo, v_hi]. Capacity is the
/// cumulative trapezoid integral of dQ/dV starting at 0; each capacity
/// increment is scaled by (1 + noise_std * N(0,1)), clipped at 0.
CycleRecord gen_cycle(const SyntheticCellSpec& spec, double soh_percent, int n_points, std::uint64_t seed);

/// Circuit parameters at a given SOC and temperature. Affine maps, identity at
/// SOC 50 % and 25 degC:
///   r0  * (1 + 0.005 (25 - T))
///   rct * (1 + 0.02 (25 - T)) * (1 + 0.004 (50 - SOC))
///   sigma * (1 + 0.006 (50 - SOC)) * (1 + 0.01 (25 - T))
///   cdl unchanged
RandlesParams condition_randles(const RandlesParams& base, double soc_percent, double temperature_c);

/// Z(w) = R0 + Rct / (1 + j w Rct Cdl) + sigma (1 - j) / sqrt(w).
std::complex<double> randles_impedance(const RandlesParams& p, double omega);

inline constexpr double kEisMinFrequency = 0.01;
inline constexpr double kEisMaxFrequency = 1e4;

/// Sweep over a log grid 0.01 Hz to 10 kHz. Both parts get relative noise.
EisSpectrum gen_eis(const SyntheticCellSpec& spec, double soc_percent, double temperature_c, int n_freq,
                    std::uint64_t seed);

struct CycleDatasetOptions {
  int n_points = 1000;
};

/// cells_per_spec cells per spec, cycles_per_cell charge cycles each, SOH
/// going linearly from 100 % to 80 % over a cell's cycles.
DatasetCatalog gen_dataset(const std::vector<SyntheticCellSpec>& specs, int cells_per_spec, int cycles_per_cell,
                           std::uint64_t seed, const CycleDatasetOptions& options = {});

struct EisDatasetOptions {
  int n_freq = 60;
  double soc_lo = 20.0;
  double soc_hi = 80.0;
  double temperature_lo = 15.0;
  double temperature_hi = 35.0;
};

/// sweeps_per_spec sweeps per spec at SOC and temperature drawn uniformly
/// from the configured ranges.
DatasetCatalog gen_eis_dataset(const std::vector<SyntheticCellSpec>& specs, int sweeps_per_spec, std::uint64_t seed,
                               const EisDatasetOptions& options = {});

/// Five demo cells over three chemistries (LFP, NMC, LCO).
std::vector<SyntheticCellSpec> demo_specs(double noise_std = 0.02);

}  // namespace batauth
