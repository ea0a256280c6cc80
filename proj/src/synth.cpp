#include <batauth/error.hpp>
#include <batauth/synth.hpp>

#include <cmath>
#include <numbers>
#include <random>

namespace batauth {

namespace {

constexpr std::string_view kModule = "synth-lab";

using json = nlohmann::json;

[[noreturn]] void bad(const std::string& message) { throw Error(ErrorCode::BadSpec, kModule, message); }

double number(const json& j, std::string_view key) {
  if (!j.is_number()) bad(std::string(key) + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(std::string(key) + " must be finite");
  return v;
}

template <typename Fn>
void for_each_key(const json& j, std::string_view what, Fn&& apply) {
  if (!j.is_object()) bad(std::string(what) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!apply(it.key(), it.value())) bad("unknown key '" + it.key() + "' in " + std::string(what));
  }
}

}  // namespace

void validate(const SyntheticCellSpec& spec) {
  if (spec.name.empty()) bad("name must be non-empty");
  if (spec.architecture.empty()) bad(spec.name + ": architecture must be non-empty");
  if (!(spec.v_lo < spec.v_hi)) bad(spec.name + ": voltage_window needs v_lo < v_hi");
  for (const auto& p : spec.dca_peaks) {
    if (!(p.width > 0.0)) bad(spec.name + ": peak width must be > 0");
    if (!(p.amplitude >= 0.0)) bad(spec.name + ": peak amplitude must be >= 0");
    if (p.mean_voltage < spec.v_lo || p.mean_voltage > spec.v_hi) {
      bad(spec.name + ": peak at " + format_double(p.mean_voltage) + " V lies outside the voltage window");
    }
  }
  const auto& r = spec.randles;
  if (!(r.r0 >= 0.0 && r.rct >= 0.0 && r.cdl >= 0.0 && r.warburg_sigma >= 0.0)) {
    bad(spec.name + ": circuit parameters must be >= 0");
  }
  if (!(spec.baseline >= 0.0)) bad(spec.name + ": baseline must be >= 0");
  if (!(spec.noise_std >= 0.0)) bad(spec.name + ": noise_std must be >= 0");
  if (!std::isfinite(spec.soh_drift.shift_per_percent) || !(spec.soh_drift.fade_per_percent >= 0.0) ||
      spec.soh_drift.fade_per_percent * 100.0 > 1.0) {
    bad(spec.name + ": soh_drift fade_per_percent must lie in [0, 0.01]");
  }
}

json spec_to_json(const SyntheticCellSpec& spec) {
  json peaks = json::array();
  for (const auto& p : spec.dca_peaks) {
    peaks.push_back({{"mean_voltage", p.mean_voltage}, {"amplitude", p.amplitude}, {"width", p.width}});
  }
  return {{"name", spec.name},
          {"architecture", spec.architecture},
          {"dca_peaks", std::move(peaks)},
          {"voltage_window", {spec.v_lo, spec.v_hi}},
          {"baseline", spec.baseline},
          {"randles",
           {{"r0", spec.randles.r0},
            {"rct", spec.randles.rct},
            {"cdl", spec.randles.cdl},
            {"warburg_sigma", spec.randles.warburg_sigma}}},
          {"noise_std", spec.noise_std},
          {"soh_drift",
           {{"shift_per_percent", spec.soh_drift.shift_per_percent},
            {"fade_per_percent", spec.soh_drift.fade_per_percent}}}};
}

SyntheticCellSpec spec_from_json(const json& j) {
  SyntheticCellSpec spec;
  bool has_name = false, has_arch = false;
  for_each_key(j, "cell spec", [&](const std::string& k, const json& v) {
    if (k == "name" || k == "architecture") {
      if (!v.is_string()) bad(k + " must be a string");
      (k == "name" ? spec.name : spec.architecture) = v.get<std::string>();
      (k == "name" ? has_name : has_arch) = true;
    } else if (k == "dca_peaks") {
      if (!v.is_array()) bad("dca_peaks must be an array");
      for (const auto& p : v) {
        DcaPeak peak;
        for_each_key(p, "dca peak", [&](const std::string& pk, const json& pv) {
          if (pk == "mean_voltage") peak.mean_voltage = number(pv, pk);
          else if (pk == "amplitude") peak.amplitude = number(pv, pk);
          else if (pk == "width") peak.width = number(pv, pk);
          else return false;
          return true;
        });
        spec.dca_peaks.push_back(peak);
      }
    } else if (k == "voltage_window") {
      if (!v.is_array() || v.size() != 2) bad("voltage_window must be [v_lo, v_hi]");
      spec.v_lo = number(v[0], "v_lo");
      spec.v_hi = number(v[1], "v_hi");
    } else if (k == "baseline") {
      spec.baseline = number(v, k);
    } else if (k == "randles") {
      for_each_key(v, "randles", [&](const std::string& rk, const json& rv) {
        if (rk == "r0") spec.randles.r0 = number(rv, rk);
        else if (rk == "rct") spec.randles.rct = number(rv, rk);
        else if (rk == "cdl") spec.randles.cdl = number(rv, rk);
        else if (rk == "warburg_sigma") spec.randles.warburg_sigma = number(rv, rk);
        else return false;
        return true;
      });
    } else if (k == "noise_std") {
      spec.noise_std = number(v, k);
    } else if (k == "soh_drift") {
      for_each_key(v, "soh_drift", [&](const std::string& dk, const json& dv) {
        if (dk == "shift_per_percent") spec.soh_drift.shift_per_percent = number(dv, dk);
        else if (dk == "fade_per_percent") spec.soh_drift.fade_per_percent = number(dv, dk);
        else return false;
        return true;
      });
    } else {
      return false;
    }
    return true;
  });
  if (!has_name || !has_arch) bad("cell spec needs name and architecture");
  validate(spec);
  return spec;
}

std::vector<SyntheticCellSpec> specs_from_json(const json& j) {
  const json* list = &j;
  if (j.is_object()) {
    for_each_key(j, "spec file", [](const std::string& k, const json&) { return k == "cells"; });
    if (!j.contains("cells")) bad("spec file needs a 'cells' array");
    list = &j["cells"];
  }
  if (!list->is_array() || list->empty()) bad("spec file must list at least one cell");
  std::vector<SyntheticCellSpec> specs;
  for (const auto& s : *list) specs.push_back(spec_from_json(s));
  return specs;
}

double synthetic_dqdv(const SyntheticCellSpec& spec, double soh_percent, double voltage) {
  const double lost = 100.0 - soh_percent;
  const double shift = spec.soh_drift.shift_per_percent * lost;
  const double fade = 1.0 - spec.soh_drift.fade_per_percent * lost;
  double value = spec.baseline;
  for (const auto& p : spec.dca_peaks) {
    const double z = (voltage - p.mean_voltage - shift) / p.width;
    value += p.amplitude * fade * std::exp(-0.5 * z * z);
  }
  return value;
}

CycleRecord gen_cycle(const SyntheticCellSpec& spec, double soh_percent, int n_points, std::uint64_t seed) {
  validate(spec);
  if (n_points < 64) bad("n_points must be >= 64");
  if (!(soh_percent >= 0.0 && soh_percent <= 100.0)) bad("soh_percent must lie in [0, 100]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  CycleRecord cycle;
  cycle.cycle_kind = CycleKind::Charge;
  cycle.voltage = Vector::LinSpaced(n_points, spec.v_lo, spec.v_hi);
  cycle.voltage[n_points - 1] = spec.v_hi;
  cycle.capacity.resize(n_points);
  cycle.capacity[0] = 0.0;
  double previous = synthetic_dqdv(spec, soh_percent, cycle.voltage[0]);
  for (int i = 1; i < n_points; ++i) {
    const double current = synthetic_dqdv(spec, soh_percent, cycle.voltage[i]);
    double step = 0.5 * (previous + current) * (cycle.voltage[i] - cycle.voltage[i - 1]);
    if (spec.noise_std > 0.0) step *= std::max(0.0, 1.0 + spec.noise_std * noise(rng));
    cycle.capacity[i] = cycle.capacity[i - 1] + step;
    previous = current;
  }
  cycle.meta.dataset_id = "synthetic";
  cycle.meta.cell_id = spec.name;
  cycle.meta.battery_model = spec.name;
  cycle.meta.architecture = spec.architecture;
  cycle.meta.soh_percent = soh_percent;
  return cycle;
}

RandlesParams condition_randles(const RandlesParams& base, double soc_percent, double temperature_c) {
  const double cold = 25.0 - temperature_c;
  const double low_soc = 50.0 - soc_percent;
  RandlesParams p = base;
  p.r0 = base.r0 * (1.0 + 0.005 * cold);
  p.rct = base.rct * (1.0 + 0.02 * cold) * (1.0 + 0.004 * low_soc);
  p.warburg_sigma = base.warburg_sigma * (1.0 + 0.006 * low_soc) * (1.0 + 0.01 * cold);
  return p;
}

std::complex<double> randles_impedance(const RandlesParams& p, double omega) {
  using namespace std::complex_literals;
  std::complex<double> z = p.r0 + p.rct / (1.0 + 1i * omega * p.rct * p.cdl);
  if (p.warburg_sigma > 0.0) z += p.warburg_sigma * (1.0 - 1i) / std::sqrt(omega);
  return z;
}

EisSpectrum gen_eis(const SyntheticCellSpec& spec, double soc_percent, double temperature_c, int n_freq,
                    std::uint64_t seed) {
  validate(spec);
  if (n_freq < 8) bad("n_freq must be >= 8");
  if (!(soc_percent >= 0.0 && soc_percent <= 100.0)) bad("soc_percent must lie in [0, 100]");
  if (!std::isfinite(temperature_c)) bad("temperature_c must be finite");
  const RandlesParams p = condition_randles(spec.randles, soc_percent, temperature_c);
  for (double v : {p.r0, p.rct, p.warburg_sigma}) {
    if (v < 0.0) bad("conditions drive a circuit parameter below zero");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  EisSpectrum s;
  const Vector log_f = Vector::LinSpaced(n_freq, std::log10(kEisMinFrequency), std::log10(kEisMaxFrequency));
  s.frequency.resize(n_freq);
  s.z_real.resize(n_freq);
  s.z_imag.resize(n_freq);
  for (int i = 0; i < n_freq; ++i) {
    const double f = std::pow(10.0, log_f[i]);
    const auto z = randles_impedance(p, 2.0 * std::numbers::pi * f);
    s.frequency[i] = f;
    s.z_real[i] = z.real();
    s.z_imag[i] = z.imag();
    if (spec.noise_std > 0.0) {
      s.z_real[i] *= 1.0 + spec.noise_std * noise(rng);
      s.z_imag[i] *= 1.0 + spec.noise_std * noise(rng);
    }
  }
  s.meta.dataset_id = "synthetic";
  s.meta.cell_id = spec.name;
  s.meta.battery_model = spec.name;
  s.meta.architecture = spec.architecture;
  s.meta.soc_percent = soc_percent;
  s.meta.temperature_c = temperature_c;
  return s;
}

DatasetCatalog gen_dataset(const std::vector<SyntheticCellSpec>& specs, int cells_per_spec, int cycles_per_cell,
                           std::uint64_t seed, const CycleDatasetOptions& options) {
  if (specs.empty()) bad("at least one cell spec is required");
  if (cells_per_spec < 1 || cycles_per_cell < 1) bad("cells_per_spec and cycles_per_cell must be >= 1");
  std::vector<CycleRecord> records;
  records.reserve(specs.size() * static_cast<std::size_t>(cells_per_spec * cycles_per_cell));
  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (int cell = 0; cell < cells_per_spec; ++cell) {
      for (int c = 0; c < cycles_per_cell; ++c) {
        const double soh = cycles_per_cell == 1 ? 100.0 : 100.0 - 20.0 * c / (cycles_per_cell - 1);
        CycleRecord rec = gen_cycle(specs[s], soh, options.n_points,
                                    derive_seed(seed, s, static_cast<std::uint64_t>(cell), static_cast<std::uint64_t>(c)));
        rec.meta.cell_id = specs[s].name + "-" + std::to_string(cell);
        rec.meta.cycle_index = c;
        records.push_back(std::move(rec));
      }
    }
  }
  return build_catalog(std::move(records));
}

DatasetCatalog gen_eis_dataset(const std::vector<SyntheticCellSpec>& specs, int sweeps_per_spec, std::uint64_t seed,
                               const EisDatasetOptions& options) {
  if (specs.empty()) bad("at least one cell spec is required");
  if (sweeps_per_spec < 1) bad("sweeps_per_spec must be >= 1");
  if (!(options.soc_lo <= options.soc_hi) || !(options.temperature_lo <= options.temperature_hi)) {
    bad("condition ranges must be ordered");
  }
  std::vector<EisSpectrum> spectra;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (int i = 0; i < sweeps_per_spec; ++i) {
      const auto sweep_seed = derive_seed(seed, s, static_cast<std::uint64_t>(i));
      std::mt19937_64 rng(derive_seed(sweep_seed, 0));
      std::uniform_real_distribution<double> soc(options.soc_lo, options.soc_hi);
      std::uniform_real_distribution<double> temp(options.temperature_lo, options.temperature_hi);
      const double soc_value = soc(rng);
      const double temp_value = temp(rng);
      EisSpectrum sp = gen_eis(specs[s], soc_value, temp_value, options.n_freq, derive_seed(sweep_seed, 1));
      sp.meta.cycle_index = i;
      spectra.push_back(std::move(sp));
    }
  }
  return build_catalog(std::move(spectra));
}

std::vector<SyntheticCellSpec> demo_specs(double noise_std) {
  const SohDrift drift{0.001, 0.005};
  std::vector<SyntheticCellSpec> specs = {
      {"LFP-A", "LFP", {{3.33, 40.0, 0.012}, {3.43, 25.0, 0.015}}, 3.0, 3.6, 0.5,
       {0.030, 0.060, 1.0, 0.010}, noise_std, drift},
      {"LFP-B", "LFP", {{3.36, 35.0, 0.015}, {3.45, 30.0, 0.012}}, 3.0, 3.6, 0.5,
       {0.034, 0.070, 0.8, 0.012}, noise_std, drift},
      {"NMC-A", "NMC", {{3.60, 6.0, 0.05}, {3.75, 8.0, 0.04}, {4.00, 4.0, 0.05}}, 3.0, 4.2, 0.3,
       {0.020, 0.030, 2.0, 0.006}, noise_std, drift},
      {"NMC-B", "NMC", {{3.65, 7.0, 0.06}, {3.85, 6.0, 0.05}, {4.05, 3.0, 0.04}}, 3.0, 4.2, 0.3,
       {0.022, 0.036, 1.6, 0.007}, noise_std, drift},
      {"LCO-A", "LCO", {{3.90, 10.0, 0.04}, {4.10, 5.0, 0.03}}, 3.0, 4.2, 0.2,
       {0.045, 0.100, 0.5, 0.020}, noise_std, drift},
  };
  return specs;
}

}  // namespace batauth
