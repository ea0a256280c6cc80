#include "support.hpp"

#include <batauth/dca.hpp>
#include <batauth/eis.hpp>
#include <batauth/synth.hpp>

#include <cmath>
#include <numbers>

using namespace batauth;
using batauth::test::error_of;

namespace {

SyntheticCellSpec one_peak(double amplitude = 2.0) {
  SyntheticCellSpec s;
  s.name = "P";
  s.architecture = "NMC";
  s.v_lo = 3.0;
  s.v_hi = 4.2;
  s.dca_peaks = {{3.7, amplitude, 0.05}};
  s.randles = {0.02, 0.05, 1.0, 0.0};
  return s;
}

Eigen::Index argmax_near(const DcaSeries& s, double voltage, double reach) {
  Eigen::Index best = -1;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (std::abs(s.grid_voltage[i] - voltage) > reach) continue;
    if (best < 0 || s.dqdv[i] > s.dqdv[best]) best = i;
  }
  return best;
}

}  // namespace

TEST_SUITE("synth-lab") {
  TEST_CASE("single noiseless peak integrates to the Gaussian area") {
    const SyntheticCellSpec spec = one_peak();
    const CycleRecord c = gen_cycle(spec, 100, 2000, 1);
    CHECK(c.capacity[0] == 0.0);
    for (Eigen::Index i = 1; i < c.capacity.size(); ++i) CHECK(c.capacity[i] >= c.capacity[i - 1]);
    const double s = 0.05, mu = 3.7;
    const double area = 2.0 * s * std::sqrt(2.0 * std::numbers::pi) / 2.0 *
                        (std::erf((4.2 - mu) / (s * std::numbers::sqrt2)) - std::erf((3.0 - mu) / (s * std::numbers::sqrt2)));
    CHECK(std::abs(c.capacity[c.capacity.size() - 1] - area) < 1e-3 * area);
  }

  TEST_CASE("zero-amplitude peaks leave the baseline ramp") {
    SyntheticCellSpec spec = one_peak(0.0);
    spec.baseline = 0.5;
    const CycleRecord c = gen_cycle(spec, 100, 200, 1);
    for (Eigen::Index i = 0; i < c.size(); ++i) CHECK(c.capacity[i] == doctest::Approx(0.5 * (c.voltage[i] - 3.0)));
  }

  TEST_CASE("pipeline recovers peak locations and ordering") {
    SyntheticCellSpec spec = one_peak();
    spec.dca_peaks = {{3.4, 1.0, 0.03}, {3.9, 2.5, 0.04}};
    const DcaSeries s = process_cycle(gen_cycle(spec, 100, 1000, 1));
    const double cell = s.grid_voltage[1] - s.grid_voltage[0];
    const Eigen::Index a = argmax_near(s, 3.4, 0.1);
    const Eigen::Index b = argmax_near(s, 3.9, 0.1);
    CHECK(std::abs(s.grid_voltage[a] - 3.4) <= 2 * cell);
    CHECK(std::abs(s.grid_voltage[b] - 3.9) <= 2 * cell);
    CHECK(s.dqdv[b] > s.dqdv[a]);
  }

  TEST_CASE("aging shifts the recovered peak") {
    SyntheticCellSpec spec = one_peak();
    spec.soh_drift = {0.001, 0.0};
    const DcaSeries fresh = process_cycle(gen_cycle(spec, 100, 1000, 1));
    const DcaSeries aged = process_cycle(gen_cycle(spec, 80, 1000, 1));
    const double cell = fresh.grid_voltage[1] - fresh.grid_voltage[0];
    const double shift = aged.grid_voltage[argmax_near(aged, 3.72, 0.1)] - fresh.grid_voltage[argmax_near(fresh, 3.7, 0.1)];
    CHECK(std::abs(shift - 0.020) <= 2 * cell);
  }

  TEST_CASE("Randles circuit values") {
    const RandlesParams p{0.02, 0.05, 1.0, 0.0};
    const auto apex = randles_impedance(p, 1.0 / (p.rct * p.cdl));
    CHECK(apex.real() == doctest::Approx(0.045).epsilon(1e-14));
    CHECK(apex.imag() == doctest::Approx(-0.025).epsilon(1e-14));
    const auto high = randles_impedance(p, 2.0 * std::numbers::pi * 1e4);
    CHECK(std::abs(high.real() - p.r0) < 0.01 * p.r0);
    CHECK(std::abs(high.imag()) < 1e-3);
    CHECK(condition_randles(p, 50, 25) == p);
  }

  TEST_CASE("noiseless sweep traces a semicircle") {
    SyntheticCellSpec spec = one_peak();
    const EisSpectrum s = gen_eis(spec, 50, 25, 2000, 1);
    CHECK(s.frequency[0] == doctest::Approx(kEisMinFrequency));
    CHECK(s.frequency[s.frequency.size() - 1] == doctest::Approx(kEisMaxFrequency));
    CHECK((-s.z_imag).maxCoeff() == doctest::Approx(spec.randles.rct / 2).epsilon(0.02));
    CHECK(s.z_real[s.z_real.size() - 1] == doctest::Approx(spec.randles.r0).epsilon(0.01));
  }

  TEST_CASE("generators are pure functions of the seed") {
    SyntheticCellSpec spec = one_peak();
    spec.noise_std = 0.02;
    CHECK(gen_eis(spec, 40, 20, 30, 5) == gen_eis(spec, 40, 20, 30, 5));
    CHECK(gen_cycle(spec, 90, 128, 5) == gen_cycle(spec, 90, 128, 5));
    CHECK_FALSE(gen_cycle(spec, 90, 128, 5) == gen_cycle(spec, 90, 128, 6));
    spec.noise_std = 0.0;
    CHECK(gen_eis(spec, 40, 20, 30, 5) == gen_eis(spec, 40, 20, 30, 6));
  }

  TEST_CASE("dataset layout") {
    const auto specs = demo_specs();
    const DatasetCatalog d = gen_dataset(specs, 10, 20, 3, CycleDatasetOptions{64});
    CHECK(d.cycles.size() == 1000);
    CHECK(d.model_labels.size() == 5);
    CHECK(d.arch_labels.size() == 3);
    CHECK(*d.cycles.front().meta.soh_percent == 100.0);
    CHECK(*d.cycles[19].meta.soh_percent == doctest::Approx(80.0));
    const DatasetCatalog again = gen_dataset(specs, 10, 20, 3, CycleDatasetOptions{64});
    CHECK(write_cycle_csv(again.cycles) == write_cycle_csv(d.cycles));

    const DatasetCatalog sweeps = gen_eis_dataset(specs, 4, 3);
    CHECK(sweeps.spectra.size() == 20);
    for (const auto& s : sweeps.spectra) {
      CHECK(*s.meta.soc_percent >= 20.0);
      CHECK(*s.meta.temperature_c <= 35.0);
    }
  }

  TEST_CASE("spec validation and JSON") {
    SyntheticCellSpec bad = one_peak();
    bad.v_lo = 4.5;
    CHECK(error_of([&] { validate(bad); }) == ErrorCode::BadSpec);
    bad = one_peak();
    bad.randles.rct = -1.0;
    CHECK(error_of([&] { validate(bad); }) == ErrorCode::BadSpec);
    bad = one_peak();
    bad.dca_peaks[0].mean_voltage = 5.0;
    CHECK(error_of([&] { validate(bad); }) == ErrorCode::BadSpec);
    CHECK(error_of([] { gen_cycle(one_peak(), 100, 10, 0); }) == ErrorCode::BadSpec);
    CHECK(error_of([] { gen_eis(one_peak(), 50, 25, 4, 0); }) == ErrorCode::BadSpec);

    for (const auto& s : demo_specs()) CHECK(spec_from_json(spec_to_json(s)) == s);
    nlohmann::json j = spec_to_json(one_peak());
    j["colour"] = "red";
    CHECK(error_of([&] { spec_from_json(j); }) == ErrorCode::BadSpec);
    const nlohmann::json wrapped = {{"cells", {spec_to_json(one_peak())}}};
    CHECK(specs_from_json(wrapped).size() == 1);
  }
}
