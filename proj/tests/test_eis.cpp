#include "support.hpp"

#include <batauth/eis.hpp>
#include <batauth/synth.hpp>

#include <cmath>

using namespace batauth;
using batauth::test::error_of;
using batauth::test::vec;

namespace {

EisSpectrum spectrum(const Vector& f, const Vector& re, const Vector& im) { return EisSpectrum{f, re, im, test::meta()}; }

}  // namespace

TEST_SUITE("eis-pipeline") {
  TEST_CASE("constant impedance gives constant channels") {
    const Vector f = vec({1, 10, 100, 1000});
    const NyquistChannels c = resample_logfreq(spectrum(f, Vector::Constant(4, 0.1), Vector::Constant(4, -0.02)), 16);
    CHECK(c.re_z.size() == 16);
    CHECK((c.re_z.array() - 0.1).abs().maxCoeff() < 1e-15);
    CHECK((c.neg_im_z.array() - 0.02).abs().maxCoeff() < 1e-15);
    CHECK(c.log_freq_grid[0] == 0.0);
    CHECK(c.log_freq_grid[15] == doctest::Approx(3.0));
  }

  TEST_CASE("two-point sweep midpoint is the mean in log frequency") {
    const NyquistChannels c = resample_logfreq(spectrum(vec({1, 100}), vec({0.1, 0.3}), vec({-0.01, -0.05})), 3);
    CHECK(c.log_freq_grid[1] == doctest::Approx(1.0));
    CHECK(c.re_z[1] == doctest::Approx(0.2));
    CHECK(c.neg_im_z[1] == doctest::Approx(0.03));
    CHECK(error_of([] { resample_logfreq(spectrum(vec({5}), vec({0.1}), vec({0})), 3); }) ==
          ErrorCode::DegenerateFrequencyRange);
  }

  TEST_CASE("grid nodes reproduce samples") {
    const Vector f = vec({1, 10, 100});
    const Vector re = vec({0.5, 0.2, 0.1});
    const NyquistChannels c = resample_logfreq(spectrum(f, re, -re), 3);
    CHECK((c.re_z - re).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("Randles sweep stays capacitive and row order does not matter") {
    SyntheticCellSpec spec = demo_specs(0.0).front();
    const EisSpectrum s = gen_eis(spec, 50, 25, 40, 1);
    EisParseOptions opts;
    const NyquistChannels sorted = process_spectrum(s);
    CHECK(sorted.neg_im_z.minCoeff() >= -1e-9);

    EisSpectrum shuffled = s;
    const Eigen::Index n = s.frequency.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index j = n - 1 - i;
      shuffled.frequency[i] = s.frequency[j];
      shuffled.z_real[i] = s.z_real[j];
      shuffled.z_imag[i] = s.z_imag[j];
    }
    const NyquistChannels again = process_spectrum(shuffled);
    CHECK(again.re_z == sorted.re_z);
    CHECK(again.neg_im_z == sorted.neg_im_z);

    EisSpectrum bad = s;
    bad.z_real[3] = std::nan("");
    CHECK(error_of([&] { process_spectrum(bad); }) == ErrorCode::NonFiniteValue);
    EisSpectrum dup = s;
    dup.frequency[1] = dup.frequency[0];
    CHECK(error_of([&] { process_spectrum(dup); }) == ErrorCode::DuplicateFrequency);
  }

  TEST_CASE("linear interpolation helper") {
    CHECK(interpolate_linear(vec({0, 1, 2}), vec({0, 10, 0}), vec({0.5, 1.5, 2.0})) == vec({5, 5, 0}));
  }
}
