#include "support.hpp"

#include <batauth/dca.hpp>

#include <cmath>
#include <limits>

using namespace batauth;
using batauth::test::error_of;
using batauth::test::vec;

namespace {

// Weights of the centre point from the least-squares normal equations (A'A) c = A' e_j.
Vector normal_equation_weights(int window, int order) {
  const int half = window / 2;
  Eigen::MatrixXd a(window, order + 1);
  for (int i = 0; i < window; ++i) {
    for (int p = 0; p <= order; ++p) a(i, p) = std::pow(static_cast<double>(i - half), p);
  }
  const Eigen::MatrixXd solve = (a.transpose() * a).ldlt().solve(a.transpose());
  return solve.row(0).transpose();
}

}  // namespace

TEST_SUITE("dca-pipeline") {
  TEST_CASE("raw differential capacity") {
    const DcaSeries s = raw_differential_capacity(test::cycle(vec({3.0, 3.1, 3.2}), vec({0.0, 0.5, 1.0})));
    REQUIRE(s.size() == 2);
    CHECK(s.dqdv[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(s.dqdv[1] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(s.grid_voltage[0] == doctest::Approx(3.05));
    CHECK(s.stage == DcaStage::Raw);

    const DcaSeries flat = raw_differential_capacity(test::cycle(vec({3.0, 3.0}), vec({0.0, 0.1})));
    CHECK(std::isinf(flat.dqdv[0]));
    CHECK(flat.dqdv[0] > 0);
    CHECK(flat.nonfinite_count == 1);

    CHECK(error_of([] { raw_differential_capacity(test::cycle(vec({3.0}), vec({0.0}))); }) == ErrorCode::TooShortCycle);
  }

  TEST_CASE("cleaning drops near-duplicate voltages") {
    const CycleRecord c = test::cycle(vec({3.0, 3.0 + 1e-9, 3.1}), vec({0.0, 0.0, 0.5}));
    const CycleRecord kept = clean_dca(c, 1e-4);
    CHECK(kept.voltage == vec({3.0, 3.1}));
    CHECK(clean_dca(kept, 1e-4) == kept);

    Vector v = Vector::LinSpaced(20, 3.0, 3.19);
    const CycleRecord spaced = test::cycle(v, v);
    CHECK(clean_dca(spaced, 1e-4) == spaced);

    CHECK(error_of([] { clean_dca(test::cycle(vec({3.0, 3.0, 3.0}), vec({0, 0.1, 0.2})), 1e-4); }) ==
          ErrorCode::AllPointsDropped);
  }

  TEST_CASE("Savitzky-Golay weights match the normal equations") {
    const Vector w = savgol_coefficients(5, 2);
    const Vector expected = vec({-3, 12, 17, 12, -3}) / 35.0;
    CHECK((w - expected).cwiseAbs().maxCoeff() < 1e-12);
    for (int window : {7, 11, 51}) {
      for (int order : {1, 2, 3, 4}) {
        CHECK((savgol_coefficients(window, order) - normal_equation_weights(window, order)).cwiseAbs().maxCoeff() <
              1e-10);
      }
    }
  }

  TEST_CASE("Savitzky-Golay reproduces polynomials in the interior") {
    const int n = 200;
    for (int order = 0; order <= 3; ++order) {
      Vector x(n);
      for (int i = 0; i < n; ++i) {
        const double t = i / 10.0;
        x[i] = 1.0 + 0.5 * t + (order >= 2 ? -0.03 * t * t : 0.0) + (order >= 3 ? 0.001 * t * t * t : 0.0);
      }
      const int window = 21;
      const Vector y = savgol_filter(x, window, std::max(order, 3));
      CHECK((y - x).segment(window / 2, n - window + 1).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK(error_of([] { savgol_filter(Vector::Ones(10), 4, 2); }) == ErrorCode::BadWindow);
    CHECK(error_of([] { savgol_filter(Vector::Ones(10), 3, 3); }) == ErrorCode::BadWindow);
  }

  TEST_CASE("uniform resampling") {
    DcaSeries s;
    s.grid_voltage = vec({3.0, 3.1, 3.2});
    s.dqdv = vec({5.0, 5.0, 5.0});
    const DcaSeries r = resample_uniform(s, 4);
    CHECK(r.dqdv == vec({5, 5, 5, 5}));
    CHECK(r.grid_voltage[1] == doctest::Approx(3.0 + 0.2 / 3));
    CHECK(r.stage == DcaStage::Resampled);

    s.dqdv = vec({1.0, 2.0, 3.0});
    const DcaSeries lin = resample_uniform(s, 5);
    for (Eigen::Index i = 0; i < 5; ++i) {
      CHECK(lin.dqdv[i] == doctest::Approx(1.0 + 10.0 * (lin.grid_voltage[i] - 3.0)).epsilon(1e-12));
    }
    // Unsorted input with a duplicate voltage: the duplicate is averaged.
    s.grid_voltage = vec({3.2, 3.0, 3.1, 3.1});
    s.dqdv = vec({3.0, 1.0, 1.0, 3.0});
    CHECK(resample_uniform(s, 3).dqdv == vec({1.0, 2.0, 3.0}));

    s.grid_voltage = vec({3.1, 3.1});
    s.dqdv = vec({1.0, 2.0});
    CHECK(error_of([&] { resample_uniform(s, 4); }) == ErrorCode::DegenerateVoltageRange);
  }

  TEST_CASE("linear Q(V) yields constant dQ/dV") {
    const Vector v = Vector::LinSpaced(400, 3.0, 4.0);
    const Vector q = 2.5 * (v.array() - 3.0).matrix();
    const DcaSeries s = process_cycle(test::cycle(v, q));
    CHECK(s.size() == 512);
    const double mean = s.dqdv.mean();
    const double sd = std::sqrt((s.dqdv.array() - mean).square().mean());
    CHECK(mean == doctest::Approx(2.5).epsilon(1e-9));
    CHECK(sd < 1e-6 * mean);
    CHECK(s.dqdv.allFinite());
    const double step = s.grid_voltage[1] - s.grid_voltage[0];
    CHECK(((s.grid_voltage.tail(511) - s.grid_voltage.head(511)).array() - step).abs().maxCoeff() < 1e-12 * 4.0);
  }

  TEST_CASE("savgol window clamps to short series") {
    const Vector v = Vector::LinSpaced(20, 3.0, 3.5);
    DcaConfig config;
    const DcaSeries s = process_cycle(test::cycle(v, v), config);
    CHECK(s.dqdv.allFinite());
    CHECK(error_of([] { process_cycle(test::cycle(Vector::Constant(20, 3.0), Vector::LinSpaced(20, 0, 1))); })
              .has_value());
    DcaConfig even;
    even.savgol_window = 10;
    CHECK(error_of([&] { validate(even); }) == ErrorCode::BadWindow);
  }

  TEST_CASE("series CSV export") {
    DcaSeries s;
    s.grid_voltage = vec({3.0, 3.5});
    s.dqdv = vec({1.0, 2.0});
    CHECK(dca_series_to_csv(s) == "grid_voltage,dqdv\n3,1\n3.5,2\n");
  }
}
