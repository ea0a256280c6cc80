#pragma once

#include <batauth/core_data.hpp>
#include <batauth/error.hpp>
#include <batauth/types.hpp>

#include <doctest.h>

#include <initializer_list>
#include <random>

namespace batauth::test {

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

inline SampleMeta meta(const std::string& model = "M", const std::string& arch = "LFP") {
  SampleMeta m;
  m.battery_model = model;
  m.architecture = arch;
  m.cell_id = model + "-0";
  return m;
}

inline CycleRecord cycle(const Vector& v, const Vector& q) { return CycleRecord{v, q, CycleKind::Charge, meta()}; }

/// Runs `fn` and reports the ErrorCode it throws, or nothing.
template <typename Fn>
std::optional<ErrorCode> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Two Gaussian blobs in `d` dimensions, `n` rows per class, centres `gap` apart on axis 0.
inline void blobs(int n, int d, double gap, std::uint64_t seed, Matrix& x, Labels& y) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  x.resize(2 * n, d);
  y.assign(static_cast<std::size_t>(2 * n), 0);
  for (int i = 0; i < 2 * n; ++i) {
    const int c = i < n ? 0 : 1;
    y[static_cast<std::size_t>(i)] = c;
    for (int j = 0; j < d; ++j) x(i, j) = noise(rng) + (j == 0 ? gap * c : 0.0);
  }
}

}  // namespace batauth::test
