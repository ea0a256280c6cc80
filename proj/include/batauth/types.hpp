#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace batauth {

using Scalar = double;

using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
// Row-major so that one sample is one contiguous row.
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Labels = std::vector<int>;
using IndexList = std::vector<std::size_t>;

/// Derives an independent 64-bit stream seed from a base seed and a list of
/// indices (splitmix64 finalizer). Used so that per-tree, per-fold and
/// per-cell randomness does not depend on scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, Rest... rest) noexcept {
  return derive_seed(derive_seed(seed, index), static_cast<std::uint64_t>(rest)...);
}

}  // namespace batauth
