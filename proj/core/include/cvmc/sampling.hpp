#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Core>

#include "cvmc/domain.hpp"

namespace cvmc {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// SplitMix64 finalizer. Used to derive independent replication streams from a
// base seed: stream(r) = seed ^ splitmix64(r).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// n i.i.d. uniform draws on a domain, stored one point per row.
struct SamplePoints {
  Domain domain;
  RowMatrix points;  // n x d
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(points.cols()); }
  std::span<const double> row(std::size_t i) const noexcept {
    return {points.data() + i * dim(), dim()};
  }
};

// Bit-reproducible for a given (domain, n, seed) on every platform: the
// mt19937_64 sequence is fixed by the standard and the conversion to [0, 1)
// uses the top 53 bits directly rather than a library distribution.
SamplePoints draw_samples(const Domain& domain, std::size_t n, std::uint64_t seed);

// Wraps user-supplied points (e.g. fixed test designs). Throws InvalidArgument
// when a coordinate falls outside the domain.
SamplePoints make_samples(const Domain& domain, RowMatrix points);

}  // namespace cvmc
