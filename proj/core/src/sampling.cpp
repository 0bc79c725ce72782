#include "cvmc/sampling.hpp"

#include <random>

#include "cvmc/error.hpp"

namespace cvmc {

SamplePoints draw_samples(const Domain& domain, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "core", "draw_samples needs n >= 1");
  const auto d = domain.dim();
  RowMatrix points(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));

  std::mt19937_64 engine(seed);
  const double lo = domain.lower();
  const double width = domain.width();
  double* out = points.data();
  for (std::size_t k = 0; k < n * d; ++k) {
    const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    out[k] = lo + width * u;
  }
  return SamplePoints{domain, std::move(points), seed};
}

SamplePoints make_samples(const Domain& domain, RowMatrix points) {
  if (static_cast<std::size_t>(points.cols()) != domain.dim()) {
    throw Error(ErrorKind::InvalidArgument, "core", "point dimension does not match domain " + domain.name());
  }
  SamplePoints samples{domain, std::move(points), 0};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!domain.contains(samples.row(i))) {
      throw Error(ErrorKind::InvalidArgument, "core", "sample point outside " + domain.name());
    }
  }
  return samples;
}

}  // namespace cvmc
