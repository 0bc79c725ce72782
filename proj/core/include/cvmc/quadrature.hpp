#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "cvmc/domain.hpp"
#include "cvmc/integrand.hpp"
#include "cvmc/sampling.hpp"

namespace cvmc {

enum class QuadratureRule { GaussLegendre, TensorGaussLegendre, AdaptivePanel };

struct QuadratureSpec {
  QuadratureRule rule = QuadratureRule::TensorGaussLegendre;
  int nodes_per_axis = 64;
  double abs_tol = 1e-12;
  // Extra per-axis panel boundaries (merged with an integrand's own).
  std::vector<double> breakpoints;
};

// Largest dimension the tensor rule is used for; beyond it ground truth must
// come from a declared true_mean.
inline constexpr std::size_t kMaxQuadratureDim = 3;

// Gauss-Legendre nodes and weights on [-1, 1]; weights sum to 2.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussLegendre& gauss_legendre(int order);

// A fixed rule for integrals against P: weights sum to one.
struct NodeSet {
  RowMatrix nodes;  // N x d
  Eigen::VectorXd weights;

  std::size_t size() const noexcept { return static_cast<std::size_t>(nodes.rows()); }
};

// Composite tensor Gauss-Legendre rule on the domain with one panel per
// interval between sorted breakpoints. AdaptivePanel falls back to this rule
// because a node set cannot adapt to an unknown integrand.
NodeSet build_nodes(const Domain& domain, const QuadratureSpec& spec);

// Integral of f against uniform P on the domain. Throws NonFinite if f is
// NaN/inf at a node and InvalidArgument above kMaxQuadratureDim.
double quad_integrate(const PointFunction& f, const Domain& domain, const QuadratureSpec& spec);
double quad_integrate(const Integrand& f, const Domain& domain, const QuadratureSpec& spec);

// true_mean if declared, else quadrature.
double true_mean(const Integrand& f, const Domain& domain, const QuadratureSpec& spec = {});

}  // namespace cvmc
