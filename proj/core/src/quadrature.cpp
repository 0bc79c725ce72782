#include "cvmc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "cvmc/error.hpp"

namespace cvmc {
namespace {

GaussLegendre compute_gauss_legendre(int order) {
  GaussLegendre rule;
  rule.nodes.resize(static_cast<std::size_t>(order));
  rule.weights.resize(static_cast<std::size_t>(order));
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double derivative = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= order; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      derivative = order * (z * p1 - p2) / (z * z - 1.0);
      const double step = p1 / derivative;
      z -= step;
      if (std::abs(step) <= 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * derivative * derivative);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(order - 1 - i);
    rule.nodes[lo] = -z;
    rule.nodes[hi] = z;
    rule.weights[lo] = w;
    rule.weights[hi] = w;
  }
  return rule;
}

std::vector<double> panel_edges(const Domain& domain, const std::vector<double>& a,
                                const std::vector<double>& b) {
  std::vector<double> edges{domain.lower(), domain.upper()};
  for (const auto* list : {&a, &b}) {
    for (double v : *list) {
      if (v > domain.lower() && v < domain.upper()) edges.push_back(v);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

// One axis of the composite rule, weights normalised to the axis width.
void axis_rule(const std::vector<double>& edges, int order, double width,
               std::vector<double>& nodes, std::vector<double>& weights) {
  const auto& gl = gauss_legendre(order);
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double mid = 0.5 * (edges[p] + edges[p + 1]);
    const double half = 0.5 * (edges[p + 1] - edges[p]);
    for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
      nodes.push_back(mid + half * gl.nodes[k]);
      weights.push_back(half * gl.weights[k] / width);
    }
  }
}

void check_spec(const Domain& domain, const QuadratureSpec& spec) {
  if (spec.nodes_per_axis < 2) {
    throw Error(ErrorKind::InvalidArgument, "core", "nodes_per_axis must be >= 2");
  }
  if (!(spec.abs_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "core", "abs_tol must be > 0");
  if (domain.dim() > kMaxQuadratureDim) {
    throw Error(ErrorKind::InvalidArgument, "core",
                "quadrature unavailable for dimension " + std::to_string(domain.dim()) +
                    "; declare true_mean instead");
  }
}

double checked(double value) {
  if (!std::isfinite(value)) throw Error(ErrorKind::NonFinite, "core", "integrand is not finite at a node");
  return value;
}

double panel_sum(const PointFunction& f, double a, double b, const GaussLegendre& gl) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
    const double x = mid + half * gl.nodes[k];
    sum += gl.weights[k] * checked(f(std::span<const double>(&x, 1)));
  }
  return half * sum;
}

double point(const PointFunction& f, double x) { return checked(f(std::span<const double>(&x, 1))); }

// Gauss nodes never touch the panel ends, so a jump between an end (or the
// split point) and the outermost node is invisible to the halving test. The
// end value is compared with a linear extrapolation from the two outermost
// nodes; a miss far larger than the same extrapolation one node further in
// signals a jump or kink hiding in the gap.
double edge_miss(const PointFunction& f, double end, double x0, double x1, double x2) {
  const double f0 = point(f, x0);
  const double f1 = point(f, x1);
  const double slope = (f1 - f0) / (x1 - x0);
  const double miss = std::abs(point(f, end) - (f0 + slope * (end - x0)));
  const double inner = std::abs(f0 - (f1 + (point(f, x2) - f1) / (x2 - x1) * (x0 - x1)));
  const double floor = 1e-12 * (1.0 + std::abs(f0));
  return miss > 10.0 * inner + floor ? std::abs(end - x0) * miss : 0.0;
}

double edge_gap(const PointFunction& f, double a, double b, const GaussLegendre& gl) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const auto node = [&](std::size_t k) { return mid + half * gl.nodes[k]; };
  const std::size_t last = gl.nodes.size() - 1;
  return edge_miss(f, a, node(0), node(1), node(2)) + edge_miss(f, b, node(last), node(last - 1), node(last - 2));
}

double adaptive_panel(const PointFunction& f, double a, double b, double whole, double tol,
                      const GaussLegendre& gl, int depth) {
  const double mid = 0.5 * (a + b);
  const double left = panel_sum(f, a, mid, gl);
  const double right = panel_sum(f, mid, b, gl);
  const double estimate = std::abs(left + right - whole) + edge_gap(f, a, mid, gl) + edge_gap(f, mid, b, gl);
  if (estimate <= tol || depth >= 60) return left + right;
  return adaptive_panel(f, a, mid, left, 0.5 * tol, gl, depth + 1) +
         adaptive_panel(f, mid, b, right, 0.5 * tol, gl, depth + 1);
}

}  // namespace

const GaussLegendre& gauss_legendre(int order) {
  if (order < 1) throw Error(ErrorKind::InvalidArgument, "core", "Gauss-Legendre order must be >= 1");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GaussLegendre>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussLegendre>(compute_gauss_legendre(order));
  return *slot;
}

NodeSet build_nodes(const Domain& domain, const QuadratureSpec& spec) {
  check_spec(domain, spec);
  std::vector<double> axis_nodes;
  std::vector<double> axis_weights;
  axis_rule(panel_edges(domain, spec.breakpoints, {}), spec.nodes_per_axis, domain.width(),
            axis_nodes, axis_weights);

  const std::size_t per_axis = axis_nodes.size();
  const std::size_t d = domain.dim();
  std::size_t total = 1;
  for (std::size_t k = 0; k < d; ++k) total *= per_axis;

  NodeSet set{RowMatrix(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d)),
              Eigen::VectorXd(static_cast<Eigen::Index>(total))};
  std::vector<std::size_t> index(d, 0);
  for (std::size_t row = 0; row < total; ++row) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      set.nodes(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) = axis_nodes[index[k]];
      w *= axis_weights[index[k]];
    }
    set.weights(static_cast<Eigen::Index>(row)) = w;
    for (std::size_t k = 0; k < d; ++k) {
      if (++index[k] < per_axis) break;
      index[k] = 0;
    }
  }
  return set;
}

double quad_integrate(const PointFunction& f, const Domain& domain, const QuadratureSpec& spec) {
  check_spec(domain, spec);
  if (spec.rule == QuadratureRule::AdaptivePanel && domain.dim() == 1) {
    if (spec.nodes_per_axis < 3) {
      throw Error(ErrorKind::InvalidArgument, "core", "adaptive rule needs nodes_per_axis >= 3");
    }
    const auto& gl = gauss_legendre(spec.nodes_per_axis);
    const auto edges = panel_edges(domain, spec.breakpoints, {});
    double total = 0.0;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const double a = edges[p];
      const double b = edges[p + 1];
      const double share = spec.abs_tol * (b - a) / domain.width();
      total += adaptive_panel(f, a, b, panel_sum(f, a, b, gl), share, gl, 0);
    }
    return total / domain.width();
  }

  const auto set = build_nodes(domain, spec);
  double sum = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::span<const double> x(set.nodes.data() + i * domain.dim(), domain.dim());
    sum += set.weights(static_cast<Eigen::Index>(i)) * checked(f(x));
  }
  return sum;
}

double quad_integrate(const Integrand& f, const Domain& domain, const QuadratureSpec& spec) {
  QuadratureSpec merged = spec;
  merged.breakpoints.insert(merged.breakpoints.end(), f.breakpoints.begin(), f.breakpoints.end());
  return quad_integrate(f.eval, domain, merged);
}

double true_mean(const Integrand& f, const Domain& domain, const QuadratureSpec& spec) {
  if (f.true_mean) return *f.true_mean;
  return quad_integrate(f, domain, spec);
}

}  // namespace cvmc
