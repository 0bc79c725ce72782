#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cvmc {

using PointFunction = std::function<double(std::span<const double>)>;

// The function f whose mean mu = P(f) is sought.
struct Integrand {
  std::string id;
  PointFunction eval;
  // mu = P(f) when known in closed form; otherwise the quadrature oracle
  // supplies it (see true_mean()).
  std::optional<double> true_mean;
  // Axis coordinates where f has a jump or kink. Quadrature splits panels
  // there so that piecewise-smooth integrands stay exact.
  std::vector<double> breakpoints;

  double operator()(std::span<const double> x) const { return eval(x); }
};

}  // namespace cvmc
