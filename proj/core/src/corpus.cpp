#include "cvmc/corpus.hpp"

#include <cmath>
#include <numbers>
#include <regex>

#include "cvmc/error.hpp"

namespace cvmc {
namespace {

void require_dim1(const std::string& id, const Domain& domain) {
  if (domain.dim() != 1) {
    throw Error(ErrorKind::InvalidArgument, "corpus", "integrand '" + id + "' is defined on intervals only");
  }
}

bool is_unit(const Domain& domain) { return domain.lower() == 0.0; }

}  // namespace

const std::vector<std::string>& corpus_ids() {
  static const std::vector<std::string> ids{"const", "linear", "square", "exp",
                                            "abs_shift", "step:<u>", "runge", "product_exp"};
  return ids;
}

Integrand make_integrand(const std::string& id, const Domain& domain) {
  const double d = static_cast<double>(domain.dim());
  const bool unit = is_unit(domain);

  if (id == "const") {
    return {id, [](std::span<const double>) { return 1.0; }, 1.0, {}};
  }
  if (id == "linear") {
    require_dim1(id, domain);
    return {id, [](std::span<const double> x) { return x[0]; }, unit ? 0.5 : 0.0, {}};
  }
  if (id == "square") {
    require_dim1(id, domain);
    return {id, [](std::span<const double> x) { return x[0] * x[0]; }, 1.0 / 3.0, {}};
  }
  if (id == "exp") {
    require_dim1(id, domain);
    return {id, [](std::span<const double> x) { return std::exp(x[0]); },
            unit ? std::numbers::e - 1.0 : std::sinh(1.0), {}};
  }
  if (id == "abs_shift") {
    auto f = [](std::span<const double> x) {
      double sum = 0.0;
      for (double v : x) sum += std::abs(v - 1.0 / 3.0);
      return sum;
    };
    return {id, f, d * (unit ? 5.0 / 18.0 : 5.0 / 9.0), {1.0 / 3.0}};
  }
  if (id == "runge") {
    require_dim1(id, domain);
    return {id, [](std::span<const double> x) { return 1.0 / (1.0 + 25.0 * x[0] * x[0]); },
            std::atan(5.0) / 5.0, {}};
  }
  if (id == "product_exp") {
    auto f = [](std::span<const double> x) {
      double prod = 1.0;
      for (double v : x) prod *= std::exp(v);
      return prod;
    };
    return {id, f, std::pow(unit ? std::numbers::e - 1.0 : std::sinh(1.0), d), {}};
  }

  static const std::regex step_re(R"(step(?::|\()\s*([-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)\s*\)?)");
  std::smatch match;
  if (std::regex_match(id, match, step_re)) {
    require_dim1(id, domain);
    const double u = std::stod(match[1].str());
    if (u < domain.lower() || u > domain.upper()) {
      throw Error(ErrorKind::InvalidArgument, "corpus", "step threshold outside " + domain.name());
    }
    return {id, [u](std::span<const double> x) { return x[0] >= u ? 1.0 : 0.0; },
            (1.0 - u) / domain.width(), {u}};
  }

  throw Error(ErrorKind::InvalidArgument, "corpus", "unknown integrand '" + id + "'");
}

Integrand make_affine_integrand(double intercept, std::vector<double> slopes, const ControlBasis& basis) {
  if (slopes.size() != basis.size()) {
    throw Error(ErrorKind::InvalidArgument, "corpus", "affine integrand needs one slope per control function");
  }
  auto f = [intercept, slopes = std::move(slopes), basis](std::span<const double> x) {
    std::vector<double> h(basis.size());
    basis.evaluate(x, h);
    double value = intercept;
    for (std::size_t j = 0; j < h.size(); ++j) value += slopes[j] * h[j];
    return value;
  };
  return {"affine", f, intercept, basis.breakpoints()};
}

}  // namespace cvmc
