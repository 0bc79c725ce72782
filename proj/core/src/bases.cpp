#include "cvmc/bases.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "cvmc/error.hpp"

namespace cvmc {
namespace {

constexpr std::string_view kModule = "bases";

std::shared_ptr<ControlBasis::State> new_state(BasisFamily family, std::size_t m, const Domain& domain) {
  return std::make_shared<ControlBasis::State>(
      ControlBasis::State{family, m, domain, {}, std::nullopt, {}, {}});
}

// values[a] = L_a(x) for a = 0..max_degree, by Bonnet's recurrence.
void legendre_values(double x, std::size_t max_degree, std::span<double> values) {
  values[0] = 1.0;
  if (max_degree == 0) return;
  values[1] = x;
  for (std::size_t j = 1; j < max_degree; ++j) {
    const double jd = static_cast<double>(j);
    values[j + 1] = ((2.0 * jd + 1.0) * x * values[j] - jd * values[j - 1]) / (jd + 1.0);
  }
}

std::size_t integer_root(std::size_t value, std::size_t dim) {
  auto k = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(value), 1.0 / static_cast<double>(dim))));
  auto power = [dim](std::size_t base) {
    std::size_t p = 1;
    for (std::size_t i = 0; i < dim; ++i) p *= base;
    return p;
  };
  while (k > 1 && power(k) > value) --k;
  while (power(k + 1) <= value) ++k;
  return k;
}

}  // namespace

std::string to_string(BasisFamily family) {
  switch (family) {
    case BasisFamily::IndicatorStrata: return "indicator";
    case BasisFamily::Legendre1d: return "legendre";
    case BasisFamily::LegendreTensor: return "legendre_tensor";
    case BasisFamily::Custom: return "custom";
  }
  return "?";
}

BasisFamily parse_basis_family(const std::string& name) {
  if (name == "indicator" || name == "indicator_strata") return BasisFamily::IndicatorStrata;
  if (name == "legendre" || name == "legendre_1d") return BasisFamily::Legendre1d;
  if (name == "legendre_tensor" || name == "tensor") return BasisFamily::LegendreTensor;
  if (name == "custom") return BasisFamily::Custom;
  throw Error(ErrorKind::InvalidArgument, kModule, "unknown basis family '" + name + "'");
}

void ControlBasis::evaluate(std::span<const double> x, std::span<double> out) const {
  if (state_->m > 0) state_->eval(x, out);
}

std::vector<double> ControlBasis::operator()(std::span<const double> x) const {
  std::vector<double> out(size());
  evaluate(x, out);
  return out;
}

ControlBasis ControlBasis::empty(const Domain& domain) {
  auto state = new_state(BasisFamily::Custom, 0, domain);
  state->gram = Eigen::MatrixXd(0, 0);
  return ControlBasis(std::move(state));
}

ControlBasis make_indicator_basis(std::size_t m, std::size_t dim) {
  if (m == 0) throw Error(ErrorKind::InvalidArgument, kModule, "indicator basis needs m >= 1");
  const std::size_t cells = m + 1;
  const std::size_t k = integer_root(cells, dim);
  std::size_t check = 1;
  for (std::size_t i = 0; i < dim; ++i) check *= k;
  if (check != cells) {
    throw Error(ErrorKind::InvalidArgument, kModule,
                "indicator basis in dimension " + std::to_string(dim) + " needs m + 1 = k^d");
  }

  auto state = new_state(BasisFamily::IndicatorStrata, m,
                         dim == 1 ? Domain::unit_interval() : Domain::unit_cube(dim));
  const double scale = static_cast<double>(cells);
  state->eval = [m, k, scale](std::span<const double> x, std::span<double> out) {
    std::size_t cell = 0;
    std::size_t stride = 1;
    for (double v : x) {
      const auto c = std::min(static_cast<std::size_t>(v * static_cast<double>(k)), k - 1);
      cell += c * stride;
      stride *= k;
    }
    std::fill(out.begin(), out.end(), -1.0);
    if (cell < m) out[cell] = scale - 1.0;
  };
  state->gram = scale * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) -
                Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (std::size_t j = 1; j < k; ++j) state->breakpoints.push_back(static_cast<double>(j) / static_cast<double>(k));
  return ControlBasis(std::move(state));
}

std::size_t indicator_size_at_most(std::size_t m_wanted, std::size_t dim) {
  const std::size_t k = integer_root(m_wanted + 1, dim);
  std::size_t cells = 1;
  for (std::size_t i = 0; i < dim; ++i) cells *= k;
  return cells - 1;
}

ControlBasis make_legendre_basis(std::size_t m) {
  if (m == 0) throw Error(ErrorKind::InvalidArgument, kModule, "legendre basis needs m >= 1");
  auto state = new_state(BasisFamily::Legendre1d, m, Domain::sym_interval());
  state->eval = [m](std::span<const double> x, std::span<double> out) {
    const double t = x[0];
    double prev = 1.0;
    double cur = t;
    out[0] = cur;
    for (std::size_t j = 1; j < m; ++j) {
      const double jd = static_cast<double>(j);
      const double next = ((2.0 * jd + 1.0) * t * cur - jd * prev) / (jd + 1.0);
      prev = cur;
      cur = next;
      out[j] = cur;
    }
  };
  Eigen::VectorXd diag(static_cast<Eigen::Index>(m));
  for (std::size_t j = 1; j <= m; ++j) diag(static_cast<Eigen::Index>(j - 1)) = 1.0 / (2.0 * static_cast<double>(j) + 1.0);
  state->gram = Eigen::MatrixXd(diag.asDiagonal());
  return ControlBasis(std::move(state));
}

std::vector<DegreeVector> tensor_degree_vectors(std::size_t m, std::size_t dim) {
  if (dim == 0) throw Error(ErrorKind::InvalidArgument, kModule, "dimension must be >= 1");
  std::vector<DegreeVector> out;
  out.reserve(m);
  for (int level = 1; out.size() < m; ++level) {
    DegreeVector a(dim, 0);
    while (true) {
      if (*std::max_element(a.begin(), a.end()) == level) {
        out.push_back(a);
        if (out.size() == m) break;
      }
      std::size_t axis = 0;
      while (axis < dim && a[axis] == level) a[axis++] = 0;
      if (axis == dim) break;
      ++a[axis];
    }
  }
  return out;
}

ControlBasis make_legendre_tensor_basis(std::size_t m, std::size_t dim) {
  if (m == 0) throw Error(ErrorKind::InvalidArgument, kModule, "tensor basis needs m >= 1");
  auto state = new_state(BasisFamily::LegendreTensor, m, Domain::sym_cube(dim));
  state->degrees = tensor_degree_vectors(m, dim);
  std::size_t max_degree = 0;
  for (const auto& a : state->degrees) {
    max_degree = std::max(max_degree, static_cast<std::size_t>(*std::max_element(a.begin(), a.end())));
  }
  std::vector<double> norms(max_degree + 1);
  for (std::size_t a = 0; a <= max_degree; ++a) norms[a] = std::sqrt(2.0 * static_cast<double>(a) + 1.0);

  state->eval = [degrees = state->degrees, norms, max_degree, dim](std::span<const double> x,
                                                                   std::span<double> out) {
    const std::size_t width = max_degree + 1;
    std::vector<double> table(dim * width);
    for (std::size_t l = 0; l < dim; ++l) {
      std::span<double> row(table.data() + l * width, width);
      legendre_values(x[l], max_degree, row);
      for (std::size_t a = 0; a < width; ++a) row[a] *= norms[a];
    }
    for (std::size_t j = 0; j < degrees.size(); ++j) {
      double value = 1.0;
      for (std::size_t l = 0; l < dim; ++l) value *= table[l * width + static_cast<std::size_t>(degrees[j][l])];
      out[j] = value;
    }
  };
  state->gram = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  return ControlBasis(std::move(state));
}

ControlBasis make_custom_basis(const Domain& domain, std::size_t m, RowEvaluator eval,
                               bool declared_zero_mean, const QuadratureSpec& spec,
                               std::vector<double> breakpoints) {
  if (m == 0) return ControlBasis::empty(domain);
  auto state = new_state(BasisFamily::Custom, m, domain);
  state->eval = std::move(eval);
  state->breakpoints = std::move(breakpoints);
  ControlBasis raw(state);

  if (declared_zero_mean) {
    if (domain.dim() <= kMaxQuadratureDim) {
      const Eigen::VectorXd means = quadrature_means(raw, spec);
      if (means.cwiseAbs().maxCoeff() > 1e-10) {
        throw Error(ErrorKind::InvalidArgument, kModule, "custom basis declared zero-mean but P(h_j) != 0");
      }
    }
    return raw;
  }

  const Eigen::VectorXd means = quadrature_means(raw, spec);
  auto centred = new_state(BasisFamily::Custom, m, domain);
  centred->breakpoints = state->breakpoints;
  centred->eval = [inner = state->eval, means](std::span<const double> x, std::span<double> out) {
    inner(x, out);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] -= means(static_cast<Eigen::Index>(j));
  };
  return ControlBasis(std::move(centred));
}

ControlBasis make_custom_basis(const Domain& domain, std::vector<PointFunction> functions,
                               bool declared_zero_mean, const QuadratureSpec& spec,
                               std::vector<double> breakpoints) {
  const std::size_t m = functions.size();
  auto eval = [functions = std::move(functions)](std::span<const double> x, std::span<double> out) {
    for (std::size_t j = 0; j < functions.size(); ++j) out[j] = functions[j](x);
  };
  return make_custom_basis(domain, m, std::move(eval), declared_zero_mean, spec, std::move(breakpoints));
}

ControlBasis transform_basis(const ControlBasis& basis, const Eigen::MatrixXd& a) {
  if (static_cast<std::size_t>(a.cols()) != basis.size()) {
    throw Error(ErrorKind::InvalidArgument, kModule, "transform matrix has the wrong number of columns");
  }
  const auto rows = static_cast<std::size_t>(a.rows());
  if (rows == 0) return ControlBasis::empty(basis.domain());
  auto state = new_state(BasisFamily::Custom, rows, basis.domain());
  state->breakpoints = basis.breakpoints();
  if (basis.analytic_gram()) state->gram = a * (*basis.analytic_gram()) * a.transpose();
  state->eval = [basis, a](std::span<const double> x, std::span<double> out) {
    Eigen::VectorXd h(static_cast<Eigen::Index>(basis.size()));
    basis.evaluate(x, std::span<double>(h.data(), basis.size()));
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = a * h;
  };
  return ControlBasis(std::move(state));
}

Domain family_domain(BasisFamily family, std::size_t dim) {
  switch (family) {
    case BasisFamily::IndicatorStrata: return dim == 1 ? Domain::unit_interval() : Domain::unit_cube(dim);
    case BasisFamily::Legendre1d: return Domain::sym_interval();
    case BasisFamily::LegendreTensor: return Domain::sym_cube(dim);
    case BasisFamily::Custom: break;
  }
  throw Error(ErrorKind::InvalidArgument, kModule, "custom bases have no default domain");
}

ControlBasis make_basis(BasisFamily family, std::size_t m, std::size_t dim) {
  if (m == 0) return ControlBasis::empty(family_domain(family, dim));
  switch (family) {
    case BasisFamily::IndicatorStrata: return make_indicator_basis(m, dim);
    case BasisFamily::Legendre1d:
      if (dim != 1) throw Error(ErrorKind::InvalidArgument, kModule, "legendre basis is one-dimensional");
      return make_legendre_basis(m);
    case BasisFamily::LegendreTensor: return make_legendre_tensor_basis(m, dim);
    case BasisFamily::Custom: break;
  }
  throw Error(ErrorKind::InvalidArgument, kModule, "custom bases cannot be built by family id");
}

BasisMatrix evaluate_basis(const ControlBasis& basis, const RowMatrix& points) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  const std::size_t m = basis.size();
  BasisMatrix out{Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m))};
  if (m == 0) return out;
  std::vector<double> row(m);
  for (std::size_t i = 0; i < n; ++i) {
    basis.evaluate(std::span<const double>(points.data() + i * d, d), row);
    for (std::size_t j = 0; j < m; ++j) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return out;
}

BasisMatrix evaluate_basis(const ControlBasis& basis, const SamplePoints& samples) {
  if (!(basis.domain() == samples.domain)) {
    throw Error(ErrorKind::InvalidArgument, kModule,
                "basis lives on " + basis.domain().name() + " but samples on " + samples.domain.name());
  }
  return evaluate_basis(basis, samples.points);
}

namespace {

NodeSet basis_nodes(const ControlBasis& basis, const QuadratureSpec& spec) {
  QuadratureSpec merged = spec;
  merged.breakpoints.insert(merged.breakpoints.end(), basis.breakpoints().begin(), basis.breakpoints().end());
  return build_nodes(basis.domain(), merged);
}

}  // namespace

Eigen::MatrixXd quadrature_gram(const ControlBasis& basis, const QuadratureSpec& spec) {
  const auto m = static_cast<Eigen::Index>(basis.size());
  if (m == 0) return Eigen::MatrixXd(0, 0);
  const NodeSet set = basis_nodes(basis, spec);
  const BasisMatrix h = evaluate_basis(basis, set.nodes);
  Eigen::MatrixXd g = h.values.transpose() * set.weights.asDiagonal() * h.values;
  return 0.5 * (g + g.transpose());
}

Eigen::VectorXd quadrature_means(const ControlBasis& basis, const QuadratureSpec& spec) {
  if (basis.size() == 0) return Eigen::VectorXd(0);
  const NodeSet set = basis_nodes(basis, spec);
  const BasisMatrix h = evaluate_basis(basis, set.nodes);
  return h.values.transpose() * set.weights;
}

Eigen::MatrixXd gram(const ControlBasis& basis, const QuadratureSpec& spec) {
  Eigen::MatrixXd g = basis.analytic_gram() ? *basis.analytic_gram() : quadrature_gram(basis, spec);
  if (g.rows() == 0) return g;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < kGramEigenFloor) {
    throw Error(ErrorKind::RankDeficient, kModule, "Gram matrix P(hh') has an eigenvalue below 1e-10");
  }
  return g;
}

}  // namespace cvmc
