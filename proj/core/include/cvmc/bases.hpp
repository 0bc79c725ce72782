#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cvmc/domain.hpp"
#include "cvmc/integrand.hpp"
#include "cvmc/quadrature.hpp"
#include "cvmc/sampling.hpp"

namespace cvmc {

enum class BasisFamily { IndicatorStrata, Legendre1d, LegendreTensor, Custom };

std::string to_string(BasisFamily family);
BasisFamily parse_basis_family(const std::string& name);

// Writes h(x) = (h_1(x), ..., h_m(x)) into out, which has size m.
using RowEvaluator = std::function<void(std::span<const double>, std::span<double>)>;

using DegreeVector = std::vector<int>;

// A vector h of m control functions with P(h_j) = 0. Immutable; copies share
// state.
class ControlBasis {
 public:
  // m = 0: no controls, OLSMC reduces to plain Monte Carlo.
  static ControlBasis empty(const Domain& domain);

  BasisFamily family() const noexcept { return state_->family; }
  std::size_t size() const noexcept { return state_->m; }
  const Domain& domain() const noexcept { return state_->domain; }

  // Tensor family only: multi-index of the j-th product polynomial.
  const std::vector<DegreeVector>& degree_vectors() const noexcept { return state_->degrees; }
  const std::optional<Eigen::MatrixXd>& analytic_gram() const noexcept { return state_->gram; }
  // Per-axis coordinates where some h_j jumps.
  const std::vector<double>& breakpoints() const noexcept { return state_->breakpoints; }

  void evaluate(std::span<const double> x, std::span<double> out) const;
  std::vector<double> operator()(std::span<const double> x) const;

  struct State {
    BasisFamily family;
    std::size_t m;
    Domain domain;
    std::vector<DegreeVector> degrees;
    std::optional<Eigen::MatrixXd> gram;
    std::vector<double> breakpoints;
    RowEvaluator eval;
  };
  explicit ControlBasis(std::shared_ptr<const State> state) : state_(std::move(state)) {}

 private:
  std::shared_ptr<const State> state_;
};

// Normalised stratum indicators (m+1) 1{x in I_j} - 1 on the m+1 equal cells
// of [0, 1); the last cell is left out. With dim > 1 the cells are the k^d
// sub-cubes of [0, 1]^d, which requires m + 1 = k^d.
ControlBasis make_indicator_basis(std::size_t m, std::size_t dim = 1);

// Largest m <= m_wanted of the form k^d - 1 (0 when no such m >= 1 exists).
std::size_t indicator_size_at_most(std::size_t m_wanted, std::size_t dim);

// Legendre polynomials L_1..L_m on [-1, 1], L_j(1) = 1.
ControlBasis make_legendre_basis(std::size_t m);

// Products of normalised Legendre polynomials sqrt(2a+1) L_a on [-1, 1]^d,
// indexed by degree vectors in graded order (see tensor_degree_vectors).
ControlBasis make_legendre_tensor_basis(std::size_t m, std::size_t dim);

// The first m nonzero multi-indices in N^d: all vectors with max-degree a come
// before any with max-degree a + 1; within a level the first coordinate varies
// fastest.
std::vector<DegreeVector> tensor_degree_vectors(std::size_t m, std::size_t dim);

// User-supplied controls. When declared_zero_mean is false the functions are
// centred by subtracting their quadrature means; when true the claim is
// checked by quadrature (for dim <= 3) and InvalidArgument thrown on failure.
ControlBasis make_custom_basis(const Domain& domain, std::size_t m, RowEvaluator eval,
                               bool declared_zero_mean, const QuadratureSpec& spec = {},
                               std::vector<double> breakpoints = {});
ControlBasis make_custom_basis(const Domain& domain, std::vector<PointFunction> functions,
                               bool declared_zero_mean, const QuadratureSpec& spec = {},
                               std::vector<double> breakpoints = {});

// The basis A h for an m' x m matrix A. The analytic Gram, when present, is
// carried over as A G A'.
ControlBasis transform_basis(const ControlBasis& basis, const Eigen::MatrixXd& a);

// Convenience constructor by family; tensor and indicator use dim.
ControlBasis make_basis(BasisFamily family, std::size_t m, std::size_t dim = 1);

// The domain each built-in family lives on.
Domain family_domain(BasisFamily family, std::size_t dim);

// H^(n): entry (i, j) = h_j(X_i).
struct BasisMatrix {
  Eigen::MatrixXd values;  // n x m

  std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

BasisMatrix evaluate_basis(const ControlBasis& basis, const SamplePoints& samples);
BasisMatrix evaluate_basis(const ControlBasis& basis, const RowMatrix& points);

// P(hh'): the analytic matrix when the family has one, else quadrature.
// Throws RankDeficient when the smallest eigenvalue is below 1e-10.
Eigen::MatrixXd gram(const ControlBasis& basis, const QuadratureSpec& spec = {});

// P(hh') by quadrature regardless of any analytic form.
Eigen::MatrixXd quadrature_gram(const ControlBasis& basis, const QuadratureSpec& spec = {});

// P(h_j) by quadrature.
Eigen::VectorXd quadrature_means(const ControlBasis& basis, const QuadratureSpec& spec = {});

inline constexpr double kGramEigenFloor = 1e-10;

}  // namespace cvmc
