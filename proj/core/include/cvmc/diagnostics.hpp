#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "cvmc/bases.hpp"
#include "cvmc/quadrature.hpp"
#include "cvmc/sampling.hpp"
#include "cvmc/schedule.hpp"

namespace cvmc {

// q(x) = h(x)' P(hh')^{-1} h(x), the squared Mahalanobis distance of h(x)
// from its mean. Depends only on span{h_1..h_m}. The Gram matrix is factored
// once at construction.
class LeverageFunction {
 public:
  explicit LeverageFunction(ControlBasis basis, const QuadratureSpec& spec = {});

  double operator()(std::span<const double> x) const;

  // lambda_min^{-1} sum_j h_j(x)^2 >= q(x).
  double upper_bound(std::span<const double> x) const;

  double min_eigenvalue() const noexcept { return lambda_min_; }
  const ControlBasis& basis() const noexcept { return basis_; }

 private:
  ControlBasis basis_;
  Eigen::LLT<Eigen::MatrixXd> factor_;
  double lambda_min_ = 0.0;
};

double leverage_function(const ControlBasis& basis, std::span<const double> x, const QuadratureSpec& spec = {});
double leverage_upper_bound(const ControlBasis& basis, std::span<const double> x, const QuadratureSpec& spec = {});

// Diagonal of the hat matrix Pi = H (H'H)^{-1} H'. Sums to m. Throws
// SingularGram when H is rank-deficient.
Eigen::VectorXd empirical_leverages(const BasisMatrix& h);

struct SupLeverage {
  double value = 0.0;
  // false: maximum over a probe grid, hence only a lower bound.
  bool analytic = true;
  std::string note;
};

// Closed forms: m for indicators, m(m+2) for Legendre (attained at x = 1),
// sum_j prod_l (2 a_j(l) + 1) for the tensor family (attained at the corner
// (1, ..., 1)). Custom bases are probed on a 1000-per-axis grid for d <= 2
// and on 10^5 points of an additive-recurrence lattice otherwise.
SupLeverage sup_leverage(const ControlBasis& basis, const QuadratureSpec& spec = {});

// P(q) by quadrature; equals m.
double mean_leverage(const ControlBasis& basis, const QuadratureSpec& spec = {});

inline constexpr double kHighLeverageFactor = 3.0;

struct LeverageProfile {
  std::size_t m = 0;
  std::size_t n = 0;
  SupLeverage sup_q;
  double mean_q_quad = 0.0;
  Eigen::VectorXd empirical_leverages;
  double max_empirical = 0.0;
  std::vector<std::size_t> high_leverage_flags;  // i with Pi_ii > c m / n
  double c = kHighLeverageFactor;
};

LeverageProfile leverage_profile(const ControlBasis& basis, const SamplePoints& samples,
                                 double c = kHighLeverageFactor, const QuadratureSpec& spec = {});

// Order of sup_x q(x) used for growth checks: m, m(m+2), and m^2 for the
// tensor family (the constant is dropped).
double family_sup_leverage(BasisFamily family, std::size_t m);

struct GrowthRow {
  std::size_t n = 0;
  std::size_t m = 0;
  double sup_q = 0.0;
  double ratio = 0.0;  // sup_q * m / n, must tend to 0
};

struct GrowthVerdict {
  BasisFamily family = BasisFamily::Legendre1d;
  Schedule schedule = Schedule::constant(0);
  std::vector<GrowthRow> rows;
  bool decreasing = false;        // strictly, at every step
  bool trend_decreasing = false;  // last < first and negative log-log slope
  // m = o(n^p) suffices for the family: p = 1/2 (indicators), 1/3 (Legendre
  // and tensor).
  double sufficient_exponent = 0.0;
  std::string sufficient_rule;
  bool schedule_within_rule = false;
  bool passed = false;
};

// PASS when sup_q * m / n trends down along the grid (see trend_decreasing)
// and the schedule grows more slowly than the family's sufficient rule.
GrowthVerdict check_growth_rule(BasisFamily family, const Schedule& schedule, const std::vector<std::size_t>& n_grid);

}  // namespace cvmc
