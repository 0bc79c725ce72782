#pragma once

#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Core>

#include "cvmc/bases.hpp"
#include "cvmc/integrand.hpp"
#include "cvmc/quadrature.hpp"
#include "cvmc/sampling.hpp"

namespace cvmc {

enum class EstimatorForm { Regression, Projection };
enum class QuantileRule { Normal, StudentT };
enum class EstimateMethod { OlsRegression, OlsProjection, Naive, OracleBeta };

std::string to_string(EstimatorForm form);
std::string to_string(QuantileRule rule);
std::string to_string(EstimateMethod method);
EstimatorForm parse_form(const std::string& text);
QuantileRule parse_quantile_rule(const std::string& text);

// A design column counts as dependent when its QR pivot is below this
// fraction of the largest pivot.
inline constexpr double kRankTolerance = 1e-10;
// Below this, 1_n lies numerically in the column space of H and the
// intercept is not identifiable.
inline constexpr double kDenomFloor = 1e-8;

struct EstimateOptions {
  double alpha = 0.05;
  EstimatorForm form = EstimatorForm::Regression;
  QuantileRule quantile = QuantileRule::Normal;
};

struct EstimateReport {
  double mu_hat = 0.0;
  double sigma2_hat = 0.0;      // residual sum of squares / n
  double sigma2_hat_dof = 0.0;  // sigma2_hat * n / (n - m - 1); used for the interval
  double ci_low = 0.0;
  double ci_high = 0.0;
  double alpha = 0.05;
  std::size_t n = 0;
  std::size_t m = 0;
  double denom = 1.0;  // 1 - P_n(h') P_n(hh')^{-1} P_n(h)
  EstimateMethod method = EstimateMethod::Naive;
  Eigen::VectorXd beta;  // fitted slope, empty for naive MC

  double half_width() const noexcept { return 0.5 * (ci_high - ci_low); }
};

// Integration weights w with mu_hat = sum_i w_i f(X_i) for every f.
struct WeightVector {
  Eigen::VectorXd weights;

  double apply(const Eigen::VectorXd& values) const { return weights.dot(values); }
};

enum class BetaSource { EmpiricalOls, PopulationOracle };

struct BetaCoefficients {
  Eigen::VectorXd beta;
  BetaSource source = BetaSource::PopulationOracle;
  // Only filled by beta_oracle: mu = P(f) and sigma^2(f - beta'h) = P(eps^2).
  double mean = 0.0;
  double residual_variance = 0.0;
};

// Leading-order operation counts of one run; naive_equivalent_n is the plain
// Monte Carlo sample size with the same budget.
struct CostRecord {
  std::size_t basis_evals = 0;
  std::size_t gram_ops = 0;
  std::size_t solve_ops = 0;
  std::size_t naive_equivalent_n = 0;

  std::size_t total(std::size_t n) const noexcept { return n + basis_evals + gram_ops + solve_ops; }
};

// z_{1-alpha/2}, or the Student t quantile with dof degrees of freedom.
double critical_value(QuantileRule rule, double alpha, double dof);

Eigen::VectorXd evaluate_integrand(const Integrand& f, const SamplePoints& samples);

EstimateReport naive_mc(const Integrand& f, const SamplePoints& samples, const EstimateOptions& options = {});
EstimateReport naive_mc(const Eigen::VectorXd& values, const EstimateOptions& options = {});

// Intercept of the least-squares fit of f(X_i) on (1, h(X_i)).
//
// Regression form: column-pivoted Householder QR of H^(n); the constant
// column is then eliminated against the orthogonal complement of col(H), so
// the Gram matrix is never formed. Projection form: the ratio
//   (P_n f - P_n(fh') P_n(hh')^{-1} P_n h) / (1 - P_n(h') P_n(hh')^{-1} P_n h)
// with a Cholesky solve, kept as an independent cross-check.
//
// Throws InsufficientSamples (n < m + 2), SingularGram (rank(H) < m) or
// OnesInColumnSpace (denom <= kDenomFloor).
EstimateReport olsmc(const Integrand& f, const SamplePoints& samples, const ControlBasis& basis,
                     const EstimateOptions& options = {});
EstimateReport olsmc(const Eigen::VectorXd& values, const BasisMatrix& h, const EstimateOptions& options = {});

// w = (I - Pi) 1 / 1'(I - Pi) 1 with Pi the hat matrix of H^(n).
WeightVector olsmc_weights(const SamplePoints& samples, const ControlBasis& basis);
WeightVector olsmc_weights(const BasisMatrix& h);

// beta_opt = P(hh')^{-1} P(hf) and the residual variance P(eps^2), both by
// quadrature. Throws RankDeficient.
BetaCoefficients beta_oracle(const Integrand& f, const ControlBasis& basis, const QuadratureSpec& spec = {});

// P_n(f - beta'h) with a fixed coefficient vector.
EstimateReport estimate_with_oracle_beta(const Integrand& f, const SamplePoints& samples,
                                         const ControlBasis& basis, const BetaCoefficients& beta,
                                         const EstimateOptions& options = {});
EstimateReport estimate_with_oracle_beta(const Eigen::VectorXd& values, const BasisMatrix& h,
                                         const Eigen::VectorXd& beta, const EstimateOptions& options = {});

// Dense Gram: O(n m^2), naive gets n m^2 points. Localized supports: O(n m),
// naive gets n m points. With m = 0 both reduce to n.
CostRecord cost_model(std::size_t n, std::size_t m, bool localized);

}  // namespace cvmc
