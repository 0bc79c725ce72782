#include "cvmc/estimator.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "cvmc/error.hpp"

namespace cvmc {
namespace {

constexpr std::string_view kModule = "estimator";

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, kModule, "alpha must lie in (0, 1)");
}

void fill_interval(EstimateReport& report, QuantileRule rule) {
  const double dof = static_cast<double>(report.n) - static_cast<double>(report.m) - 1.0;
  report.sigma2_hat_dof = report.sigma2_hat * static_cast<double>(report.n) / dof;
  const double half =
      critical_value(rule, report.alpha, dof) * std::sqrt(report.sigma2_hat_dof / static_cast<double>(report.n));
  report.ci_low = report.mu_hat - half;
  report.ci_high = report.mu_hat + half;
}

void check_values(const Eigen::VectorXd& values) {
  if (!values.allFinite()) throw Error(ErrorKind::NonFinite, kModule, "integrand value is not finite");
}

struct QrPieces {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  Eigen::VectorXd q_ones;  // Q' 1_n
  double denom = 1.0;
};

// Shared by both estimator forms and the weight vector.
QrPieces factor_design(const Eigen::MatrixXd& h) {
  const Eigen::Index n = h.rows();
  const Eigen::Index m = h.cols();
  QrPieces pieces{Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(n, m), Eigen::VectorXd(), 1.0};
  pieces.qr.setThreshold(kRankTolerance);
  pieces.qr.compute(h);
  if (pieces.qr.rank() < m) {
    throw Error(ErrorKind::SingularGram, kModule,
                "empirical Gram P_n(hh') is rank-deficient (rank " + std::to_string(pieces.qr.rank()) + " < m = " +
                    std::to_string(m) + "); reduce the number of control functions");
  }
  pieces.q_ones = pieces.qr.householderQ().adjoint() * Eigen::VectorXd::Ones(n);
  pieces.denom = pieces.q_ones.tail(n - m).squaredNorm() / static_cast<double>(n);
  if (!(pieces.denom > kDenomFloor)) {
    throw Error(ErrorKind::OnesInColumnSpace, kModule,
                "1_n lies in the column space of H (denominator " + std::to_string(pieces.denom) +
                    "); the intercept is not identifiable");
  }
  return pieces;
}

EstimateReport regression_form(const Eigen::VectorXd& f, const Eigen::MatrixXd& h) {
  const Eigen::Index n = h.rows();
  const Eigen::Index m = h.cols();
  const QrPieces pieces = factor_design(h);

  const Eigen::VectorXd q_f = pieces.qr.householderQ().adjoint() * f;
  const auto tail_one = pieces.q_ones.tail(n - m);
  const auto tail_f = q_f.tail(n - m);

  EstimateReport report;
  report.mu_hat = tail_f.dot(tail_one) / tail_one.squaredNorm();
  report.sigma2_hat = (tail_f - report.mu_hat * tail_one).squaredNorm() / static_cast<double>(n);
  report.denom = pieces.denom;

  const Eigen::VectorXd rhs = q_f.head(m) - report.mu_hat * pieces.q_ones.head(m);
  const Eigen::VectorXd z =
      pieces.qr.matrixR().topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(rhs);
  report.beta = pieces.qr.colsPermutation() * z;
  report.method = EstimateMethod::OlsRegression;
  return report;
}

// The projection identity mu = (P_n f - P_n(h)'G^-1 P_n(hf)) / (1 - P_n(h)'G^-1 P_n(h))
// with G = P_n(hh'). Writing H = QR gives n G^-1 = (R'R)^-1, so every quadratic
// form reduces to inner products of the leading m entries of Q'1 and Q'f and G
// is never formed.
EstimateReport projection_form(const Eigen::VectorXd& f, const Eigen::MatrixXd& h) {
  const double n = static_cast<double>(h.rows());
  const Eigen::Index m = h.cols();
  const QrPieces pieces = factor_design(h);
  const Eigen::VectorXd q_f = pieces.qr.householderQ().adjoint() * f;
  const auto head_one = pieces.q_ones.head(m);
  const auto head_f = q_f.head(m);

  EstimateReport report;
  report.denom = 1.0 - head_one.squaredNorm() / n;
  if (!(report.denom > kDenomFloor)) {
    throw Error(ErrorKind::OnesInColumnSpace, kModule,
                "1_n lies in the column space of H (denominator " + std::to_string(report.denom) + ")");
  }
  report.mu_hat = (f.mean() - head_one.dot(head_f) / n) / report.denom;
  // Normal equations: P_n(hh') beta = P_n(hf) - mu P_n(h).
  const Eigen::VectorXd rhs = head_f - report.mu_hat * head_one;
  const Eigen::VectorXd z = pieces.qr.matrixR().topLeftCorner(m, m).triangularView<Eigen::Upper>().solve(rhs);
  report.beta = pieces.qr.colsPermutation() * z;
  // Residual sum of squares as the centered sum of squares minus its projection onto col(H).
  const double rss = (f.array() - report.mu_hat).matrix().squaredNorm() - rhs.squaredNorm();
  report.sigma2_hat = std::max(0.0, rss / n);
  report.method = EstimateMethod::OlsProjection;
  return report;
}

}  // namespace

std::string to_string(EstimatorForm form) {
  return form == EstimatorForm::Regression ? "regression" : "projection";
}

std::string to_string(QuantileRule rule) { return rule == QuantileRule::Normal ? "normal" : "student_t"; }

std::string to_string(EstimateMethod method) {
  switch (method) {
    case EstimateMethod::OlsRegression: return "ols_regression";
    case EstimateMethod::OlsProjection: return "ols_projection";
    case EstimateMethod::Naive: return "naive";
    case EstimateMethod::OracleBeta: return "oracle_beta";
  }
  return "?";
}

EstimatorForm parse_form(const std::string& text) {
  if (text == "regression") return EstimatorForm::Regression;
  if (text == "projection") return EstimatorForm::Projection;
  throw Error(ErrorKind::InvalidArgument, kModule, "form must be 'regression' or 'projection'");
}

QuantileRule parse_quantile_rule(const std::string& text) {
  if (text == "normal") return QuantileRule::Normal;
  if (text == "student_t" || text == "t") return QuantileRule::StudentT;
  throw Error(ErrorKind::InvalidArgument, kModule, "quantile must be 'normal' or 'student_t'");
}

double critical_value(QuantileRule rule, double alpha, double dof) {
  check_alpha(alpha);
  const double p = 1.0 - 0.5 * alpha;
  if (rule == QuantileRule::StudentT) {
    if (!(dof > 0.0)) throw Error(ErrorKind::InvalidArgument, kModule, "Student t needs positive degrees of freedom");
    return boost::math::quantile(boost::math::students_t_distribution<double>(dof), p);
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Eigen::VectorXd evaluate_integrand(const Integrand& f, const SamplePoints& samples) {
  Eigen::VectorXd values(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) values(static_cast<Eigen::Index>(i)) = f(samples.row(i));
  check_values(values);
  return values;
}

EstimateReport naive_mc(const Eigen::VectorXd& values, const EstimateOptions& options) {
  check_alpha(options.alpha);
  if (values.size() < 2) throw Error(ErrorKind::InsufficientSamples, kModule, "naive Monte Carlo needs n >= 2");
  check_values(values);
  EstimateReport report;
  report.n = static_cast<std::size_t>(values.size());
  report.m = 0;
  report.alpha = options.alpha;
  report.mu_hat = values.mean();
  report.sigma2_hat = (values.array() - report.mu_hat).square().mean();
  report.denom = 1.0;
  report.method = EstimateMethod::Naive;
  fill_interval(report, options.quantile);
  return report;
}

EstimateReport naive_mc(const Integrand& f, const SamplePoints& samples, const EstimateOptions& options) {
  return naive_mc(evaluate_integrand(f, samples), options);
}

EstimateReport olsmc(const Eigen::VectorXd& values, const BasisMatrix& h, const EstimateOptions& options) {
  check_alpha(options.alpha);
  const auto n = static_cast<std::size_t>(values.size());
  const std::size_t m = h.cols();
  if (h.rows() != n) throw Error(ErrorKind::InvalidArgument, kModule, "basis matrix and values disagree on n");
  if (n < m + 2) {
    throw Error(ErrorKind::InsufficientSamples, kModule,
                "need n >= m + 2 (n = " + std::to_string(n) + ", m = " + std::to_string(m) + ")");
  }
  check_values(values);

  EstimateReport report;
  if (m == 0) {
    report = naive_mc(values, options);
    report.beta = Eigen::VectorXd(0);
  } else {
    report = options.form == EstimatorForm::Regression ? regression_form(values, h.values)
                                                       : projection_form(values, h.values);
  }
  if (m > 0) {
    report.method = options.form == EstimatorForm::Regression ? EstimateMethod::OlsRegression
                                                              : EstimateMethod::OlsProjection;
  }
  report.n = n;
  report.m = m;
  report.alpha = options.alpha;
  fill_interval(report, options.quantile);
  return report;
}

EstimateReport olsmc(const Integrand& f, const SamplePoints& samples, const ControlBasis& basis,
                     const EstimateOptions& options) {
  return olsmc(evaluate_integrand(f, samples), evaluate_basis(basis, samples), options);
}

WeightVector olsmc_weights(const BasisMatrix& h) {
  const auto n = static_cast<Eigen::Index>(h.rows());
  const auto m = static_cast<Eigen::Index>(h.cols());
  if (n < m + 2) throw Error(ErrorKind::InsufficientSamples, kModule, "need n >= m + 2");
  if (m == 0) return {Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n))};

  const QrPieces pieces = factor_design(h.values);
  // (I - Pi) 1 = Q [0; tail(Q' 1)]
  Eigen::VectorXd projected = Eigen::VectorXd::Zero(n);
  projected.tail(n - m) = pieces.q_ones.tail(n - m);
  projected = pieces.qr.householderQ() * projected;
  return {projected / (static_cast<double>(n) * pieces.denom)};
}

WeightVector olsmc_weights(const SamplePoints& samples, const ControlBasis& basis) {
  return olsmc_weights(evaluate_basis(basis, samples));
}

BetaCoefficients beta_oracle(const Integrand& f, const ControlBasis& basis, const QuadratureSpec& spec) {
  QuadratureSpec merged = spec;
  merged.breakpoints.insert(merged.breakpoints.end(), f.breakpoints.begin(), f.breakpoints.end());
  merged.breakpoints.insert(merged.breakpoints.end(), basis.breakpoints().begin(), basis.breakpoints().end());
  const NodeSet set = build_nodes(basis.domain(), merged);
  const auto d = basis.domain().dim();

  Eigen::VectorXd f_nodes(static_cast<Eigen::Index>(set.size()));
  for (std::size_t i = 0; i < set.size(); ++i) {
    f_nodes(static_cast<Eigen::Index>(i)) = f(std::span<const double>(set.nodes.data() + i * d, d));
  }
  if (!f_nodes.allFinite()) throw Error(ErrorKind::NonFinite, kModule, "integrand is not finite at a node");

  BetaCoefficients out;
  out.source = BetaSource::PopulationOracle;
  out.mean = set.weights.dot(f_nodes);
  Eigen::VectorXd residual = f_nodes.array() - out.mean;
  if (basis.size() == 0) {
    out.beta = Eigen::VectorXd(0);
  } else {
    const BasisMatrix h = evaluate_basis(basis, set.nodes);
    const Eigen::MatrixXd g = gram(basis, merged);
    const Eigen::VectorXd hf = h.values.transpose() * (set.weights.asDiagonal() * f_nodes);
    out.beta = g.ldlt().solve(hf);
    residual -= h.values * out.beta;
  }
  // P(eps^2) straight from the residual: the closed form
  // sigma^2(f) - P(fh') P(hh')^{-1} P(hf) cancels catastrophically once
  // the fit is close.
  out.residual_variance = set.weights.dot(residual.cwiseAbs2());
  return out;
}

EstimateReport estimate_with_oracle_beta(const Eigen::VectorXd& values, const BasisMatrix& h,
                                         const Eigen::VectorXd& beta, const EstimateOptions& options) {
  if (static_cast<std::size_t>(beta.size()) != h.cols()) {
    throw Error(ErrorKind::InvalidArgument, kModule, "beta length must equal m");
  }
  Eigen::VectorXd residual = values;
  if (beta.size() > 0) residual -= h.values * beta;
  EstimateReport report = naive_mc(residual, options);
  report.method = EstimateMethod::OracleBeta;
  report.beta = beta;
  // Nothing is fitted, so the interval above keeps the n - 1 correction.
  report.m = h.cols();
  return report;
}

EstimateReport estimate_with_oracle_beta(const Integrand& f, const SamplePoints& samples,
                                         const ControlBasis& basis, const BetaCoefficients& beta,
                                         const EstimateOptions& options) {
  return estimate_with_oracle_beta(evaluate_integrand(f, samples), evaluate_basis(basis, samples), beta.beta,
                                   options);
}

CostRecord cost_model(std::size_t n, std::size_t m, bool localized) {
  CostRecord cost;
  cost.basis_evals = n * m;
  cost.gram_ops = localized ? n * m : n * m * m;
  cost.solve_ops = m * m * m;
  if (m == 0) {
    cost.naive_equivalent_n = n;
  } else {
    cost.naive_equivalent_n = localized ? n * m : n * m * m;
  }
  return cost;
}

}  // namespace cvmc
