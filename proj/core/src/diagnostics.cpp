#include "cvmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "cvmc/error.hpp"

namespace cvmc {
namespace {

constexpr std::string_view kModule = "diagnostics";

Eigen::VectorXd eval_vector(const ControlBasis& basis, std::span<const double> x) {
  Eigen::VectorXd h(static_cast<Eigen::Index>(basis.size()));
  basis.evaluate(x, std::span<double>(h.data(), basis.size()));
  return h;
}

RowMatrix probe_points(const Domain& domain) {
  const std::size_t d = domain.dim();
  const double lo = domain.lower();
  const double width = domain.width();
  if (d <= 2) {
    constexpr std::size_t per_axis = 1000;
    std::size_t total = per_axis;
    if (d == 2) total *= per_axis;
    RowMatrix points(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < total; ++i) {
      std::size_t index = i;
      for (std::size_t l = 0; l < d; ++l) {
        points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) =
            lo + width * static_cast<double>(index % per_axis) / static_cast<double>(per_axis - 1);
        index /= per_axis;
      }
    }
    return points;
  }
  // Additive recurrence with the generalised golden ratio: x_i = frac(i * alpha).
  constexpr std::size_t total = 100000;
  double phi = 2.0;
  for (int it = 0; it < 50; ++it) phi = std::pow(1.0 + phi, 1.0 / static_cast<double>(d + 1));
  std::vector<double> alpha(d);
  for (std::size_t l = 0; l < d; ++l) alpha[l] = std::fmod(std::pow(1.0 / phi, static_cast<double>(l + 1)), 1.0);
  RowMatrix points(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < total; ++i) {
    for (std::size_t l = 0; l < d; ++l) {
      const double u = std::fmod(0.5 + static_cast<double>(i) * alpha[l], 1.0);
      points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = lo + width * u;
    }
  }
  return points;
}

}  // namespace

LeverageFunction::LeverageFunction(ControlBasis basis, const QuadratureSpec& spec) : basis_(std::move(basis)) {
  if (basis_.size() == 0) return;
  const Eigen::MatrixXd g = gram(basis_, spec);
  factor_.compute(g);
  if (factor_.info() != Eigen::Success) {
    throw Error(ErrorKind::RankDeficient, kModule, "Gram matrix is not positive definite");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
  lambda_min_ = eig.eigenvalues().minCoeff();
}

double LeverageFunction::operator()(std::span<const double> x) const {
  if (basis_.size() == 0) return 0.0;
  const Eigen::VectorXd h = eval_vector(basis_, x);
  return factor_.matrixL().solve(h).squaredNorm();
}

double LeverageFunction::upper_bound(std::span<const double> x) const {
  if (basis_.size() == 0) return 0.0;
  return eval_vector(basis_, x).squaredNorm() / lambda_min_;
}

double leverage_function(const ControlBasis& basis, std::span<const double> x, const QuadratureSpec& spec) {
  return LeverageFunction(basis, spec)(x);
}

double leverage_upper_bound(const ControlBasis& basis, std::span<const double> x, const QuadratureSpec& spec) {
  return LeverageFunction(basis, spec).upper_bound(x);
}

Eigen::VectorXd empirical_leverages(const BasisMatrix& h) {
  const auto n = static_cast<Eigen::Index>(h.rows());
  const auto m = static_cast<Eigen::Index>(h.cols());
  if (m == 0) return Eigen::VectorXd::Zero(n);
  if (n < m) throw Error(ErrorKind::SingularGram, kModule, "fewer sample points than control functions");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(n, m);
  qr.setThreshold(1e-10);
  qr.compute(h.values);
  if (qr.rank() < m) throw Error(ErrorKind::SingularGram, kModule, "empirical Gram P_n(hh') is rank-deficient");
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
  return q.rowwise().squaredNorm();
}

SupLeverage sup_leverage(const ControlBasis& basis, const QuadratureSpec& spec) {
  const std::size_t m = basis.size();
  const double md = static_cast<double>(m);
  switch (basis.family()) {
    case BasisFamily::IndicatorStrata: return {md, true, "constant: q = m"};
    case BasisFamily::Legendre1d: return {md * (md + 2.0), true, "attained at x = 1"};
    case BasisFamily::LegendreTensor: {
      double sum = 0.0;
      for (const auto& a : basis.degree_vectors()) {
        double prod = 1.0;
        for (int degree : a) prod *= 2.0 * degree + 1.0;
        sum += prod;
      }
      return {sum, true, "attained at the corner (1, ..., 1)"};
    }
    case BasisFamily::Custom: break;
  }
  if (m == 0) return {0.0, true, "no controls"};
  const LeverageFunction q(basis, spec);
  const RowMatrix points = probe_points(basis.domain());
  const std::size_t d = basis.domain().dim();
  double best = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    best = std::max(best, q(std::span<const double>(points.data() + i * static_cast<Eigen::Index>(d), d)));
  }
  return {best, false,
          "lower bound: maximum over " + std::to_string(points.rows()) + " probe points"};
}

double mean_leverage(const ControlBasis& basis, const QuadratureSpec& spec) {
  if (basis.size() == 0) return 0.0;
  const LeverageFunction q(basis, spec);
  QuadratureSpec merged = spec;
  merged.breakpoints.insert(merged.breakpoints.end(), basis.breakpoints().begin(), basis.breakpoints().end());
  return quad_integrate([&q](std::span<const double> x) { return q(x); }, basis.domain(), merged);
}

LeverageProfile leverage_profile(const ControlBasis& basis, const SamplePoints& samples, double c,
                                 const QuadratureSpec& spec) {
  LeverageProfile profile;
  profile.m = basis.size();
  profile.n = samples.size();
  profile.c = c;
  profile.sup_q = sup_leverage(basis, spec);
  profile.mean_q_quad = basis.domain().dim() <= kMaxQuadratureDim ? mean_leverage(basis, spec)
                                                                  : static_cast<double>(profile.m);
  profile.empirical_leverages = empirical_leverages(evaluate_basis(basis, samples));
  profile.max_empirical = profile.n > 0 ? profile.empirical_leverages.maxCoeff() : 0.0;
  const double cutoff = c * static_cast<double>(profile.m) / static_cast<double>(profile.n);
  for (std::size_t i = 0; i < profile.n; ++i) {
    if (profile.empirical_leverages(static_cast<Eigen::Index>(i)) > cutoff) profile.high_leverage_flags.push_back(i);
  }
  return profile;
}

double family_sup_leverage(BasisFamily family, std::size_t m) {
  const double md = static_cast<double>(m);
  switch (family) {
    case BasisFamily::IndicatorStrata: return md;
    case BasisFamily::Legendre1d: return md * (md + 2.0);
    case BasisFamily::LegendreTensor: return md * md;
    case BasisFamily::Custom: break;
  }
  throw Error(ErrorKind::InvalidArgument, kModule, "no analytic leverage supremum for custom bases");
}

namespace {

// Flooring m(n) puts small upward steps into an otherwise falling sequence,
// so the trend is judged by the last value against the first and by the
// least-squares slope of log ratio against log n.
bool ratio_trend_down(const std::vector<GrowthRow>& rows) {
  if (rows.size() < 2) return false;
  const double first = rows.front().ratio;
  const double last = rows.back().ratio;
  if (!(last < first)) return false;
  if (last == 0.0) return true;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  double count = 0.0;
  for (const auto& row : rows) {
    if (row.ratio <= 0.0) continue;
    const double x = std::log(static_cast<double>(row.n));
    const double y = std::log(row.ratio);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    count += 1.0;
  }
  if (count < 2.0) return true;
  return count * sxy - sx * sy < 0.0;
}

}  // namespace

GrowthVerdict check_growth_rule(BasisFamily family, const Schedule& schedule, const std::vector<std::size_t>& n_grid) {
  GrowthVerdict verdict;
  verdict.family = family;
  verdict.schedule = schedule;
  switch (family) {
    case BasisFamily::IndicatorStrata:
      verdict.sufficient_exponent = 0.5;
      verdict.sufficient_rule = "m = o(n^(1/2))";
      break;
    case BasisFamily::Legendre1d:
      verdict.sufficient_exponent = 1.0 / 3.0;
      verdict.sufficient_rule = "m = o(n^(1/3))";
      break;
    case BasisFamily::LegendreTensor:
      verdict.sufficient_exponent = 1.0 / 3.0;
      verdict.sufficient_rule = "m^3 = o(n)";
      break;
    case BasisFamily::Custom:
      throw Error(ErrorKind::InvalidArgument, kModule, "growth rule needs a built-in family");
  }
  for (std::size_t n : n_grid) {
    if (n == 0) throw Error(ErrorKind::InvalidArgument, kModule, "grid sizes must be positive");
    GrowthRow row;
    row.n = n;
    row.m = schedule(n);
    row.sup_q = family_sup_leverage(family, row.m);
    row.ratio = row.sup_q * static_cast<double>(row.m) / static_cast<double>(n);
    verdict.rows.push_back(row);
  }
  verdict.decreasing = verdict.rows.size() >= 2;
  for (std::size_t k = 1; k < verdict.rows.size(); ++k) {
    const double prev = verdict.rows[k - 1].ratio;
    const double cur = verdict.rows[k].ratio;
    // A schedule that never adds controls trivially satisfies the rule.
    if (!(cur < prev || (cur == 0.0 && prev == 0.0))) verdict.decreasing = false;
  }
  verdict.trend_decreasing = verdict.decreasing || ratio_trend_down(verdict.rows);
  verdict.schedule_within_rule = schedule.is_constant() || schedule.exponent() < verdict.sufficient_exponent;
  // A grid cannot tell a ratio falling to 0 from one settling at a constant
  // (Legendre with m = n^(1/3) tends to 1), so the order of the schedule
  // must also sit inside the sufficient rule.
  verdict.passed = verdict.trend_decreasing && verdict.schedule_within_rule;
  return verdict;
}

}  // namespace cvmc
