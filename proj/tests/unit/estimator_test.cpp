#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "cvmc/bases.hpp"
#include "cvmc/corpus.hpp"
#include "cvmc/error.hpp"
#include "cvmc/estimator.hpp"
#include "cvmc/quadrature.hpp"
#include "cvmc/sampling.hpp"
#include "oracles.hpp"

namespace cvmc {
namespace {

template <typename F>
ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected cvmc::Error";
  return ErrorKind::InvalidArgument;
}

SamplePoints points_1d(const Domain& domain, const std::vector<double>& xs) {
  RowMatrix p(static_cast<Eigen::Index>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) p(static_cast<Eigen::Index>(i), 0) = xs[i];
  return make_samples(domain, p);
}

Integrand lambda(std::string id, PointFunction f) { return Integrand{std::move(id), std::move(f), std::nullopt, {}}; }

TEST(CriticalValue, KnownQuantiles) {
  EXPECT_NEAR(critical_value(QuantileRule::Normal, 0.05, 10), 1.959963984540054, 1e-12);
  EXPECT_NEAR(critical_value(QuantileRule::StudentT, 0.05, 10), 2.228138851986274, 1e-10);
  EXPECT_EQ(error_kind([] { critical_value(QuantileRule::Normal, 1.5, 1); }), ErrorKind::InvalidArgument);
}

TEST(NaiveMc, ConstantAndMean) {
  const auto s = points_1d(Domain::unit_interval(), {0.2, 0.4, 0.9});
  const auto c = naive_mc(make_integrand("const", Domain::unit_interval()), s);
  EXPECT_EQ(c.mu_hat, 1.0);
  EXPECT_EQ(c.sigma2_hat, 0.0);
  EXPECT_EQ(c.ci_low, c.ci_high);
  const auto lin = naive_mc(make_integrand("linear", Domain::unit_interval()), s);
  EXPECT_NEAR(lin.mu_hat, 0.5, 1e-15);
  EXPECT_EQ(lin.method, EstimateMethod::Naive);
  EXPECT_EQ(lin.m, 0u);
}

TEST(NaiveMc, ExpWithinFourSigma) {
  const auto domain = Domain::unit_interval();
  const auto f = make_integrand("exp", domain);
  const double mu = std::numbers::e - 1.0;
  const double var =
      quad_integrate([&](std::span<const double> x) { return std::pow(f(x) - mu, 2); }, domain, {});
  const std::size_t n = 100000;
  const auto r = naive_mc(f, draw_samples(domain, n, 1));
  EXPECT_LE(std::abs(r.mu_hat - mu), 4.0 * std::sqrt(var / n));
  EXPECT_NEAR(r.sigma2_hat, var, 0.02 * var);
  EXPECT_LT(r.ci_low, r.mu_hat);
  EXPECT_GT(r.ci_high, r.mu_hat);
}

TEST(NaiveMc, NeedsTwoPoints) {
  EXPECT_EQ(error_kind([] { naive_mc(Eigen::VectorXd::Ones(1)); }), ErrorKind::InsufficientSamples);
}

TEST(Olsmc, EmptyBasisIsNaive) {
  const auto domain = Domain::sym_interval();
  const auto f = make_integrand("exp", domain);
  const auto s = draw_samples(domain, 50, 4);
  const auto a = olsmc(f, s, ControlBasis::empty(domain));
  const auto b = naive_mc(f, s);
  EXPECT_EQ(a.mu_hat, b.mu_hat);
  EXPECT_EQ(a.sigma2_hat, b.sigma2_hat);
  EXPECT_EQ(a.ci_low, b.ci_low);
  EXPECT_EQ(a.ci_high, b.ci_high);
  EXPECT_EQ(a.method, EstimateMethod::Naive);
}

TEST(Olsmc, ConstantPlusControlIsExact) {
  const auto basis = make_legendre_basis(3);
  const auto f = make_affine_integrand(3.0, {2.0, 0.0, 0.0}, basis);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = draw_samples(basis.domain(), 12, seed);
    const auto r = olsmc(f, s, basis);
    EXPECT_NEAR(r.mu_hat, 3.0, 1e-10);
    EXPECT_NEAR(r.sigma2_hat, 0.0, 1e-20);
    EXPECT_NEAR(r.beta(0), 2.0, 1e-10);
  }
}

TEST(Olsmc, SixPointNormalEquations) {
  const auto basis = make_legendre_basis(2);
  const auto s = draw_samples(basis.domain(), 6, 42);
  const auto f = make_integrand("square", basis.domain());
  oracle::Matrix x;
  std::vector<double> y;
  for (std::size_t i = 0; i < 6; ++i) {
    x.push_back(basis(s.row(i)));
    y.push_back(f(s.row(i)));
  }
  const auto coef = oracle::normal_equations_fit(x, y);
  for (auto form : {EstimatorForm::Regression, EstimatorForm::Projection}) {
    EstimateOptions opt;
    opt.form = form;
    const auto r = olsmc(f, s, basis, opt);
    EXPECT_NEAR(r.mu_hat, coef[0], 1e-10);
    EXPECT_NEAR(r.beta(0), coef[1], 1e-10);
    EXPECT_NEAR(r.beta(1), coef[2], 1e-10);
  }
}

TEST(Olsmc, PostStratification) {
  const auto basis = make_indicator_basis(3);
  const auto f = make_integrand("exp", basis.domain());
  const auto s = draw_samples(basis.domain(), 40, 17);
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < 40; ++i) {
    xs.push_back(s.points(i, 0));
    ys.push_back(f(s.row(i)));
  }
  EXPECT_NEAR(olsmc(f, s, basis).mu_hat, oracle::mean_of_stratum_means(xs, ys, 4), 1e-10);
}

TEST(Olsmc, ResidualAndDofIdentities) {
  const auto basis = make_legendre_basis(4);
  const auto f = make_integrand("runge", basis.domain());
  const auto s = draw_samples(basis.domain(), 30, 8);
  const auto r = olsmc(f, s, basis);
  const auto hm = evaluate_basis(basis, s);
  const Eigen::VectorXd y = evaluate_integrand(f, s);
  const Eigen::VectorXd resid = y - Eigen::VectorXd::Constant(30, r.mu_hat) - hm.values * r.beta;
  EXPECT_NEAR(r.sigma2_hat, resid.squaredNorm() / 30.0, 1e-14);
  EXPECT_NEAR(r.sigma2_hat_dof, r.sigma2_hat * 30.0 / 25.0, 1e-14);
  const double z = critical_value(QuantileRule::Normal, 0.05, 25);
  EXPECT_NEAR(r.half_width(), z * std::sqrt(r.sigma2_hat_dof / 30.0), 1e-14);
  EXPECT_EQ(r.m, 4u);
  EXPECT_EQ(r.n, 30u);

  EstimateOptions t;
  t.quantile = QuantileRule::StudentT;
  const auto rt = olsmc(f, s, basis, t);
  EXPECT_GT(rt.half_width(), r.half_width());
  EXPECT_EQ(rt.mu_hat, r.mu_hat);
}

TEST(Olsmc, ErrorPaths) {
  const auto basis = make_legendre_basis(3);
  const auto f = make_integrand("exp", basis.domain());
  EXPECT_EQ(error_kind([&] { olsmc(f, draw_samples(basis.domain(), 4, 1), basis); }),
            ErrorKind::InsufficientSamples);

  // Every point in the first cell: the remaining indicators are constant -1.
  const auto ind = make_indicator_basis(2);
  const auto crowded = points_1d(Domain::unit_interval(), {0.01, 0.05, 0.1, 0.2, 0.25, 0.3});
  EXPECT_EQ(error_kind([&] { olsmc(make_integrand("exp", ind.domain()), crowded, ind); }),
            ErrorKind::SingularGram);

  // One empty stratum: H has full rank but the ones vector is in its span.
  const auto gap = points_1d(Domain::unit_interval(), {0.01, 0.1, 0.2, 0.4, 0.5, 0.6});
  EXPECT_EQ(error_kind([&] { olsmc(make_integrand("exp", ind.domain()), gap, ind); }),
            ErrorKind::OnesInColumnSpace);
  EstimateOptions proj;
  proj.form = EstimatorForm::Projection;
  EXPECT_EQ(error_kind([&] { olsmc(make_integrand("exp", ind.domain()), gap, ind, proj); }),
            ErrorKind::OnesInColumnSpace);

  const auto bad = lambda("nan", [](std::span<const double>) { return std::nan(""); });
  EXPECT_EQ(error_kind([&] { olsmc(bad, draw_samples(basis.domain(), 10, 1), basis); }), ErrorKind::NonFinite);
}

// Both forms agree on random problems, including badly conditioned ones.
TEST(Olsmc, FormEquivalenceProperty) {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> ids{"exp", "runge", "abs_shift", "square", "step:0.3"};
  for (int t = 0; t < 60; ++t) {
    const bool indicator = t % 2 == 0;
    const std::size_t m = 1 + rng() % 8;
    const auto basis = indicator ? make_indicator_basis(m) : make_legendre_basis(m);
    const std::size_t n = m + 2 + rng() % 60;
    const auto f = make_integrand(ids[rng() % ids.size()], basis.domain());
    const auto s = draw_samples(basis.domain(), n, rng());
    EstimateOptions proj;
    proj.form = EstimatorForm::Projection;
    try {
      const auto a = olsmc(f, s, basis);
      const auto b = olsmc(f, s, basis, proj);
      EXPECT_LE(std::abs(a.mu_hat - b.mu_hat), 1e-8 * std::max(1.0, std::abs(a.mu_hat))) << t;
      EXPECT_LE(std::abs(a.sigma2_hat - b.sigma2_hat), 1e-8 * std::max(1.0, a.sigma2_hat)) << t;
    } catch (const Error& e) {
      EXPECT_TRUE(e.kind() == ErrorKind::SingularGram || e.kind() == ErrorKind::OnesInColumnSpace) << e.what();
    }
  }
}

// High-degree polynomials on barely enough points. The projection identity
// divides by denom after a cancellation, so agreement degrades like eps/denom
// and nowhere else.
TEST(Olsmc, FormGapBoundedByDenominator) {
  std::mt19937_64 rng(77);
  int compared = 0;
  for (std::size_t m : {5u, 10u, 15u, 20u}) {
    for (std::size_t extra : {2u, 4u, 8u, 16u}) {
      for (int t = 0; t < 50; ++t) {
        const auto basis = make_legendre_basis(m);
        const auto f = make_integrand("runge", basis.domain());
        const auto s = draw_samples(basis.domain(), m + extra, rng());
        EstimateOptions proj;
        proj.form = EstimatorForm::Projection;
        try {
          const auto a = olsmc(f, s, basis);
          const auto b = olsmc(f, s, basis, proj);
          const double gap = std::abs(a.mu_hat - b.mu_hat) / std::max(1.0, std::abs(a.mu_hat));
          EXPECT_LE(gap, 50.0 * std::numeric_limits<double>::epsilon() / a.denom) << m << " " << extra;
          if (a.denom > 1e-6) EXPECT_LE(gap, 1e-8);
          ++compared;
        } catch (const Error& e) {
          EXPECT_TRUE(e.kind() == ErrorKind::SingularGram || e.kind() == ErrorKind::OnesInColumnSpace);
        }
      }
    }
  }
  EXPECT_GT(compared, 400);
}

TEST(Weights, EmptyBasisIsUniform) {
  const auto s = draw_samples(Domain::unit_interval(), 7, 2);
  const auto w = olsmc_weights(s, ControlBasis::empty(Domain::unit_interval()));
  for (Eigen::Index i = 0; i < 7; ++i) EXPECT_NEAR(w.weights(i), 1.0 / 7.0, 1e-16);
}

TEST(Weights, StratumCounts) {
  const auto s = points_1d(Domain::unit_interval(), {0.1, 0.2, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95});
  const auto w = olsmc_weights(s, make_indicator_basis(2));
  const std::vector<double> count{2, 2, 3, 3, 3, 4, 4, 4, 4};
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(w.weights(static_cast<Eigen::Index>(i)), 1.0 / (3.0 * count[i]), 1e-14);
}

TEST(Weights, ReproduceEstimateAndSumToOne) {
  const auto basis = make_legendre_basis(5);
  const auto s = draw_samples(basis.domain(), 40, 3);
  const auto w = olsmc_weights(s, basis);
  EXPECT_NEAR(w.weights.sum(), 1.0, 1e-13);
  const auto hm = evaluate_basis(basis, s);
  EXPECT_LE((hm.values.transpose() * w.weights).cwiseAbs().maxCoeff(), 1e-13);
  for (const std::string id : {"exp", "runge", "abs_shift"}) {
    const auto f = make_integrand(id, basis.domain());
    EXPECT_NEAR(w.apply(evaluate_integrand(f, s)), olsmc(f, s, basis).mu_hat, 1e-12) << id;
  }
}

TEST(BetaOracle, FunctionInSpan) {
  const auto basis = make_legendre_basis(3);
  const auto h1 = lambda("h1", [](std::span<const double> x) { return x[0]; });
  const auto b = beta_oracle(h1, basis);
  EXPECT_NEAR(b.beta(0), 1.0, 1e-13);
  EXPECT_NEAR(b.beta(1), 0.0, 1e-13);
  EXPECT_NEAR(b.residual_variance, 0.0, 1e-25);
  EXPECT_EQ(b.source, BetaSource::PopulationOracle);

  const auto sq = beta_oracle(make_integrand("square", basis.domain()), make_legendre_basis(2));
  EXPECT_NEAR(sq.beta(0), 0.0, 1e-14);
  EXPECT_NEAR(sq.beta(1), 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(sq.mean, 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(sq.residual_variance, 0.0, 1e-25);
}

TEST(BetaOracle, ExpResidualVariances) {
  const auto f = make_integrand("exp", Domain::sym_interval());
  const std::vector<double> expected{0.02632650867, 0.000720286766, 1.114443521e-5};
  double previous = 1.0;
  for (std::size_t m = 1; m <= 3; ++m) {
    const double v = beta_oracle(f, make_legendre_basis(m)).residual_variance;
    EXPECT_NEAR(v, expected[m - 1], 1e-9 * std::max(1.0, expected[m - 1]) + 1e-11);
    EXPECT_LT(v, previous);
    previous = v;
  }
  // Residuals near 1e-11 carry rounding of order 1e-16 from evaluating exp.
  EXPECT_NEAR(beta_oracle(f, make_legendre_basis(10)).residual_variance, 2.397854238e-22, 1e-4 * 2.4e-22);
}

TEST(OracleBeta, ZeroBetaIsNaiveAndExactFitIsExact) {
  const auto basis = make_legendre_basis(2);
  const auto f = make_integrand("exp", basis.domain());
  const auto s = draw_samples(basis.domain(), 25, 5);
  BetaCoefficients zero;
  zero.beta = Eigen::VectorXd::Zero(2);
  const auto r = estimate_with_oracle_beta(f, s, basis, zero);
  EXPECT_NEAR(r.mu_hat, naive_mc(f, s).mu_hat, 1e-15);
  EXPECT_EQ(r.method, EstimateMethod::OracleBeta);

  const auto exact = make_affine_integrand(-0.7, {1.5, -2.0}, basis);
  BetaCoefficients b;
  b.beta = Eigen::Vector2d(1.5, -2.0);
  EXPECT_NEAR(estimate_with_oracle_beta(exact, s, basis, b).mu_hat, -0.7, 1e-14);
}

TEST(CostModel, BudgetRules) {
  EXPECT_EQ(cost_model(1000, 0, false).naive_equivalent_n, 1000u);
  EXPECT_EQ(cost_model(1000, 10, false).naive_equivalent_n, 100000u);
  EXPECT_EQ(cost_model(1000, 10, true).naive_equivalent_n, 10000u);
  const auto c = cost_model(100, 4, false);
  EXPECT_EQ(c.basis_evals, 400u);
  EXPECT_EQ(c.gram_ops, 1600u);
  EXPECT_EQ(c.solve_ops, 64u);
}

TEST(Names, RoundTrip) {
  EXPECT_EQ(parse_form(to_string(EstimatorForm::Projection)), EstimatorForm::Projection);
  EXPECT_EQ(parse_quantile_rule(to_string(QuantileRule::StudentT)), QuantileRule::StudentT);
  EXPECT_EQ(error_kind([] { parse_form("ridge"); }), ErrorKind::InvalidArgument);
}

}  // namespace
}  // namespace cvmc
