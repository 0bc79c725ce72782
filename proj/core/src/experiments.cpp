#include "cvmc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "cvmc/corpus.hpp"
#include "cvmc/error.hpp"
#include "cvmc/ks_test.hpp"
#include "cvmc/quadrature.hpp"

namespace cvmc {
namespace {

constexpr std::string_view kModule = "experiments";

// Arm identifiers double as seed salts; keep them stable.
enum Arm : std::size_t { kOlsmcArm = 0, kNaiveArm = 1, kMatchedNaiveArm = 2 };

struct Outcome {
  bool ok = false;
  double mu_hat = 0.0;
  double sigma2_hat = 0.0;
  double sigma2_dof = 0.0;
};

struct Context {
  Domain domain;
  Integrand f;
  double mu;
  double sigma2_f;  // var(f), the naive-arm oracle
};

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& worker : pool) worker.join();
  if (failure) std::rethrow_exception(failure);
}

bool is_replication_failure(ErrorKind kind) {
  return kind == ErrorKind::SingularGram || kind == ErrorKind::OnesInColumnSpace ||
         kind == ErrorKind::InsufficientSamples;
}

void validate(const StudySpec& spec, std::size_t min_reps) {
  if (spec.reps < std::max<std::size_t>(2, min_reps)) {
    throw Error(ErrorKind::InvalidArgument, kModule,
                to_string(spec.study) + " study needs reps >= " + std::to_string(std::max<std::size_t>(2, min_reps)));
  }
  if (spec.n_grid.empty()) throw Error(ErrorKind::InvalidArgument, kModule, "n_grid is empty");
  for (std::size_t k = 0; k < spec.n_grid.size(); ++k) {
    if (spec.n_grid[k] == 0 || (k > 0 && spec.n_grid[k] <= spec.n_grid[k - 1])) {
      throw Error(ErrorKind::InvalidArgument, kModule, "n_grid must be positive and strictly increasing");
    }
  }
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, kModule, "alpha must lie in (0, 1)");
}

Context make_context(const StudySpec& spec) {
  const Domain domain = family_domain(spec.basis_family, spec.dim);
  Integrand f = make_integrand(spec.integrand_id, domain);
  const double mu = true_mean(f, domain);
  double sigma2_f = std::numeric_limits<double>::quiet_NaN();
  if (domain.dim() <= kMaxQuadratureDim) sigma2_f = beta_oracle(f, ControlBasis::empty(domain)).residual_variance;
  return {domain, std::move(f), mu, sigma2_f};
}

std::size_t effective_m(const StudySpec& spec, std::size_t n) {
  const std::size_t wanted = spec.schedule(n);
  if (spec.basis_family == BasisFamily::IndicatorStrata && spec.dim > 1) return indicator_size_at_most(wanted, spec.dim);
  return wanted;
}

double oracle_sigma2(const Context& ctx, const ControlBasis& basis) {
  if (basis.size() == 0) return ctx.sigma2_f;
  if (ctx.domain.dim() > kMaxQuadratureDim) return std::numeric_limits<double>::quiet_NaN();
  return beta_oracle(ctx.f, basis).residual_variance;
}

// sigma_n^2 at rounding level relative to P(f^2): the integrand lies in the
// span of the controls.
bool sigma_negligible(const Context& ctx, double sigma2) {
  const double scale = ctx.sigma2_f + ctx.mu * ctx.mu;
  return !(sigma2 > 1e-26 * std::max(scale, std::numeric_limits<double>::min()));
}

std::vector<Outcome> replicate(const StudySpec& spec, const Context& ctx, const ControlBasis& basis, std::size_t n,
                               Arm arm, std::size_t grid_index) {
  std::vector<Outcome> outcomes(spec.reps);
  EstimateOptions options;
  options.alpha = spec.alpha;
  options.form = spec.form;
  options.quantile = spec.quantile;
  parallel_for(spec.reps, spec.threads, [&](std::size_t r) {
    const SamplePoints samples = draw_samples(ctx.domain, n, replication_seed(spec.seed, arm, grid_index, r));
    try {
      const EstimateReport report = olsmc(ctx.f, samples, basis, options);
      outcomes[r] = {true, report.mu_hat, report.sigma2_hat, report.sigma2_hat_dof};
    } catch (const Error& e) {
      if (!is_replication_failure(e.kind())) throw;
      outcomes[r] = {};
    }
  });
  return outcomes;
}

struct ArmRun {
  StudyRow row;
  std::vector<Outcome> outcomes;
};

ArmRun run_arm(const StudySpec& spec, const Context& ctx, const ControlBasis& basis, std::size_t n, Arm arm,
               std::size_t grid_index, const std::string& name, double sigma2_oracle) {
  const auto start = std::chrono::steady_clock::now();
  ArmRun run;
  run.outcomes = replicate(spec, ctx, basis, n, arm, grid_index);
  const auto stop = std::chrono::steady_clock::now();

  StudyRow& row = run.row;
  row.arm = name;
  row.n = n;
  row.m = basis.size();
  row.oracle_sigma2 = sigma2_oracle;
  row.wallclock_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count();
  row.op_count = cost_model(n, basis.size(), spec.localized).total(n);

  double sq_error = 0.0;
  double sigma_sum = 0.0;
  std::size_t ok = 0;
  for (const auto& o : run.outcomes) {
    if (!o.ok) {
      ++row.failures;
      continue;
    }
    ++ok;
    sq_error += (o.mu_hat - ctx.mu) * (o.mu_hat - ctx.mu);
    sigma_sum += o.sigma2_hat;
  }
  if (static_cast<double>(row.failures) > kMaxFailureRate * static_cast<double>(spec.reps)) {
    std::ostringstream msg;
    msg << row.failures << " of " << spec.reps << " replications failed at n = " << n << ", m = " << row.m
        << " (arm " << name << ")";
    throw Error(ErrorKind::StudyAborted, kModule, msg.str());
  }
  row.rmse = std::sqrt(sq_error / static_cast<double>(ok));
  row.mean_sigma2_hat = sigma_sum / static_cast<double>(ok);
  if (!sigma_negligible(ctx, sigma2_oracle)) {
    row.extra["rmse_ratio"] = row.rmse / std::sqrt(sigma2_oracle / static_cast<double>(n));
    row.extra["sigma_ratio"] = row.mean_sigma2_hat / sigma2_oracle;
  }
  return run;
}

double coverage_of(const std::vector<Outcome>& outcomes, double mu, std::size_t n, std::size_t m, double alpha,
                   QuantileRule rule) {
  const double crit = critical_value(rule, alpha, static_cast<double>(n) - static_cast<double>(m) - 1.0);
  std::size_t hit = 0;
  std::size_t ok = 0;
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    ++ok;
    const double half = crit * std::sqrt(o.sigma2_dof / static_cast<double>(n));
    if (o.mu_hat - half <= mu && mu <= o.mu_hat + half) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(ok);
}

StudyResult start_result(const StudySpec& spec) {
  StudyResult result;
  result.spec = spec;
  return result;
}

const StudyRow* last_row(const StudyResult& result, const std::string& arm) {
  const auto rows = result.arm(arm);
  return rows.empty() ? nullptr : rows.back();
}

std::string format_band(const Band& band) {
  std::ostringstream out;
  out << "[" << band.first << ", " << band.second << "]";
  return out.str();
}

void add_band_verdict(StudyResult& result, const std::string& name, double value, const Band& band) {
  std::ostringstream detail;
  detail << value << " in " << format_band(band);
  result.verdicts.push_back({name, value >= band.first && value <= band.second, detail.str()});
}

void add_rmse_ratio_verdict(StudyResult& result, const std::string& arm) {
  const StudyRow* row = last_row(result, arm);
  if (row == nullptr) return;
  const auto it = row->extra.find("rmse_ratio");
  if (it == row->extra.end()) {
    result.verdicts.push_back({arm + "_rmse_ratio_bounded", true, "sigma_n = 0: exact integration, ratio undefined"});
    return;
  }
  add_band_verdict(result, arm + "_rmse_ratio_bounded", it->second, {0.5, 2.0});
}

void fill_slopes(StudyResult& result, const std::vector<std::string>& arms) {
  for (const auto& arm : arms) {
    std::vector<double> ns;
    std::vector<double> errors;
    bool usable = true;
    for (const StudyRow* row : result.arm(arm)) {
      ns.push_back(static_cast<double>(row->n));
      errors.push_back(row->rmse);
      if (!(row->rmse > 0.0)) usable = false;
    }
    if (usable && ns.size() >= 2) result.slopes[arm] = fit_loglog_slope(ns, errors);
  }
  if (result.slopes.count(arms.front())) result.fitted_slope = result.slopes.at(arms.front());
}

void require_nondegenerate(const Context& ctx, double sigma2, std::size_t n, std::size_t m) {
  if (sigma_negligible(ctx, sigma2)) {
    std::ostringstream msg;
    msg << "sigma_n = 0 at n = " << n << ", m = " << m
        << ": the integrand lies in the span of the controls, so the error cannot be normalised";
    throw Error(ErrorKind::DegenerateSigma, kModule, msg.str());
  }
}

}  // namespace

std::string to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::Rate: return "rate";
    case StudyKind::Normality: return "normality";
    case StudyKind::Coverage: return "coverage";
    case StudyKind::Budget: return "budget";
    case StudyKind::SigmaConsistency: return "sigma_consistency";
  }
  return "?";
}

StudyKind parse_study_kind(const std::string& text) {
  if (text == "rate") return StudyKind::Rate;
  if (text == "normality") return StudyKind::Normality;
  if (text == "coverage") return StudyKind::Coverage;
  if (text == "budget") return StudyKind::Budget;
  if (text == "sigma_consistency" || text == "sigma") return StudyKind::SigmaConsistency;
  throw Error(ErrorKind::InvalidArgument, kModule, "unknown study '" + text + "'");
}

bool StudyResult::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed; });
}

const Verdict* StudyResult::verdict(const std::string& name) const {
  for (const auto& v : verdicts) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

std::vector<const StudyRow*> StudyResult::arm(const std::string& name) const {
  std::vector<const StudyRow*> out;
  for (const auto& row : rows) {
    if (row.arm == name) out.push_back(&row);
  }
  return out;
}

std::uint64_t replication_seed(std::uint64_t seed, std::size_t arm, std::size_t grid_index, std::size_t rep) {
  const std::uint64_t key = static_cast<std::uint64_t>(rep) ^ (static_cast<std::uint64_t>(grid_index) << 32) ^
                            (static_cast<std::uint64_t>(arm) << 56);
  return seed ^ splitmix64(key);
}

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, kModule, "slope fit needs at least two (x, y) pairs");
  }
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

double step_integrand_sigma(double u, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, kModule, "step_integrand_sigma needs k >= 1");
  if (!(u > 0.0 && u < 1.0)) throw Error(ErrorKind::InvalidArgument, kModule, "step threshold must lie in (0, 1)");
  const double kd = static_cast<double>(k);
  const double cell = std::floor(u * kd);
  const double a = cell / kd;
  const double b = (cell + 1.0) / kd;
  return kd * (b - u) * (u - a);
}

StudyResult run_rate_study(const StudySpec& spec) {
  validate(spec, 2);
  const Context ctx = make_context(spec);
  StudyResult result = start_result(spec);
  for (std::size_t g = 0; g < spec.n_grid.size(); ++g) {
    const std::size_t n = spec.n_grid[g];
    const ControlBasis basis = make_basis(spec.basis_family, effective_m(spec, n), spec.dim);
    result.rows.push_back(run_arm(spec, ctx, basis, n, kOlsmcArm, g, "olsmc", oracle_sigma2(ctx, basis)).row);
    const ControlBasis none = ControlBasis::empty(ctx.domain);
    result.rows.push_back(run_arm(spec, ctx, none, n, kNaiveArm, g, "naive", ctx.sigma2_f).row);
  }
  fill_slopes(result, {"olsmc", "naive"});
  add_rmse_ratio_verdict(result, "olsmc");
  add_rmse_ratio_verdict(result, "naive");
  if (spec.slope_band) {
    const double slope = result.fitted_slope.value_or(std::numeric_limits<double>::quiet_NaN());
    add_band_verdict(result, "olsmc_slope_in_band", slope, *spec.slope_band);
  }
  if (spec.naive_slope_band) {
    const auto it = result.slopes.find("naive");
    add_band_verdict(result, "naive_slope_in_band",
                     it == result.slopes.end() ? std::numeric_limits<double>::quiet_NaN() : it->second,
                     *spec.naive_slope_band);
  }
  return result;
}

StudyResult run_normality_study(const StudySpec& spec) {
  validate(spec, 500);
  const Context ctx = make_context(spec);
  StudyResult result = start_result(spec);
  for (std::size_t g = 0; g < spec.n_grid.size(); ++g) {
    const std::size_t n = spec.n_grid[g];
    const ControlBasis basis = make_basis(spec.basis_family, effective_m(spec, n), spec.dim);
    const double sigma2 = oracle_sigma2(ctx, basis);
    require_nondegenerate(ctx, sigma2, n, basis.size());

    ArmRun run = run_arm(spec, ctx, basis, n, kOlsmcArm, g, "olsmc", sigma2);
    std::vector<double> by_estimate;
    std::vector<double> by_oracle;
    const double root_n = std::sqrt(static_cast<double>(n));
    for (const auto& o : run.outcomes) {
      if (!o.ok) continue;
      by_estimate.push_back(root_n * (o.mu_hat - ctx.mu) / std::sqrt(o.sigma2_hat));
      by_oracle.push_back(root_n * (o.mu_hat - ctx.mu) / std::sqrt(sigma2));
    }
    run.row.coverage = coverage_of(run.outcomes, ctx.mu, n, basis.size(), spec.alpha, spec.quantile);

    StudyRow oracle_row = run.row;
    oracle_row.arm = "olsmc_oracle_sigma";
    const KsResult ks = ks_test_standard_normal(std::move(by_estimate));
    run.row.ks_stat = ks.statistic;
    run.row.ks_pvalue = ks.p_value;
    const KsResult ks_oracle = ks_test_standard_normal(std::move(by_oracle));
    oracle_row.ks_stat = ks_oracle.statistic;
    oracle_row.ks_pvalue = ks_oracle.p_value;
    result.rows.push_back(run.row);
    result.rows.push_back(oracle_row);
  }
  const StudyRow* last = last_row(result, "olsmc");
  result.verdicts.push_back({"ks_pvalue_above_0.01", last->ks_pvalue > 0.01,
                             "p = " + std::to_string(last->ks_pvalue) + " at n = " + std::to_string(last->n)});
  add_band_verdict(result, "sigma_ratio_in_band", last->extra.at("sigma_ratio"), {0.9, 1.1});
  return result;
}

StudyResult run_coverage_study(const StudySpec& spec) {
  validate(spec, 500);
  const Context ctx = make_context(spec);
  StudyResult result = start_result(spec);
  const double nominal = 1.0 - spec.alpha;
  const double band = 3.0 * std::sqrt(spec.alpha * (1.0 - spec.alpha) / static_cast<double>(spec.reps));
  for (std::size_t g = 0; g < spec.n_grid.size(); ++g) {
    const std::size_t n = spec.n_grid[g];
    const ControlBasis basis = make_basis(spec.basis_family, effective_m(spec, n), spec.dim);
    ArmRun run = run_arm(spec, ctx, basis, n, kOlsmcArm, g, "normal", oracle_sigma2(ctx, basis));
    StudyRow t_row = run.row;
    t_row.arm = "student_t";
    run.row.coverage = coverage_of(run.outcomes, ctx.mu, n, basis.size(), spec.alpha, QuantileRule::Normal);
    t_row.coverage = coverage_of(run.outcomes, ctx.mu, n, basis.size(), spec.alpha, QuantileRule::StudentT);
    result.rows.push_back(run.row);
    result.rows.push_back(t_row);
  }
  const std::string main_arm = spec.quantile == QuantileRule::Normal ? "normal" : "student_t";
  add_band_verdict(result, "coverage_in_binomial_band", last_row(result, main_arm)->coverage,
                   {nominal - band, nominal + band});
  return result;
}

StudyResult run_budget_study(const StudySpec& spec) {
  validate(spec, 2);
  const Context ctx = make_context(spec);
  StudyResult result = start_result(spec);
  for (std::size_t g = 0; g < spec.n_grid.size(); ++g) {
    const std::size_t n = spec.n_grid[g];
    const ControlBasis basis = make_basis(spec.basis_family, effective_m(spec, n), spec.dim);
    const std::size_t m = basis.size();
    const double sigma2 = oracle_sigma2(ctx, basis);
    ArmRun ols = run_arm(spec, ctx, basis, n, kOlsmcArm, g, "olsmc", sigma2);
    const std::size_t matched_n = cost_model(n, m, spec.localized).naive_equivalent_n;
    ArmRun naive = run_arm(spec, ctx, ControlBasis::empty(ctx.domain), matched_n, kMatchedNaiveArm, g,
                           "naive_matched", ctx.sigma2_f);

    const double md = static_cast<double>(std::max<std::size_t>(m, 1));
    const double budget_factor = spec.localized ? std::sqrt(md) : md;
    const double predicted = std::sqrt(sigma2 / ctx.sigma2_f) * budget_factor;
    ols.row.extra["rmse_ratio_vs_naive"] = ols.row.rmse / naive.row.rmse;
    ols.row.extra["predicted_ratio"] = predicted;
    ols.row.extra["matched_n"] = static_cast<double>(matched_n);
    result.rows.push_back(ols.row);
    result.rows.push_back(naive.row);
  }
  fill_slopes(result, {"olsmc", "naive_matched"});
  const StudyRow* last = last_row(result, "olsmc");
  const double observed = last->extra.at("rmse_ratio_vs_naive");
  const double predicted = last->extra.at("predicted_ratio");
  std::ostringstream detail;
  detail << "observed RMSE ratio " << observed << ", predicted " << predicted << " at n = " << last->n;
  if (last->m == 0) {
    result.verdicts.push_back({"predicted_winner_observed", true, detail.str() + " (no controls: tie)"});
  } else {
    result.verdicts.push_back({"predicted_winner_observed", (observed < 1.0) == (predicted < 1.0), detail.str()});
  }
  return result;
}

StudyResult run_sigma_consistency_study(const StudySpec& spec) {
  validate(spec, 2);
  const Context ctx = make_context(spec);
  StudyResult result = start_result(spec);
  for (std::size_t g = 0; g < spec.n_grid.size(); ++g) {
    const std::size_t n = spec.n_grid[g];
    const ControlBasis basis = make_basis(spec.basis_family, effective_m(spec, n), spec.dim);
    const double sigma2 = oracle_sigma2(ctx, basis);
    require_nondegenerate(ctx, sigma2, n, basis.size());
    result.rows.push_back(run_arm(spec, ctx, basis, n, kOlsmcArm, g, "olsmc", sigma2).row);
  }
  add_band_verdict(result, "sigma_ratio_in_band", last_row(result, "olsmc")->extra.at("sigma_ratio"), {0.9, 1.1});
  return result;
}

StudyResult run_study(const StudySpec& spec) {
  switch (spec.study) {
    case StudyKind::Rate: return run_rate_study(spec);
    case StudyKind::Normality: return run_normality_study(spec);
    case StudyKind::Coverage: return run_coverage_study(spec);
    case StudyKind::Budget: return run_budget_study(spec);
    case StudyKind::SigmaConsistency: return run_sigma_consistency_study(spec);
  }
  throw Error(ErrorKind::InvalidArgument, kModule, "unknown study kind");
}

}  // namespace cvmc
