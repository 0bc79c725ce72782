#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvmc/bases.hpp"
#include "cvmc/estimator.hpp"
#include "cvmc/schedule.hpp"

namespace cvmc {

enum class StudyKind { Rate, Normality, Coverage, Budget, SigmaConsistency };

std::string to_string(StudyKind kind);
StudyKind parse_study_kind(const std::string& text);

using Band = std::pair<double, double>;

struct StudySpec {
  StudyKind study = StudyKind::Rate;
  std::string integrand_id = "exp";
  BasisFamily basis_family = BasisFamily::Legendre1d;
  std::size_t dim = 1;
  Schedule schedule = Schedule::constant(0);
  std::vector<std::size_t> n_grid;
  std::size_t reps = 200;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  EstimatorForm form = EstimatorForm::Regression;
  QuantileRule quantile = QuantileRule::Normal;
  bool localized = false;   // budget study: cost model for localized supports
  std::size_t threads = 1;  // 0 = hardware concurrency
  // Optional acceptance bands turned into verdicts.
  std::optional<Band> slope_band;
  std::optional<Band> naive_slope_band;
};

// One row per (n, arm).
struct StudyRow {
  std::string arm;
  std::size_t n = 0;
  std::size_t m = 0;
  double rmse = 0.0;
  double mean_sigma2_hat = 0.0;
  double oracle_sigma2 = 0.0;
  // NaN when the study does not measure it.
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double ks_stat = std::numeric_limits<double>::quiet_NaN();
  double ks_pvalue = std::numeric_limits<double>::quiet_NaN();
  std::size_t failures = 0;
  std::size_t op_count = 0;
  std::int64_t wallclock_ns = 0;
  // Study-specific derived quantities (rmse_ratio, sigma_ratio, ...).
  std::map<std::string, double> extra;
};

struct Verdict {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct StudyResult {
  StudySpec spec;
  std::vector<StudyRow> rows;
  std::optional<double> fitted_slope;   // log RMSE vs log n for the main arm
  std::map<std::string, double> slopes;  // per arm
  std::vector<Verdict> verdicts;

  bool passed() const;
  const Verdict* verdict(const std::string& name) const;
  std::vector<const StudyRow*> arm(const std::string& name) const;
};

// Studies abort when more than this fraction of replications fail.
inline constexpr double kMaxFailureRate = 0.01;

// Seed of replication r of stream `stream`: seed ^ splitmix64(key) with the
// key mixing r, grid index and arm so every replication is independent.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t arm, std::size_t grid_index, std::size_t rep);

// Least-squares slope of log(y) against log(x).
double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// sigma_n^2 for f = 1{x >= u} projected on k equal cells:
// k (b - u)(u - a) with a = floor(u k) / k, b = a + 1 / k.
double step_integrand_sigma(double u, std::size_t k);

StudyResult run_rate_study(const StudySpec& spec);
StudyResult run_normality_study(const StudySpec& spec);
StudyResult run_coverage_study(const StudySpec& spec);
StudyResult run_budget_study(const StudySpec& spec);
StudyResult run_sigma_consistency_study(const StudySpec& spec);
StudyResult run_study(const StudySpec& spec);

}  // namespace cvmc
