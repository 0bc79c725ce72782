#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cvmc/bases.hpp"
#include "cvmc/estimator.hpp"
#include "cvmc/experiments.hpp"
#include "cvmc/schedule.hpp"

namespace cvmc::cli {

enum class Subcommand { Estimate, Diagnose, Study };
enum class OutputFormat { Csv, Json };

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 2;
inline constexpr int kExitVerdictFailed = 3;

struct CliConfig {
  Subcommand subcommand = Subcommand::Estimate;
  StudyKind study = StudyKind::Rate;  // study subcommand only

  // Corpus id, or "affine:a,b1,...,bm" meaning a + sum_j b_j h_j.
  std::string integrand = "exp";
  BasisFamily basis = BasisFamily::Legendre1d;
  std::size_t dim = 1;
  Schedule m = Schedule::constant(0);
  // Extra schedules whose growth rule diagnose reports on; empty means the
  // defaults n^1/4, n^1/3, n^1/2.
  std::vector<Schedule> diagnose_schedules;
  std::vector<std::size_t> n{1000};
  std::size_t reps = 200;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  EstimatorForm form = EstimatorForm::Regression;
  QuantileRule quantile = QuantileRule::Normal;
  bool localized = false;
  std::size_t threads = 1;
  std::optional<Band> slope_band;
  std::optional<Band> naive_slope_band;
  // Off: wallclock_ns is written as 0 so repeated runs are byte-identical.
  bool timing = true;
  std::string out;  // empty: write results to stdout
  OutputFormat format = OutputFormat::Csv;
  // Writes the resolved configuration as JSON before running.
  std::string save_config;
};

// Thrown by parse_config for -h / --help; carries the help text.
struct HelpRequested {
  std::string text;
};

// Parses arguments without the program name. Throws Error(UsageError) naming
// the offending flag. A --config file supplies defaults that explicit flags
// override; CVMC_SEED in the environment overrides --seed.
CliConfig parse_config(const std::vector<std::string>& args);

std::string config_to_json(const CliConfig& config);
CliConfig config_from_json(const std::string& text);

// Runs the subcommand. Results go to config.out (or `out` when empty), the
// one-line summary to `out` (or `err` when results already use `out`), and
// errors to `err`. Returns kExitOk, kExitError or kExitVerdictFailed.
int run(const CliConfig& config, std::ostream& out, std::ostream& err);

// Parse and run; usage errors print help text and return kExitError.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

StudySpec make_study_spec(const CliConfig& config);

inline constexpr const char* kStudyCsvHeader =
    "n,m,rmse,mean_sigma2_hat,oracle_sigma2,coverage,ks_stat,ks_pvalue,failures,op_count,wallclock_ns";

std::string study_to_csv(const StudyResult& result, bool timing = true);
std::string study_to_json(const StudyResult& result, bool timing = true);

std::string estimate_summary(const EstimateReport& report);

}  // namespace cvmc::cli
