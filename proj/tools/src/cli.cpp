#include "cvmc/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cvmc/corpus.hpp"
#include "cvmc/diagnostics.hpp"
#include "cvmc/error.hpp"
#include "cvmc/sampling.hpp"

namespace cvmc::cli {
namespace {

using nlohmann::json;

constexpr const char* kModule = "cli";
constexpr const char* kVersion = "0.1.0";

[[noreturn]] void usage(const std::string& flag, const std::string& what) {
  throw Error(ErrorKind::UsageError, kModule, flag + ": " + what);
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  const auto last = s.find_last_not_of(" \t");
  return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, sep)) parts.push_back(trim(part));
  return parts;
}

std::uint64_t parse_u64(const std::string& flag, const std::string& text) {
  std::uint64_t value = 0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    usage(flag, "expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

std::size_t parse_size(const std::string& flag, const std::string& text, std::size_t min) {
  const auto value = static_cast<std::size_t>(parse_u64(flag, text));
  if (value < min) usage(flag, "must be >= " + std::to_string(min) + ", got " + text);
  return value;
}

double parse_real(const std::string& flag, const std::string& text) {
  double value = 0.0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    usage(flag, "expected a number, got '" + text + "'");
  }
  return value;
}

std::vector<std::size_t> parse_grid(const std::string& flag, const std::string& text) {
  std::vector<std::size_t> grid;
  for (const auto& part : split(text, ',')) grid.push_back(parse_size(flag, part, 1));
  if (grid.empty()) usage(flag, "expected a comma-separated list of sample sizes");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (grid[k] <= grid[k - 1]) usage(flag, "sample sizes must be strictly increasing");
  }
  return grid;
}

Band parse_band(const std::string& flag, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) usage(flag, "expected 'low,high', got '" + text + "'");
  const Band band{parse_real(flag, parts[0]), parse_real(flag, parts[1])};
  if (band.first > band.second) usage(flag, "low must not exceed high");
  return band;
}

Schedule parse_m(const std::string& flag, const std::string& text) {
  const auto t = trim(text);
  if (!t.empty() && t.front() == '-') usage(flag, "m must be ≥ 0");
  try {
    return Schedule::parse(t);
  } catch (const Error&) {
    usage(flag, "expected an integer m >= 0 or a schedule such as n^1/3 or 2*n^0.25, got '" + text + "'");
  }
}

// "affine:a,b1,...,bm" -> {a, b1, ..., bm}; nullopt for corpus ids.
std::optional<std::vector<double>> affine_coefficients(const std::string& id) {
  constexpr std::string_view prefix = "affine:";
  if (id.rfind(prefix, 0) != 0) return std::nullopt;
  std::vector<double> coef;
  for (const auto& part : split(id.substr(prefix.size()), ',')) coef.push_back(parse_real("--integrand", part));
  if (coef.empty()) usage("--integrand", "affine needs at least an intercept");
  return coef;
}

std::string subcommand_name(Subcommand s) {
  switch (s) {
    case Subcommand::Estimate: return "estimate";
    case Subcommand::Diagnose: return "diagnose";
    case Subcommand::Study: return "study";
  }
  return "?";
}

Subcommand parse_subcommand(const std::string& text) {
  if (text == "estimate") return Subcommand::Estimate;
  if (text == "diagnose") return Subcommand::Diagnose;
  if (text == "study") return Subcommand::Study;
  usage("subcommand", "expected estimate, diagnose or study, got '" + text + "'");
}

// Raw flag text; only flags that were given are applied over the defaults.
struct RawFlags {
  std::optional<std::string> integrand, basis, dim, m, n, n_grid, reps, alpha, seed, form, quantile, threads, out,
      format, config, save_config, slope_band, naive_slope_band;
  std::vector<std::string> schedules;
  std::string study_kind;
  bool localized = false;
  bool no_timing = false;
};

void add_flags(CLI::App& sub, RawFlags& raw) {
  sub.add_option("--integrand", raw.integrand, "Corpus id (exp, abs_shift, step:0.3, ...) or affine:a,b1,...,bm");
  sub.add_option("--basis", raw.basis, "indicator | legendre | legendre_tensor");
  sub.add_option("--dim", raw.dim, "Dimension for legendre_tensor and indicator bases");
  sub.add_option("--m", raw.m, "Number of controls: an integer or a schedule such as n^1/3");
  sub.add_option("--schedule", raw.schedules, "Schedule m(n); repeatable for diagnose");
  sub.add_option("--n", raw.n, "Sample size, or a comma-separated grid");
  sub.add_option("--n-grid", raw.n_grid, "Comma-separated, strictly increasing sample sizes");
  sub.add_option("--reps", raw.reps, "Replications per grid point");
  sub.add_option("--alpha", raw.alpha, "Interval level is 1 - alpha");
  sub.add_option("--seed", raw.seed, "Base seed (CVMC_SEED overrides)");
  sub.add_option("--form", raw.form, "regression | projection");
  sub.add_option("--quantile", raw.quantile, "normal | student_t");
  sub.add_option("--threads", raw.threads, "Worker threads, 0 = all cores");
  sub.add_flag("--localized", raw.localized, "Budget study: localized cost model (n m instead of n m^2)");
  sub.add_option("--slope-band", raw.slope_band, "low,high band for the fitted OLSMC slope");
  sub.add_option("--naive-slope-band", raw.naive_slope_band, "low,high band for the naive-MC slope");
  sub.add_flag("--no-timing", raw.no_timing, "Write wallclock_ns as 0");
  sub.add_option("--out", raw.out, "Output file (default: stdout)");
  sub.add_option("--format", raw.format, "csv | json");
  sub.add_option("--config", raw.config, "JSON config file; explicit flags override it");
  sub.add_option("--save-config", raw.save_config, "Write the resolved config as JSON");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) usage("--config", "cannot read '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void check_writable(const std::string& flag, const std::string& path) {
  if (path.empty()) return;
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    usage(flag, "directory '" + parent.string() + "' does not exist");
  }
  if (std::filesystem::is_directory(path)) usage(flag, "'" + path + "' is a directory");
}

void validate(CliConfig& c) {
  if (c.basis == BasisFamily::Custom) usage("--basis", "custom bases are library-only");
  if (c.dim == 0) usage("--dim", "must be >= 1");
  if (c.basis == BasisFamily::Legendre1d && c.dim != 1) usage("--dim", "legendre is one-dimensional");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) usage("--alpha", "must lie in (0, 1)");
  if (c.n.empty()) usage("--n", "missing sample size");
  if (c.subcommand == Subcommand::Estimate && c.n.size() != 1) usage("--n", "estimate takes a single sample size");
  if (c.subcommand == Subcommand::Study && c.reps < 2) usage("--reps", "must be >= 2");
  check_writable("--out", c.out);
  check_writable("--save-config", c.save_config);

  if (c.subcommand == Subcommand::Diagnose) return;  // no integrand involved
  const Domain domain = family_domain(c.basis, c.dim);
  if (const auto coef = affine_coefficients(c.integrand)) {
    if (c.subcommand == Subcommand::Study) usage("--integrand", "studies need a corpus integrand");
    const std::size_t m = c.m(c.n.front());
    if (coef->size() != m + 1) {
      usage("--integrand", "affine needs 1 + m = " + std::to_string(m + 1) + " coefficients, got " +
                               std::to_string(coef->size()));
    }
  } else {
    try {
      make_integrand(c.integrand, domain);
    } catch (const Error& e) {
      usage("--integrand", e.what());
    }
  }
}

json band_json(const std::optional<Band>& band) {
  if (!band) return nullptr;
  return json::array({band->first, band->second});
}

std::optional<Band> band_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return Band{j.at(0).get<double>(), j.at(1).get<double>()};
}

json spec_json(const StudySpec& spec) {
  return {{"study", to_string(spec.study)},
          {"integrand", spec.integrand_id},
          {"basis", to_string(spec.basis_family)},
          {"dim", spec.dim},
          {"schedule", spec.schedule.to_string()},
          {"n_grid", spec.n_grid},
          {"reps", spec.reps},
          {"alpha", spec.alpha},
          {"seed", spec.seed},
          {"form", to_string(spec.form)},
          {"quantile", to_string(spec.quantile)},
          {"localized", spec.localized},
          {"threads", spec.threads},
          {"slope_band", band_json(spec.slope_band)},
          {"naive_slope_band", band_json(spec.naive_slope_band)}};
}

// Shortest text that reads back to the same double.
std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, v);
  return std::string(buffer, ptr);
}

std::string short_number(double v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

void write_output(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorKind::InvalidArgument, kModule, "cannot write '" + path + "'");
  file << text;
}

ControlBasis build_basis(const CliConfig& c, std::size_t n) {
  return make_basis(c.basis, c.m(n), c.dim);
}

Integrand build_integrand(const CliConfig& c, const ControlBasis& basis) {
  if (const auto coef = affine_coefficients(c.integrand)) {
    return make_affine_integrand(coef->front(), std::vector<double>(coef->begin() + 1, coef->end()), basis);
  }
  return make_integrand(c.integrand, basis.domain());
}

std::string report_csv(const EstimateReport& r) {
  std::ostringstream out;
  out << "mu_hat,sigma2_hat,sigma2_hat_dof,ci_low,ci_high,alpha,n,m,denom,method\n"
      << number(r.mu_hat) << ',' << number(r.sigma2_hat) << ',' << number(r.sigma2_hat_dof) << ','
      << number(r.ci_low) << ',' << number(r.ci_high) << ',' << number(r.alpha) << ',' << r.n << ',' << r.m << ','
      << number(r.denom) << ',' << to_string(r.method) << '\n';
  return out.str();
}

json report_json(const EstimateReport& r, const CliConfig& c) {
  std::vector<double> beta(r.beta.data(), r.beta.data() + r.beta.size());
  return {{"config", json::parse(config_to_json(c))},
          {"report",
           {{"mu_hat", r.mu_hat},
            {"sigma2_hat", r.sigma2_hat},
            {"sigma2_hat_dof", r.sigma2_hat_dof},
            {"ci_low", r.ci_low},
            {"ci_high", r.ci_high},
            {"alpha", r.alpha},
            {"n", r.n},
            {"m", r.m},
            {"denom", r.denom},
            {"method", to_string(r.method)},
            {"beta", beta}}},
          {"version", kVersion}};
}

int run_estimate(const CliConfig& c, std::ostream& out) {
  const std::size_t n = c.n.front();
  const ControlBasis basis = build_basis(c, n);
  const Integrand f = build_integrand(c, basis);
  const SamplePoints samples = draw_samples(basis.domain(), n, c.seed);
  EstimateOptions options;
  options.alpha = c.alpha;
  options.form = c.form;
  options.quantile = c.quantile;
  const EstimateReport report = olsmc(f, samples, basis, options);
  if (!c.out.empty()) {
    write_output(c.out, c.format == OutputFormat::Csv ? report_csv(report) : report_json(report, c).dump(2) + "\n",
                 out);
  }
  out << estimate_summary(report) << '\n';
  return kExitOk;
}

std::vector<std::size_t> growth_grid(const CliConfig& c) {
  if (c.n.size() >= 2) return c.n;
  return {1u << 8, 1u << 10, 1u << 12, 1u << 14, 1u << 16};
}

int run_diagnose(const CliConfig& c, std::ostream& out) {
  const std::size_t n = c.n.front();
  const ControlBasis basis = build_basis(c, n);
  const std::size_t m = basis.size();

  json doc = {{"basis", to_string(c.basis)}, {"dim", c.dim}, {"m", m}, {"version", kVersion}};
  std::ostringstream text;
  text << "basis = " << to_string(c.basis) << ", dim = " << c.dim << ", m = " << m << '\n';

  if (m > 0) {
    const SupLeverage sup = sup_leverage(basis);
    text << "sup_q = " << short_number(sup.value) << (sup.analytic ? " (analytic)" : " (probe-grid lower bound)")
         << '\n';
    doc["sup_q"] = sup.value;
    doc["sup_q_analytic"] = sup.analytic;
    if (basis.domain().dim() <= kMaxQuadratureDim) {
      const double mean_q = mean_leverage(basis);
      text << "mean_q = " << short_number(mean_q) << '\n';
      doc["mean_q"] = mean_q;
    }
    if (n >= m + 1) {
      const SamplePoints samples = draw_samples(basis.domain(), n, c.seed);
      const LeverageProfile profile = leverage_profile(basis, samples);
      text << "empirical (n = " << n << "): trace = " << short_number(profile.empirical_leverages.sum())
           << ", max leverage = " << short_number(profile.max_empirical) << ", above " << profile.c
           << " m/n = " << profile.high_leverage_flags.size() << '\n';
      doc["empirical"] = {{"n", n},
                          {"trace", profile.empirical_leverages.sum()},
                          {"max_leverage", profile.max_empirical},
                          {"high_leverage_count", profile.high_leverage_flags.size()}};
    }
  } else {
    text << "sup_q = 0 (no controls)\nmean_q = 0\n";
    doc["sup_q"] = 0.0;
    doc["mean_q"] = 0.0;
  }

  std::vector<Schedule> schedules = c.diagnose_schedules;
  if (schedules.empty()) {
    for (const char* s : {"n^1/4", "n^1/3", "n^1/2"}) schedules.push_back(Schedule::parse(s));
  }
  const auto grid = growth_grid(c);
  std::ostringstream csv;
  csv << "schedule,n,m,sup_q,ratio,passed\n";
  doc["growth"] = json::array();
  for (const auto& schedule : schedules) {
    const GrowthVerdict v = check_growth_rule(c.basis, schedule, grid);
    text << "growth m = " << schedule.to_string() << ": " << (v.passed ? "PASS" : "FAIL") << " (sup_q m / n:";
    json rows = json::array();
    for (const auto& row : v.rows) {
      text << ' ' << short_number(row.ratio);
      rows.push_back({{"n", row.n}, {"m", row.m}, {"sup_q", row.sup_q}, {"ratio", row.ratio}});
      csv << schedule.to_string() << ',' << row.n << ',' << row.m << ',' << number(row.sup_q) << ','
          << number(row.ratio) << ',' << (v.passed ? "true" : "false") << '\n';
    }
    text << "; sufficient " << v.sufficient_rule << ": " << (v.schedule_within_rule ? "yes" : "no") << ")\n";
    doc["growth"].push_back({{"schedule", schedule.to_string()},
                             {"rows", rows},
                             {"decreasing", v.decreasing},
                             {"sufficient_rule", v.sufficient_rule},
                             {"schedule_within_rule", v.schedule_within_rule},
                             {"passed", v.passed}});
  }
  if (!c.out.empty()) write_output(c.out, c.format == OutputFormat::Csv ? csv.str() : doc.dump(2) + "\n", out);
  out << text.str();
  return kExitOk;
}

std::string study_summary(const StudyResult& result) {
  std::ostringstream out;
  out << "study " << to_string(result.spec.study) << ": " << (result.passed() ? "PASS" : "FAIL");
  std::size_t passed = 0;
  std::vector<std::string> failed;
  for (const auto& v : result.verdicts) {
    if (v.passed) ++passed;
    else failed.push_back(v.name + " (" + v.detail + ")");
  }
  out << " (" << passed << '/' << result.verdicts.size() << " verdicts";
  for (const auto& [arm, slope] : result.slopes) out << "; slope " << arm << ' ' << short_number(slope);
  out << ')';
  for (const auto& f : failed) out << "; failed " << f;
  return out.str();
}

int run_study_command(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const StudyResult result = run_study(make_study_spec(c));
  const std::string data =
      c.format == OutputFormat::Csv ? study_to_csv(result, c.timing) : study_to_json(result, c.timing) + "\n";
  write_output(c.out, data, out);
  (c.out.empty() ? err : out) << study_summary(result) << '\n';
  return result.passed() ? kExitOk : kExitVerdictFailed;
}

}  // namespace

CliConfig parse_config(const std::vector<std::string>& args) {
  CLI::App app{"Control-variate Monte Carlo integration by least squares", "cvmc"};
  app.require_subcommand(1, 1);
  RawFlags raw;
  CLI::App* estimate = app.add_subcommand("estimate", "Estimate one integral with OLS control variates");
  CLI::App* diagnose = app.add_subcommand("diagnose", "Leverage diagnostics and growth-rule checks for a basis");
  CLI::App* study = app.add_subcommand("study", "Replication study: rate | normality | coverage | budget | sigma_consistency");
  study->add_option("kind", raw.study_kind, "rate | normality | coverage | budget | sigma_consistency");
  for (CLI::App* sub : {estimate, diagnose, study}) add_flags(*sub, raw);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help()};
  } catch (const CLI::ParseError& e) {
    throw Error(ErrorKind::UsageError, kModule, e.what());
  }

  CliConfig c;
  if (raw.config) {
    try {
      c = config_from_json(read_file(*raw.config));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::UsageError) throw;
      usage("--config", e.what());
    }
  }
  const bool from_file = raw.config.has_value();
  const Subcommand previous = c.subcommand;
  c.subcommand = estimate->parsed() ? Subcommand::Estimate : diagnose->parsed() ? Subcommand::Diagnose : Subcommand::Study;

  if (c.subcommand == Subcommand::Study) {
    if (!raw.study_kind.empty()) {
      try {
        c.study = parse_study_kind(raw.study_kind);
      } catch (const Error&) {
        usage("study", "unknown study kind '" + raw.study_kind + "'");
      }
    } else if (!from_file || previous != Subcommand::Study) {
      usage("study", "missing study kind (rate, normality, coverage, budget, sigma_consistency)");
    }
  }

  if (raw.integrand) c.integrand = trim(*raw.integrand);
  if (raw.basis) {
    try {
      c.basis = parse_basis_family(*raw.basis);
    } catch (const Error&) {
      usage("--basis", "expected indicator, legendre or legendre_tensor, got '" + *raw.basis + "'");
    }
    if (c.basis == BasisFamily::Legendre1d && !raw.dim) c.dim = 1;
  }
  if (raw.dim) c.dim = parse_size("--dim", *raw.dim, 1);

  if (raw.m) c.m = parse_m("--m", *raw.m);
  if (!raw.schedules.empty()) {
    std::vector<Schedule> parsed;
    for (const auto& s : raw.schedules) parsed.push_back(parse_m("--schedule", s));
    if (c.subcommand == Subcommand::Diagnose) {
      c.diagnose_schedules = parsed;
    } else {
      if (parsed.size() > 1) usage("--schedule", "give a single schedule");
      if (raw.m && !(parsed.front() == c.m)) usage("--schedule", "conflicts with --m");
      c.m = parsed.front();
    }
  }
  if (raw.n && raw.n_grid) usage("--n-grid", "give either --n or --n-grid");
  if (raw.n) c.n = parse_grid("--n", *raw.n);
  if (raw.n_grid) c.n = parse_grid("--n-grid", *raw.n_grid);
  if (raw.reps) c.reps = parse_size("--reps", *raw.reps, 1);
  if (raw.alpha) c.alpha = parse_real("--alpha", *raw.alpha);
  if (raw.seed) c.seed = parse_u64("--seed", *raw.seed);
  if (const char* env = std::getenv("CVMC_SEED"); env != nullptr && *env != '\0') c.seed = parse_u64("CVMC_SEED", env);
  if (raw.form) {
    try {
      c.form = parse_form(*raw.form);
    } catch (const Error&) {
      usage("--form", "expected regression or projection, got '" + *raw.form + "'");
    }
  }
  if (raw.quantile) {
    try {
      c.quantile = parse_quantile_rule(*raw.quantile);
    } catch (const Error&) {
      usage("--quantile", "expected normal or student_t, got '" + *raw.quantile + "'");
    }
  }
  if (raw.threads) c.threads = parse_size("--threads", *raw.threads, 0);
  if (raw.localized) c.localized = true;
  if (raw.slope_band) c.slope_band = parse_band("--slope-band", *raw.slope_band);
  if (raw.naive_slope_band) c.naive_slope_band = parse_band("--naive-slope-band", *raw.naive_slope_band);
  if (raw.no_timing) c.timing = false;
  if (raw.out) c.out = *raw.out;
  if (raw.format) {
    if (*raw.format == "csv") c.format = OutputFormat::Csv;
    else if (*raw.format == "json") c.format = OutputFormat::Json;
    else usage("--format", "expected csv or json, got '" + *raw.format + "'");
  }
  if (raw.save_config) c.save_config = *raw.save_config;
  validate(c);
  return c;
}

std::string config_to_json(const CliConfig& c) {
  std::vector<std::string> schedules;
  for (const auto& s : c.diagnose_schedules) schedules.push_back(s.to_string());
  const json j = {{"subcommand", subcommand_name(c.subcommand)},
                  {"study", to_string(c.study)},
                  {"integrand", c.integrand},
                  {"basis", to_string(c.basis)},
                  {"dim", c.dim},
                  {"m", c.m.to_string()},
                  {"diagnose_schedules", schedules},
                  {"n", c.n},
                  {"reps", c.reps},
                  {"alpha", c.alpha},
                  {"seed", c.seed},
                  {"form", to_string(c.form)},
                  {"quantile", to_string(c.quantile)},
                  {"localized", c.localized},
                  {"threads", c.threads},
                  {"slope_band", band_json(c.slope_band)},
                  {"naive_slope_band", band_json(c.naive_slope_band)},
                  {"timing", c.timing},
                  {"out", c.out},
                  {"format", c.format == OutputFormat::Csv ? "csv" : "json"}};
  return j.dump(2);
}

CliConfig config_from_json(const std::string& text) {
  CliConfig c;
  try {
    const json j = json::parse(text);
    c.subcommand = parse_subcommand(j.value("subcommand", "estimate"));
    c.study = parse_study_kind(j.value("study", "rate"));
    c.integrand = j.value("integrand", c.integrand);
    c.basis = parse_basis_family(j.value("basis", to_string(c.basis)));
    c.dim = j.value("dim", c.dim);
    c.m = Schedule::parse(j.value("m", c.m.to_string()));
    c.diagnose_schedules.clear();
    for (const auto& s : j.value("diagnose_schedules", std::vector<std::string>{})) {
      c.diagnose_schedules.push_back(Schedule::parse(s));
    }
    c.n = j.value("n", c.n);
    c.reps = j.value("reps", c.reps);
    c.alpha = j.value("alpha", c.alpha);
    c.seed = j.value("seed", c.seed);
    c.form = parse_form(j.value("form", to_string(c.form)));
    c.quantile = parse_quantile_rule(j.value("quantile", to_string(c.quantile)));
    c.localized = j.value("localized", c.localized);
    c.threads = j.value("threads", c.threads);
    if (j.contains("slope_band")) c.slope_band = band_from(j.at("slope_band"));
    if (j.contains("naive_slope_band")) c.naive_slope_band = band_from(j.at("naive_slope_band"));
    c.timing = j.value("timing", c.timing);
    c.out = j.value("out", c.out);
    const std::string format = j.value("format", "csv");
    if (format != "csv" && format != "json") usage("format", "expected csv or json");
    c.format = format == "csv" ? OutputFormat::Csv : OutputFormat::Json;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::UsageError, kModule, std::string("config JSON: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UsageError) throw;
    throw Error(ErrorKind::UsageError, kModule, std::string("config JSON: ") + e.what());
  }
  return c;
}

StudySpec make_study_spec(const CliConfig& c) {
  StudySpec spec;
  spec.study = c.study;
  spec.integrand_id = c.integrand;
  spec.basis_family = c.basis;
  spec.dim = c.dim;
  spec.schedule = c.m;
  spec.n_grid = c.n;
  spec.reps = c.reps;
  spec.alpha = c.alpha;
  spec.seed = c.seed;
  spec.form = c.form;
  spec.quantile = c.quantile;
  spec.localized = c.localized;
  spec.threads = c.threads;
  spec.slope_band = c.slope_band;
  spec.naive_slope_band = c.naive_slope_band;
  return spec;
}

std::string study_to_csv(const StudyResult& result, bool timing) {
  std::ostringstream out;
  out << kStudyCsvHeader << '\n';
  for (const auto& r : result.rows) {
    out << r.n << ',' << r.m << ',' << number(r.rmse) << ',' << number(r.mean_sigma2_hat) << ','
        << number(r.oracle_sigma2) << ',' << number(r.coverage) << ',' << number(r.ks_stat) << ','
        << number(r.ks_pvalue) << ',' << r.failures << ',' << r.op_count << ',' << (timing ? r.wallclock_ns : 0)
        << '\n';
  }
  return out.str();
}

std::string study_to_json(const StudyResult& result, bool timing) {
  json rows = json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"arm", r.arm},
                    {"n", r.n},
                    {"m", r.m},
                    {"rmse", r.rmse},
                    {"mean_sigma2_hat", r.mean_sigma2_hat},
                    {"oracle_sigma2", r.oracle_sigma2},
                    {"coverage", r.coverage},
                    {"ks_stat", r.ks_stat},
                    {"ks_pvalue", r.ks_pvalue},
                    {"failures", r.failures},
                    {"op_count", r.op_count},
                    {"wallclock_ns", timing ? r.wallclock_ns : 0},
                    {"extra", r.extra}});
  }
  json verdicts = json::array();
  for (const auto& v : result.verdicts) verdicts.push_back({{"name", v.name}, {"passed", v.passed}, {"detail", v.detail}});
  json doc = {{"spec", spec_json(result.spec)}, {"rows", rows}, {"verdicts", verdicts}, {"version", kVersion}};
  if (!result.slopes.empty()) doc["slopes"] = result.slopes;
  return doc.dump(2);
}

std::string estimate_summary(const EstimateReport& r) {
  std::ostringstream out;
  out << std::setprecision(12) << "mu_hat = " << r.mu_hat << " ± " << std::setprecision(6) << r.half_width()
      << " (" << std::setprecision(4) << 100.0 * (1.0 - r.alpha) << "% CI; n = " << r.n << ", m = " << r.m
      << ", " << to_string(r.method) << ')';
  return out.str();
}

int run(const CliConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (!config.save_config.empty()) write_output(config.save_config, config_to_json(config) + "\n", out);
    switch (config.subcommand) {
      case Subcommand::Estimate: return run_estimate(config, out);
      case Subcommand::Diagnose: return run_diagnose(config, out);
      case Subcommand::Study: return run_study_command(config, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << kModule << ": " << e.what() << '\n';
  }
  return kExitError;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig config;
  try {
    config = parse_config(args);
  } catch (const HelpRequested& help) {
    out << help.text;
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\nrun 'cvmc --help' for usage\n";
    return kExitError;
  }
  return run(config, out, err);
}

}  // namespace cvmc::cli
