#include "cvmc/schedule.hpp"

#include <cmath>
#include <regex>
#include <sstream>

#include "cvmc/error.hpp"

namespace cvmc {

Schedule Schedule::constant(std::size_t m) { return Schedule(true, static_cast<double>(m), 0.0); }

Schedule Schedule::power(double coef, double exponent) {
  if (!(coef > 0.0) || !std::isfinite(coef) || !std::isfinite(exponent) || exponent < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "core", "power schedule needs coef > 0 and exponent >= 0");
  }
  return Schedule(false, coef, exponent);
}

Schedule Schedule::parse(const std::string& text) {
  std::string s;
  for (char c : text) {
    if (c != ' ') s.push_back(c);
  }
  static const std::regex integer(R"(\d+)");
  static const std::regex power_re(
      R"((?:(\d+(?:\.\d*)?|\.\d+)\*?)?n\^\(?(\d+(?:\.\d*)?|\.\d+)(?:/(\d+(?:\.\d*)?))?\)?)");
  std::smatch match;
  if (std::regex_match(s, integer)) return constant(static_cast<std::size_t>(std::stoull(s)));
  if (std::regex_match(s, match, power_re)) {
    const double coef = match[1].matched ? std::stod(match[1].str()) : 1.0;
    double exponent = std::stod(match[2].str());
    if (match[3].matched) {
      const double den = std::stod(match[3].str());
      if (den == 0.0) throw Error(ErrorKind::InvalidArgument, "core", "schedule exponent divides by zero");
      exponent /= den;
    }
    return power(coef, exponent);
  }
  throw Error(ErrorKind::InvalidArgument, "core",
              "schedule '" + text + "' is neither an integer nor of the form [c*]n^p");
}

std::size_t Schedule::operator()(std::size_t n) const {
  if (constant_) return static_cast<std::size_t>(coef_);
  // The slack keeps exact powers such as 4096^(1/3) = 16 from rounding down.
  const double value = coef_ * std::pow(static_cast<double>(n), exponent_);
  return static_cast<std::size_t>(std::floor(value * (1.0 + 1e-12) + 1e-9));
}

std::string Schedule::to_string() const {
  if (constant_) return std::to_string(static_cast<std::size_t>(coef_));
  std::ostringstream out;
  out.precision(17);
  if (coef_ != 1.0) out << coef_ << "*";
  out << "n^";
  // Small rational exponents print as p/q; parse() rebuilds the same double.
  for (int q = 1; q <= 12; ++q) {
    const double p = std::round(exponent_ * q);
    if (p / q == exponent_) {
      out << static_cast<long long>(p);
      if (q > 1) out << '/' << q;
      return out.str();
    }
  }
  out << exponent_;
  return out.str();
}

}  // namespace cvmc
