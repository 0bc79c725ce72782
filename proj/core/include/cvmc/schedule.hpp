#pragma once

#include <cstddef>
#include <string>

namespace cvmc {

// Number of control variates as a function of the sample size:
// either a constant k or floor(c * n^p).
class Schedule {
 public:
  static Schedule constant(std::size_t m);
  static Schedule power(double coef, double exponent);

  // Accepts "8", "n^1/3", "n^0.25", "2*n^1/4", "0.5n^(1/3)".
  static Schedule parse(const std::string& text);

  std::size_t operator()(std::size_t n) const;

  bool is_constant() const noexcept { return constant_; }
  double coef() const noexcept { return coef_; }
  double exponent() const noexcept { return exponent_; }

  // Canonical text that parse() maps back to the same schedule.
  std::string to_string() const;

  friend bool operator==(const Schedule&, const Schedule&) = default;

 private:
  Schedule(bool constant, double coef, double exponent)
      : constant_(constant), coef_(coef), exponent_(exponent) {}

  bool constant_;
  double coef_;
  double exponent_;
};

}  // namespace cvmc
