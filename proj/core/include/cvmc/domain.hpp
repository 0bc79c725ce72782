#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace cvmc {

enum class DomainKind {
  UnitInterval,   // [0, 1]
  SymInterval,    // [-1, 1]
  UnitCube,       // [0, 1]^d
  SymCube,        // [-1, 1]^d
};

// Support S of the reference distribution P, which is always uniform on S.
class Domain {
 public:
  static Domain unit_interval() { return Domain(DomainKind::UnitInterval, 1); }
  static Domain sym_interval() { return Domain(DomainKind::SymInterval, 1); }
  static Domain unit_cube(std::size_t dim);
  static Domain sym_cube(std::size_t dim);

  DomainKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }

  // Per-axis bounds; every axis shares them.
  double lower() const noexcept;
  double upper() const noexcept;
  double width() const noexcept { return upper() - lower(); }

  bool contains(std::span<const double> x) const noexcept;

  // "unit_interval_01", "interval_m1_p1", "unit_cube(3)", "cube_m1_p1(2)"
  std::string name() const;
  static Domain parse(const std::string& name);

  friend bool operator==(const Domain&, const Domain&) = default;

 private:
  Domain(DomainKind kind, std::size_t dim) : kind_(kind), dim_(dim) {}

  DomainKind kind_;
  std::size_t dim_;
};

}  // namespace cvmc
