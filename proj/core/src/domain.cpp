#include "cvmc/domain.hpp"

#include <regex>

#include "cvmc/error.hpp"

namespace cvmc {

Domain Domain::unit_cube(std::size_t dim) {
  if (dim == 0) throw Error(ErrorKind::InvalidArgument, "core", "cube dimension must be >= 1");
  return Domain(DomainKind::UnitCube, dim);
}

Domain Domain::sym_cube(std::size_t dim) {
  if (dim == 0) throw Error(ErrorKind::InvalidArgument, "core", "cube dimension must be >= 1");
  return Domain(DomainKind::SymCube, dim);
}

double Domain::lower() const noexcept {
  return (kind_ == DomainKind::UnitInterval || kind_ == DomainKind::UnitCube) ? 0.0 : -1.0;
}

double Domain::upper() const noexcept { return 1.0; }

bool Domain::contains(std::span<const double> x) const noexcept {
  if (x.size() != dim_) return false;
  for (double v : x) {
    if (!(v >= lower() && v <= upper())) return false;
  }
  return true;
}

std::string Domain::name() const {
  switch (kind_) {
    case DomainKind::UnitInterval: return "unit_interval_01";
    case DomainKind::SymInterval: return "interval_m1_p1";
    case DomainKind::UnitCube: return "unit_cube(" + std::to_string(dim_) + ")";
    case DomainKind::SymCube: return "cube_m1_p1(" + std::to_string(dim_) + ")";
  }
  return "?";
}

Domain Domain::parse(const std::string& name) {
  if (name == "unit_interval_01") return unit_interval();
  if (name == "interval_m1_p1") return sym_interval();
  static const std::regex cube(R"((unit_cube|cube_m1_p1)\((\d+)\))");
  std::smatch match;
  if (std::regex_match(name, match, cube)) {
    const auto dim = static_cast<std::size_t>(std::stoul(match[2].str()));
    return match[1].str() == "unit_cube" ? unit_cube(dim) : sym_cube(dim);
  }
  throw Error(ErrorKind::InvalidArgument, "core", "unknown domain '" + name + "'");
}

}  // namespace cvmc
