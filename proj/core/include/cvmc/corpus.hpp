#pragma once

#include <string>
#include <vector>

#include "cvmc/bases.hpp"
#include "cvmc/domain.hpp"
#include "cvmc/integrand.hpp"

namespace cvmc {

// Built-in integrands, all with closed-form means on both reference domains:
//   const          1
//   linear         x                     (d = 1)
//   square         x^2                   (d = 1)
//   exp            e^x                   (d = 1)
//   abs_shift      sum_l |x_l - 1/3|     (any d)
//   step:<u>       1{x >= u}             (d = 1), also written step(u)
//   runge          1 / (1 + 25 x^2)      (d = 1)
//   product_exp    prod_l e^{x_l}        (any d)
Integrand make_integrand(const std::string& id, const Domain& domain);

const std::vector<std::string>& corpus_ids();

// f = a + sum_j b_j h_j for a given basis; its mean is a.
Integrand make_affine_integrand(double intercept, std::vector<double> slopes, const ControlBasis& basis);

}  // namespace cvmc
