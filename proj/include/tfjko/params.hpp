// SPDX-License-Identifier: Apache-2.0

#ifndef TFJKO_PARAMS_HPP
#define TFJKO_PARAMS_HPP

#include <cmath>

#include "nonlinearity.hpp"

namespace tfjko
{

struct ProblemParams
{
    double lambda = 1.0;
    double eps = 0.0;
    Nonlinearity nl = zero_nonlinearity();

    void validate() const
    {
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw InputError("lambda must be positive");
        if (!(eps >= 0.0) || !std::isfinite(eps))
            throw InputError("eps must be nonnegative");
    }

    // sqrt(lambda / 6), the unperturbed convexity modulus
    double lambda_tilde0() const { return std::sqrt(lambda / 6.0); }
};

} // namespace tfjko

#endif
