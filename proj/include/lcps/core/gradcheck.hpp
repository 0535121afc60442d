#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

namespace lcps {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;

    bool passed(double tolerance) const { return max_relative_error <= tolerance; }
};

/// Compares `analytic` against central differences of `loss` taken by perturbing
/// each entry of `variables` in place by +-h. The error for one entry is
/// |a - c| / max(|a|, |c|, floor). `variables` is restored before returning.
template <typename LossFn>
GradCheckResult finite_difference_check(std::span<double> variables, std::span<const double> analytic, LossFn&& loss,
                                        double h = 1e-5, double floor = 1e-7)
{
    GradCheckResult r;
    for (std::size_t i = 0; i < variables.size(); ++i) {
        const double saved = variables[i];
        variables[i] = saved + h;
        const double up = loss();
        variables[i] = saved - h;
        const double down = loss();
        variables[i] = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[i];
        const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
        if (i == 0 || err > r.max_relative_error)
            r = GradCheckResult{err, i, a, numeric};
    }
    return r;
}

} // namespace lcps
