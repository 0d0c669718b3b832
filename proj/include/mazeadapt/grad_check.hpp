#pragma once

#include <functional>
#include <span>

namespace mazeadapt::ad {

// Compares an analytic gradient against central finite differences of the
// scalar function `f` at `point`. Returns the max over coordinates of
// |analytic_i - numeric_i| / max(1, |numeric_i|).
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> point, std::span<const double> analytic,
                  double step = 1e-5);

}  // namespace mazeadapt::ad
