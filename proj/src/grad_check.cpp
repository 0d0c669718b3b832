#include "mazeadapt/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mazeadapt/error.hpp"

namespace mazeadapt::ad {

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> point, std::span<const double> analytic, double step) {
  if (point.size() != analytic.size()) {
    throw ContractError("grad_check: point and analytic gradient sizes differ");
  }
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double fp = f(x);
    x[i] = saved - step;
    const double fm = f(x);
    x[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: function evaluated to a non-finite value");
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace mazeadapt::ad
