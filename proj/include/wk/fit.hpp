#pragma once

#include <cstddef>
#include <span>

namespace wk {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t count = 0;
};

// Ordinary least squares y = slope x + intercept. count < 2 leaves the
// fit at zero.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// Fit of log y against log x over the pairs with x, y > 0.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

}  // namespace wk
