// Central finite-difference utilities for gradient verification.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace testsupport {

// d f / d x_i by central differences, restoring x afterwards.
template <typename F>
double central_diff(F&& f, std::vector<double>& x, std::size_t i,
                    double h = 1e-6) {
  const double orig = x[i];
  x[i] = orig + h;
  const double fp = f();
  x[i] = orig - h;
  const double fm = f();
  x[i] = orig;
  return (fp - fm) / (2.0 * h);
}

// Relative error with an absolute guard for near-zero pairs.
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b));
}

}  // namespace testsupport
