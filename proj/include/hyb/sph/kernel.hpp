#pragma once

#include <numbers>

// Monaghan cubic spline with compact support h (3D normalization).
//
//   W(r, h) = 8 / (pi h^3) * M(r / h)
//   M(x) = 1 - 6x^2 + 6x^3   0 <= x <= 1/2
//          2 (1 - x)^3       1/2 < x <= 1
//          0                 otherwise
//
// x = 0 belongs to the first branch so that W(0, h) = 8 / (pi h^3).

namespace hyb::sph {

namespace spline {

constexpr double inner(double x) { return 1.0 - 6.0 * x * x + 6.0 * x * x * x; }
constexpr double outer(double x) { const double q = 1.0 - x; return 2.0 * q * q * q; }

constexpr double inner_slope(double x) { return -12.0 * x + 18.0 * x * x; }
constexpr double outer_slope(double x) { const double q = 1.0 - x; return -6.0 * q * q; }

constexpr double shape(double x) {
  if(x <= 0.5) {
    return inner(x);
  }
  return x <= 1.0 ? outer(x) : 0.0;
}

constexpr double slope(double x) {
  if(x <= 0.5) {
    return inner_slope(x);
  }
  return x <= 1.0 ? outer_slope(x) : 0.0;
}

}  // end of namespace spline ------------------------------------------------

inline double kernel_w(double r, double h) {
  return 8.0 / (std::numbers::pi * h * h * h) * spline::shape(r / h);
}

// Radial derivative dW/dr.
inline double kernel_dw(double r, double h) {
  return 8.0 / (std::numbers::pi * h * h * h * h) * spline::slope(r / h);
}

}  // end of namespace hyb::sph ----------------------------------------------
