#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace vy {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // estimated absolute error
  double l1 = 0.0;     // integral of |f|
};

// Globally adaptive Gauss-Kronrod 7/15 on [a, b], split at the given interior
// breakpoints; the panel with the largest error estimate is bisected until the
// total estimate is below rel_tol * max(l1, abs_floor), else ConvergenceError.
// Tolerances below 1e-13 are raised to 1e-13 (rounding floor of the estimate).
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, std::span<const double> breakpoints = {},
                              double abs_floor = 0.0, unsigned max_depth = 16);

// Nested adaptive quadrature over [xa, xb] x [va, vb]; f(x, v).
QuadResult integrate_adaptive_2d(const std::function<double(double, double)>& f, double xa,
                                 double xb, double va, double vb, double rel_tol,
                                 double abs_floor = 0.0);

struct QuadNode {
  double x;
  double w;
};

// Composite 8-point Gauss-Legendre rule on [a, b] with panels no wider than
// panel_width.
std::vector<QuadNode> gauss_legendre_panels(double a, double b, double panel_width);

}  // namespace vy
