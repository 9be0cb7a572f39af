#include "vy/weights.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "vy/error.hpp"
#include "vy/quadrature.hpp"

namespace vy {

TimePoint::TimePoint(double t) : t_(t) {
  if (!std::isfinite(t) || t < 0.0) throw DomainError("time must be finite and nonnegative");
}

GammaValues gamma_eval(TimePoint tp) {
  double t = tp.value();
  double tp1 = t + 1.0;
  return {0.01 * std::log1p(t) + 0.99 * t + 1.0, 0.99 + 0.01 / tp1, -0.01 / (tp1 * tp1)};
}

double gamma_value(double t) { return 0.01 * std::log1p(t) + 0.99 * t + 1.0; }

double damping_bound(double t) {
  double tp1 = t + 1.0;
  return 0.01 / (tp1 * tp1 * gamma_value(t));
}

double phi_value(int n, double t) {
  if (n < 2 || t == 0.0) return 1.0;
  double r = std::sqrt(t);
  return std::exp(static_cast<double>(n - 2) * r / (static_cast<double>(n) + r));
}

double phi_eval(int n, TimePoint t) {
  if (n < 0) throw DomainError("phi_eval: order must be nonnegative");
  return phi_value(n, t.value());
}

double log_inequality_margin(double a, double b) {
  if (!(b > 0.0) || !(a >= b) || !std::isfinite(a))
    throw DomainError("log_inequality_margin: need a >= b > 0");
  return std::log(a / b) - 2.0 * (a - b) / (a + b);
}

namespace {

// Locates the roots of g on [0, t] by a log-spaced scan plus bisection.
std::vector<double> sign_changes(const std::function<double(double)>& g, double t) {
  std::vector<double> grid{0.0};
  for (double s = 1e-6; s < t; s *= 1.25) grid.push_back(s);
  grid.push_back(t);
  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    double a = grid[i], b = grid[i + 1];
    double ga = g(a), gb = g(b);
    if ((ga > 0) == (gb > 0)) continue;
    for (int it = 0; it < 200 && b - a > 1e-15 * (1 + b); ++it) {
      double m = 0.5 * (a + b);
      double gm = g(m);
      if ((gm > 0) == (ga > 0)) {
        a = m;
        ga = gm;
      } else {
        b = m;
      }
    }
    roots.push_back(0.5 * (a + b));
  }
  return roots;
}

}  // namespace

TimeIntegralMargin time_integral_margin(int n, TimePoint tp, double quad_tol) {
  if (n < 1) throw DomainError("time_integral_margin: n must be positive");
  if (!(quad_tol > 0.0)) throw DomainError("time_integral_margin: tolerance must be positive");
  double t = tp.value();
  double nn = static_cast<double>(n) * (n + 1);
  double rhs = std::min(50.0 / 9.0 * n * n * phi_value(n, t), 500.0 * phi_value(n - 1, t));
  if (t == 0.0) return {0.0, rhs, rhs, 0.0};

  double gt = gamma_value(t);
  auto first = [&](double s) { return 2.0 * phi_value(n - 1, s); };
  auto second = [&](double s) {
    double g = gamma_value(s);
    return phi_value(n + 1, s) * nn * nn / (g * g);
  };
  auto integrand = [&](double s) { return std::min(first(s), second(s)) * (t - s) / gt; };

  std::vector<double> cuts = sign_changes([&](double s) { return first(s) - second(s); }, t);
  // Extra decade cuts help the adaptive rule with the sqrt(s) behaviour near 0
  // and the long tail at large t.
  for (double c = 1e-4; c < t; c *= 10.0) cuts.push_back(c);

  QuadResult q = integrate_adaptive(integrand, 0.0, t, quad_tol, cuts);
  return {q.value, rhs, rhs - q.value, q.error};
}

}  // namespace vy
