#pragma once

#include <array>

namespace vy {

// Nonnegative, finite time. Construction throws DomainError otherwise.
class TimePoint {
 public:
  explicit TimePoint(double t);
  double value() const { return t_; }

 private:
  double t_;
};

struct GammaValues {
  double value;
  double first;
  double second;
};

// gamma(t) = 0.01 ln(t+1) + 0.99 t + 1 with its first two derivatives.
GammaValues gamma_eval(TimePoint t);

// Unchecked fast paths for inner loops; caller guarantees t >= 0.
double gamma_value(double t);
// -gamma''(t)/gamma(t), the admissible size of comparison coefficients.
double damping_bound(double t);

// phi_n(t) = exp((n-2) sqrt(t) / (n + sqrt(t))) for n >= 2, 1 for n in {0, 1}.
double phi_eval(int n, TimePoint t);
double phi_value(int n, double t);

// ln(a/b) - 2(a-b)/(a+b), nonnegative for a >= b > 0.
double log_inequality_margin(double a, double b);

struct TimeIntegralMargin {
  double lhs;
  double rhs;
  double margin;
  double quad_error;
};

// Weighted time integral of min{2 phi_{n-1}, phi_{n+1} (n(n+1))^2 / gamma^2}
// against (t-s)/gamma(t), compared with min{(50/9) n^2 phi_n, 500 phi_{n-1}}.
TimeIntegralMargin time_integral_margin(int n, TimePoint t, double quad_tol = 1e-8);

// Time grid used by the certification sweeps.
inline constexpr std::array<double, 7> kCertificationTimes = {0.0, 0.25, 1.0, 4.0, 25.0, 100.0, 1e4};

}  // namespace vy
