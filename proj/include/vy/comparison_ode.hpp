#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "vy/ode.hpp"
#include "vy/weights.hpp"

namespace vy {

// Coefficient h(s) of y'' = h y (+F). Admissible when |h| <= -gamma''/gamma.
class CoefficientPath {
 public:
  using Rule = std::function<double(double)>;

  explicit CoefficientPath(Rule h, std::vector<double> breakpoints = {});

  static CoefficientPath zero();
  // sign * (-gamma''/gamma); sign = -1 makes y1 = gamma exactly.
  static CoefficientPath extreme(int sign);
  // theta(s) * (-gamma''/gamma) with a random path theta into [-1, 1]; odd
  // seeds give a smooth theta, even seeds a piecewise-constant one.
  static CoefficientPath random(std::uint64_t seed, double horizon);

  double operator()(double s) const { return rule_(s); }
  const std::vector<double>& breakpoints() const { return breakpoints_; }

  // max |h(s)| gamma(s)/(-gamma''(s)) over a sample grid of [0, t]; records the
  // certificate when the ratio is at most 1.
  double certify(double t, int samples = 2048);
  bool certified_for(double t) const { return certified_horizon_ && *certified_horizon_ >= t; }

 private:
  Rule rule_;
  std::vector<double> breakpoints_;
  std::optional<double> certified_horizon_;
};

enum class BoundaryProfile { kGrowing, kDecaying, kForced };

// Solution of one of the three boundary problems on [0, t]. A forward pass
// integrates (y1, y1', J1) with J1 = int_0^s F y1; a backward quadrature pass
// integrates (It, G) with It = int_s^t 1/y1^2 and G = int_s^t F y1 It, so
// y2 = y1 It and quantities vanishing at s = t keep relative accuracy there.
class LinearBvpSolution {
 public:
  using Forward = std::array<double, 3>;
  using Backward = std::array<double, 2>;

  LinearBvpSolution(std::shared_ptr<const DenseSolution<Forward>> forward,
                    std::shared_ptr<const DenseSolution<Backward>> backward, BoundaryProfile profile,
                    double horizon, double factor = 1.0);

  BoundaryProfile profile() const { return profile_; }
  double horizon() const { return t_; }
  double value(double s) const;
  double derivative(double s) const;
  std::vector<double> nodes() const { return forward_->nodes(); }
  // Residual of the profile's boundary conditions.
  double boundary_residual() const;
  LinearBvpSolution scaled(double factor) const;

 private:
  std::shared_ptr<const DenseSolution<Forward>> forward_;
  std::shared_ptr<const DenseSolution<Backward>> backward_;
  BoundaryProfile profile_;
  double t_;
  double factor_;
};

// y'' = h y, y(0) = y'(0) = c.
LinearBvpSolution solve_y1(const CoefficientPath& h, TimePoint t, double c, const OdeOptions& opt = {});
// y2(s) = y1(s) int_s^t y1(0)/y1^2 with y1 from c = 1: y2(0) = y2'(0) + 1, y2(t) = 0.
LinearBvpSolution solve_y2(const CoefficientPath& h, TimePoint t, const OdeOptions& opt = {});
// y'' = h y + F, y(0) = y'(0), y(t) = 0, via the Green kernel of y1, y2.
LinearBvpSolution solve_forced(const CoefficientPath& h, const std::function<double(double)>& F,
                               TimePoint t, const OdeOptions& opt = {});

// gamma(s) int_s^t dtau / gamma(tau)^2
double gamma_tilde(TimePoint t, double s);

// K(s, tau) = y1(min) y2(max) for a fixed coefficient and horizon.
class GreenKernel {
 public:
  GreenKernel(const CoefficientPath& h, TimePoint t, const OdeOptions& opt = {});
  double operator()(double s, double tau) const;
  // min{gamma(s)(t-tau), gamma(tau)(t-s)}/gamma(t)
  double bound(double s, double tau) const;
  double margin(double s, double tau) const { return bound(s, tau) - std::abs((*this)(s, tau)); }
  double horizon() const { return t_; }
  const LinearBvpSolution& y1() const { return y1_; }
  const LinearBvpSolution& y2() const { return y2_; }

 private:
  double t_;
  LinearBvpSolution y1_, y2_;
};

double kernel_bound_margin(const CoefficientPath& h, TimePoint t, double s, double tau);

// Normalised margins (bound - value)/bound, minimised over a sample grid, for
// every comparison statement. Negative entries mean a violated bound.
struct ComparisonMargins {
  double y1_positive;         // min y1 / y1(t)
  double y1_gamma_ratio;      // y1(s) <= gamma(s) y1(t)/gamma(t)
  double y1_over_gamma_monotone;  // increments of y1/gamma, relative
  double y2_bounds;           // 0 <= y2 <= (t-s)/gamma(t)
  double y2_tilde_monotone;   // increments of y2/gamma_tilde, relative (nonincreasing)
  double product_bound;       // y1 y2 <= gamma gamma_tilde
  double gamma_tilde_bound;   // gamma_tilde <= (t-s)/gamma(t)
  double wronskian;           // -|W + 1|
  double forced_gamma;        // sup |y|/gamma <= int |F| (t-s)/gamma(t)
  double forced_linear;       // sup |y|/(t-s) <= int |F| gamma/gamma(t)
  double kernel;              // |K| <= min{...}/gamma(t)
  double boundary_residual;   // -max residual over the three solves
  double min() const;
};

ComparisonMargins comparison_margins(const CoefficientPath& h, const std::function<double(double)>& F,
                                     TimePoint t, int samples = 200);

}  // namespace vy
