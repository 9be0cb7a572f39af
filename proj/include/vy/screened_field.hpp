#pragma once

#include <vector>

#include "vy/grid.hpp"
#include "vy/weights.hpp"

namespace vy {

struct PotentialOptions {
  // |rho| at both ends must not exceed this; the convolution ignores mass outside [-L, L].
  double boundary_tol = 1e-12;
  bool check_boundary = true;
};

// phi = (1/2) e^{-|x|} * rho over [-L, L]: per-panel exact integration of the
// kernel against an ENO-selected quintic interpolant of rho, O(N) via
// exponential sweeps.
GridFunction solve_potential(const GridFunction& rho, const PotentialOptions& opts = {});

struct MaxPrincipleMargins {
  double m1;  // ||d^n rho|| - ||d^n phi||
  double m2;  // min(2 ||d^n rho||, ||d^{n+2} rho||) - ||d^{n+2} phi||
};

MaxPrincipleMargins max_principle_margins(const GridFunction& rho, const GridFunction& phi, int n);

// Potential slices on a time grid with cached x-derivatives. Evaluation uses
// cubic Hermite interpolation in s (C^1, node slopes from three-point
// differences) and 9-point Lagrange interpolation in x.
class FieldHistory {
 public:
  // Evaluation continues the exterior solution up to this fraction of L past the edge.
  static constexpr double kExteriorFraction = 0.05;

  FieldHistory(std::vector<double> times, std::vector<GridFunction> potentials, int max_order);

  static FieldHistory from_densities(std::vector<double> times, const std::vector<GridFunction>& rho,
                                     int max_order, const PotentialOptions& opts = {});
  static FieldHistory zero(std::vector<double> times, double half_width, std::size_t nodes,
                           int max_order);

  const std::vector<double>& times() const { return times_; }
  double horizon() const { return times_.back(); }
  int max_order() const { return max_order_; }
  double half_width() const { return half_width_; }
  std::size_t grid_nodes() const { return nodes_; }
  bool is_zero() const { return zero_; }

  const GridFunction& derivative(std::size_t slice, int order) const;
  double sup_norm(std::size_t slice, int order) const;

  // out[k] = d^{first+k} phi (x, s) for k < count. Throws beyond the exterior band.
  void evaluate(double x, double s, int first, int count, double* out) const;
  double evaluate(double x, double s, int order) const;

  // ||d^2 phi(s_j)|| / (-gamma''/gamma)(s_j), maximised over slices.
  double damping_ratio() const;
  bool damping_certified() const { return damping_ratio() <= 1.0; }
  // max over slices of ||d phi||.
  double max_force() const;

 private:
  std::size_t locate_time(double s) const;

  std::vector<double> times_;
  int max_order_;
  double half_width_;
  std::size_t nodes_;
  bool zero_ = false;
  // derivs_[j][d] and slopes_[j][d]: d^d phi at slice j and its time slope.
  std::vector<std::vector<GridFunction>> derivs_;
  std::vector<std::vector<std::vector<double>>> slopes_;
};

// Integral over [0, t] of ||d^{n+1} phi(s)|| gamma(s)^n (t-s)/gamma(t).
// Throws ConvergenceError when the time nodes are too sparse for rel_accuracy.
double weighted_field_integral(const FieldHistory& hist, int n, TimePoint t,
                                 double rel_accuracy = 0.1);

// min{phi_n(t)(n!)^2/270, phi_{n-1}(t)((n-1)!)^2/3}
double weighted_field_bound(int n, TimePoint t);

}  // namespace vy
