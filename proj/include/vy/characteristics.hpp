#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <vector>

#include "vy/comparison_ode.hpp"
#include "vy/ode.hpp"
#include "vy/screened_field.hpp"

namespace vy {

// Sign q of the force -q d_x phi: +1 repulsive, -1 attractive.
enum class Coupling : int { kAttractive = -1, kRepulsive = 1 };

Coupling coupling_from_int(int q);
inline double charge(Coupling q) { return static_cast<double>(static_cast<int>(q)); }

struct BvpOptions {
  double tol = 1e-10;
  int max_iter = 25;
  OdeOptions ode{};
  // Keep the dense path; without it only s = 0 and s = t can be queried.
  bool keep_path = true;
  // Restart the integrator at history time nodes, where the field's second
  // time derivative jumps.
  bool split_at_slices = true;
};

// Characteristic through X(t) = x with X(0) - V(0) = x0. The dense path holds
// (X, V, Z, Z') where Z solves Z'' = -q (d^2 phi)(X, s) Z, Z(0) = Z'(0) = 1;
// Z(t) is the Newton derivative dX(t)/dv0.
struct Trajectory {
  using State = std::array<double, 4>;

  double x = 0.0;
  double x0 = 0.0;
  double t = 0.0;
  double v0 = 0.0;
  double residual = 0.0;
  int iterations = 0;
  State end{};
  std::shared_ptr<const DenseSolution<State>> path;

  State state(double s) const;
  double X(double s) const { return state(s)[0]; }
  double V(double s) const { return state(s)[1]; }
  double jacobian() const { return end[2]; }
  std::vector<double> nodes() const;
  // CSV "s,X,V" at the integrator nodes.
  void write_csv(std::ostream& os) const;
};

Trajectory solve_bvp(double x, double x0, TimePoint t, const FieldHistory& hist, Coupling q,
                     const BvpOptions& opts = {});

// Same, starting Newton from a caller-supplied velocity (continuation along x0).
Trajectory solve_bvp_from(double x, double x0, TimePoint t, const FieldHistory& hist, Coupling q,
                          double v0_guess, const BvpOptions& opts = {});

struct WPair {
  double w;   // V(t)
  double w0;  // V(0)
};

WPair w_pair(const Trajectory& traj);

// d_x0 w = -1 / Z(t): the Wronskian of the variational pair.
double dx0_w(const Trajectory& traj);

enum class Variation { kEndpoint, kFoot };  // d/dx and d/dx0

// h(s) = -q (d^2 phi)(X(s), s) along the trajectory.
CoefficientPath trajectory_coefficient(const Trajectory& traj, const FieldHistory& hist, Coupling q);

// d_x X (y(0) = y'(0), y(t) = 1) or d_x0 X (y(0) = y'(0) + 1, y(t) = 0).
LinearBvpSolution variational_first(const Trajectory& traj, const FieldHistory& hist, Coupling q,
                                    Variation which, const OdeOptions& opt = {});

// Higher x-derivatives of X and mixed derivatives d_x^n d_x0 X along one
// characteristic, by the forced variational recursion. Order n solves
// y'' = h y + F_n with y(0) = y'(0), y(t) = 0 as y = p_n + c_n Z, p_n an
// initial-value solution; each order costs one more forward pass.
class DerivativeLadder {
 public:
  DerivativeLadder(const Trajectory& traj, const FieldHistory& hist, Coupling q, int order,
                   const BvpOptions& opts = {});

  int order() const { return order_; }
  double horizon() const { return t_; }
  double dx(int n, double s) const;         // d_x^n X(s), n >= 1
  double dx_dx0(int n, double s) const;     // d_x^n d_x0 X(s), n >= 0
  double dx_w0(int n) const { return dx(n, 0.0); }  // d_x^n w0
  double dx_dx0_w(int n) const;             // d_x^n d_x0 w
  double dx_w(int n) const;                 // d_x^n w
  std::vector<double> nodes() const { return dense_ ? dense_->nodes() : std::vector<double>{0.0}; }

 private:
  std::vector<double> state(double s) const;
  std::size_t x_index(int n) const;
  std::size_t mixed_index(int n) const;

  int order_;
  double t_;
  std::vector<double> c_;  // c_[n], n = 1..order
  std::vector<double> d_;  // d_[n], n = 0..order
  std::shared_ptr<const DenseSolution<std::vector<double>>> dense_;
  std::vector<double> init_;  // state at s = 0
  std::vector<double> end_;   // state at s = t
};

// Normalised margins (bound - |value|)/bound, minimised over samples of [0, t].
struct LadderMargins {
  double dx_positive;  // min d_x X / (gamma(s)/gamma(t))
  double dx_upper;     // d_x X <= gamma(s)/gamma(t)
  double dx0_lower;    // d_x0 X >= 0, relative to (t-s)/gamma(t)
  double dx0_upper;    // d_x0 X <= (t-s)/gamma(t)
  std::vector<double> x1;  // order n >= 2, index n
  std::vector<double> x2;  // order n >= 1
  std::vector<double> x3;  // order n >= 0
  std::vector<double> x4;  // order n >= 0
  double min() const;
};

LadderMargins ladder_margins(const DerivativeLadder& ladder, int samples = 64);

}  // namespace vy
