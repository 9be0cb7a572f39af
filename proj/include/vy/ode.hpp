#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "vy/error.hpp"

namespace vy {

struct OdeOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  std::size_t max_steps = 500000;
};

// Continuous extension of one Dormand-Prince step.
template <class State>
struct DenseStep {
  double t0;
  double h;
  State r1, r2, r3, r4, r5;
};

template <class State>
class DenseSolution {
 public:
  void append(DenseStep<State> step) { steps_.push_back(std::move(step)); }
  bool empty() const { return steps_.empty(); }
  double t_begin() const { return steps_.front().t0; }
  double t_end() const { return steps_.back().t0 + steps_.back().h; }

  State operator()(double t) const {
    if (steps_.empty()) throw DomainError("dense solution is empty");
    double lo = t_begin(), hi = t_end();
    double slack = 1e-12 * (1.0 + std::abs(hi));
    if (t < lo - slack || t > hi + slack) throw DomainError("dense output outside the solved interval");
    auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                               [](double v, const DenseStep<State>& s) { return v < s.t0; });
    const auto& st = (it == steps_.begin()) ? steps_.front() : *(it - 1);
    double th = std::clamp((t - st.t0) / st.h, 0.0, 1.0), th1 = 1.0 - th;
    State y = st.r1;
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = st.r1[i] + th * (st.r2[i] + th1 * (st.r3[i] + th * (st.r4[i] + th1 * st.r5[i])));
    return y;
  }

  std::vector<double> nodes() const {
    std::vector<double> n;
    n.reserve(steps_.size() + 1);
    for (const auto& s : steps_) n.push_back(s.t0);
    if (!steps_.empty()) n.push_back(t_end());
    return n;
  }

 private:
  std::vector<DenseStep<State>> steps_;
};

namespace detail {

template <class State>
double error_norm(const State& err, const State& y0, const State& y1, const OdeOptions& o) {
  double acc = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    double sc = o.abs_tol + o.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    double e = err[i] / sc;
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace detail

// Adaptive Dormand-Prince 5(4) from t0 to t1 > t0. Steps never cross the
// given breakpoints, so non-smooth coefficients are integrated piecewise.
// Rhs: void(double t, const State& y, State& dydt).
template <class State, class Rhs>
State integrate(Rhs&& f, double t0, double t1, State y, const OdeOptions& opt,
                std::span<const double> breakpoints = {}, DenseSolution<State>* dense = nullptr) {
  if (!(t1 >= t0)) throw DomainError("integrate: need t1 >= t0");
  if (t1 == t0) return y;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                          d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                          d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

  std::vector<double> cuts;
  for (double b : breakpoints)
    if (b > t0 && b < t1) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.push_back(t1);

  const std::size_t n = y.size();
  State k1 = y, k2 = y, k3 = y, k4 = y, k5 = y, k6 = y, k7 = y, tmp = y, ynew = y, err = y;
  f(t0, y, k1);

  // Initial step from the usual two-evaluation heuristic.
  double h;
  {
    double d0 = 0, dd1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double sc = opt.abs_tol + opt.rel_tol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      dd1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / n);
    dd1 = std::sqrt(dd1 / n);
    double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
    h0 = std::min(h0, t1 - t0);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h0 * k1[i];
    f(t0 + h0, tmp, k2);
    double dd2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double sc = opt.abs_tol + opt.rel_tol * std::abs(y[i]);
      dd2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
    }
    dd2 = std::sqrt(dd2 / n) / h0;
    double m = std::max(dd1, dd2);
    double h1 = (m <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
    h = std::min(100 * h0, h1);
  }

  double t = t0;
  std::size_t steps = 0;
  for (double stop : cuts) {
    while (t < stop) {
      if (++steps > opt.max_steps) throw ConvergenceError("ODE integrator exceeded its step budget");
      bool last = false;
      if (t + h >= stop || stop - (t + h) < 1e-12 * (1 + std::abs(stop))) {
        h = stop - t;
        last = true;
      }
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
      f(t + c2 * h, tmp, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
      f(t + c3 * h, tmp, k3);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      f(t + c4 * h, tmp, k4);
      for (std::size_t i = 0; i < n; ++i)
        tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      f(t + c5 * h, tmp, k5);
      for (std::size_t i = 0; i < n; ++i)
        tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      // Stages at the segment end stay on the segment's side of a breakpoint.
      const double t_end = last ? std::nextafter(stop, t) : t + h;
      f(t_end, tmp, k6);
      for (std::size_t i = 0; i < n; ++i)
        ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      f(t_end, ynew, k7);
      for (std::size_t i = 0; i < n; ++i)
        err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      double en = detail::error_norm(err, y, ynew, opt);
      if (!std::isfinite(en)) en = 1e10;
      if (en <= 1.0) {
        if (dense) {
          DenseStep<State> st{t, h, y, y, y, y, y};
          for (std::size_t i = 0; i < n; ++i) {
            double dy = ynew[i] - y[i];
            double bspl = h * k1[i] - dy;
            st.r2[i] = dy;
            st.r3[i] = bspl;
            st.r4[i] = dy - h * k7[i] - bspl;
            st.r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
          }
          dense->append(std::move(st));
        }
        t = last ? stop : t + h;
        y = ynew;
        k1 = k7;
        double fac = (en == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        h *= fac;
      } else {
        h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
        if (h < 1e-14 * (1.0 + std::abs(t))) {
          std::ostringstream msg;
          msg << "ODE step size underflow at t = " << t;
          throw ConvergenceError(msg.str());
        }
      }
    }
    // The right-hand side may be discontinuous at a breakpoint.
    if (stop < t1) f(t, y, k1);
  }
  return y;
}

}  // namespace vy
