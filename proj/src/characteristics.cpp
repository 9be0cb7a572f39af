#include "vy/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <limits>
#include <sstream>

#include "vy/combinatorics.hpp"
#include "vy/error.hpp"

namespace vy {

namespace {

constexpr int kMaxLadder = 6;

constexpr double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<double> time_cuts(const FieldHistory& hist, double t) {
  std::vector<double> cuts;
  if (hist.is_zero()) return cuts;
  for (double s : hist.times())
    if (s > 0.0 && s < t) cuts.push_back(s);
  return cuts;
}

}  // namespace

Coupling coupling_from_int(int q) {
  if (q == 1) return Coupling::kRepulsive;
  if (q == -1) return Coupling::kAttractive;
  throw DomainError("coupling must be +1 or -1");
}

Trajectory::State Trajectory::state(double s) const {
  if (s <= 0.0 || t == 0.0) return {x0 + v0, v0, 1.0, 1.0};
  if (s >= t) return end;
  if (!path) throw DomainError("trajectory was solved without its dense path");
  return (*path)(s);
}

std::vector<double> Trajectory::nodes() const {
  if (!path || path->empty()) return {0.0};
  return path->nodes();
}

void Trajectory::write_csv(std::ostream& os) const {
  char buf[96];
  os << "s,X,V\n";
  for (double s : nodes()) {
    State y = state(s);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s, y[0], y[1]);
    os << buf;
  }
}

Trajectory solve_bvp(double x, double x0, TimePoint t, const FieldHistory& hist, Coupling q,
                     const BvpOptions& opts) {
  return solve_bvp_from(x, x0, t, hist, q, (x - x0) / (1.0 + t.value()), opts);
}

Trajectory solve_bvp_from(double x, double x0, TimePoint t, const FieldHistory& hist, Coupling q,
                          double v0_guess, const BvpOptions& opts) {
  const double T = t.value();
  if (T > hist.horizon() * (1.0 + 1e-14)) throw DomainError("field history does not span [0, t]");
  if (!std::isfinite(x) || !std::isfinite(x0) || !std::isfinite(v0_guess))
    throw DomainError("solve_bvp: non-finite endpoint data");

  Trajectory tr;
  tr.x = x;
  tr.x0 = x0;
  tr.t = T;
  tr.v0 = v0_guess;
  if (T == 0.0) {
    tr.v0 = x - x0;
    tr.residual = 0.0;
    tr.end = {x, tr.v0, 1.0, 1.0};
    return tr;
  }

  const double qs = charge(q);
  const bool zero = hist.is_zero();
  auto rhs = [&](double s, const Trajectory::State& y, Trajectory::State& dy) {
    double e[2] = {0.0, 0.0};
    if (!zero) hist.evaluate(y[0], s, 1, 2, e);
    dy[0] = y[1];
    dy[1] = -qs * e[0];
    dy[2] = y[3];
    dy[3] = -qs * e[1] * y[2];
  };
  const std::vector<double> cuts = opts.split_at_slices ? time_cuts(hist, T) : std::vector<double>{};

  // Adaptive step selection makes v0 -> X(t) jump at the ODE tolerance; once Newton stalls there,
  // tighten the integrator so the residual can reach opts.tol.
  OdeOptions ode = opts.ode;
  bool tightened = false;
  double last = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    auto dense = opts.keep_path ? std::make_shared<DenseSolution<Trajectory::State>>() : nullptr;
    Trajectory::State y0{x0 + tr.v0, tr.v0, 1.0, 1.0};
    Trajectory::State yt = integrate(rhs, 0.0, T, y0, ode, cuts, dense.get());
    tr.end = yt;
    double r = yt[0] - x;
    tr.iterations = it;
    tr.residual = std::abs(r);
    if (tr.residual <= opts.tol) {
      tr.path = std::move(dense);
      return tr;
    }
    if (!(yt[2] > 0.0) || !std::isfinite(yt[2]))
      throw ConvergenceError("shooting Jacobian is not positive; field exceeds the damping certificate");
    if (!tightened && tr.residual > 0.25 * last) {
      ode.abs_tol *= 1e-2;
      ode.rel_tol *= 1e-2;
      tightened = true;
    }
    last = tr.residual;
    tr.v0 -= r / yt[2];
  }
  std::ostringstream msg;
  msg << "Newton shooting did not converge: residual " << tr.residual << " after " << opts.max_iter
      << " iterations";
  throw ConvergenceError(msg.str());
}

WPair w_pair(const Trajectory& traj) { return {traj.end[1], traj.v0}; }

double dx0_w(const Trajectory& traj) { return -1.0 / traj.jacobian(); }

CoefficientPath trajectory_coefficient(const Trajectory& traj, const FieldHistory& hist, Coupling q) {
  if (hist.is_zero()) return CoefficientPath::zero();
  if (!traj.path && traj.t > 0.0) throw DomainError("trajectory was solved without its dense path");
  const double qs = charge(q);
  const FieldHistory* h = &hist;
  Trajectory copy = traj;
  return CoefficientPath(
      [copy, h, qs](double s) { return -qs * h->evaluate(copy.X(std::min(s, copy.t)), s, 2); },
      time_cuts(hist, traj.t));
}

LinearBvpSolution variational_first(const Trajectory& traj, const FieldHistory& hist, Coupling q,
                                    Variation which, const OdeOptions& opt) {
  CoefficientPath h = trajectory_coefficient(traj, hist, q);
  TimePoint t(traj.t);
  if (which == Variation::kFoot) return solve_y2(h, t, opt);
  LinearBvpSolution y1 = solve_y1(h, t, 1.0, opt);
  return y1.scaled(1.0 / y1.value(traj.t));
}

// State layout: X, V, Z, Z', P, P', then (p_j, p_j') for j = 2..px, then
// (r_j, r_j') for j = 1..pm.
DerivativeLadder::DerivativeLadder(const Trajectory& traj, const FieldHistory& hist, Coupling q,
                                   int order, const BvpOptions& opts)
    : order_(order), t_(traj.t) {
  if (order < 1 || order > kMaxLadder) throw DomainError("ladder order must be in [1, 6]");
  if (hist.max_order() < order + 2)
    throw DomainError("field history lacks derivatives for this ladder order");
  c_.assign(order + 2, 0.0);
  d_.assign(order + 1, 0.0);

  const double qs = charge(q);
  const bool zero = hist.is_zero();
  const double T = t_;
  const std::vector<double> cuts = opts.split_at_slices ? time_cuts(hist, T) : std::vector<double>{};

  if (T == 0.0) {
    // Every inhomogeneous part vanishes and Z = Z' = 1 at the single point.
    c_[1] = 1.0;
    d_[0] = -1.0;
    init_.assign(6 + 2 * (order - 1) + 2 * order, 0.0);
    init_[0] = traj.x;
    init_[1] = traj.v0;
    init_[2] = init_[3] = init_[4] = 1.0;
    end_ = init_;
    return;
  }

  // Pass k integrates p_2..p_min(k, order) and r_1..r_{k-1}; afterwards c_k and d_{k-1} are known.
  for (int pass = 1; pass <= order + 1; ++pass) {
    const int px = std::min(pass, order);
    const int pm = pass - 1;
    const std::size_t dim = 6 + 2 * std::max(0, px - 1) + 2 * pm;
    auto xi = [](int j) { return static_cast<std::size_t>(6 + 2 * (j - 2)); };
    const std::size_t mbase = 6 + 2 * std::max(0, px - 1);
    auto mi = [mbase](int j) { return mbase + 2 * (j - 1); };
    const int nd = std::max(px, pm) + 2;

    auto rhs = [&](double s, const std::vector<double>& y, std::vector<double>& dy) {
      double der[kMaxLadder + 4] = {};
      if (!zero) hist.evaluate(y[0], s, 1, nd, der + 1);
      dy[0] = y[1];
      dy[1] = -qs * der[1];
      const double h = -qs * der[2];
      dy[2] = y[3];
      dy[3] = h * y[2];
      dy[4] = y[5];
      dy[5] = h * y[4];
      if (dim == 6) return;
      double D[kMaxLadder + 2] = {};
      const double Z = y[2];
      D[1] = c_[1] * Z;
      for (int j = 2; j <= px; ++j) D[j] = y[xi(j)] + c_[j] * Z;
      BellTable bell;
      bell.fill(D, std::max(px, pm));
      for (int j = 2; j <= px; ++j) {
        // Forcing uses D_1..D_{j-1} only; the top term is the homogeneous part.
        dy[xi(j)] = y[xi(j) + 1];
        dy[xi(j) + 1] = h * y[xi(j)] - qs * bell.compose(der + 1, j, true);
      }
      if (pm == 0) return;
      double M[kMaxLadder + 2];
      M[0] = y[4] + d_[0] * Z;
      for (int j = 1; j < pm; ++j) M[j] = y[mi(j)] + d_[j] * Z;
      for (int n = 1; n <= pm; ++n) {
        double g = 0.0;
        for (int k = 1; k <= n; ++k) g += binomial(n, k) * bell.compose(der + 2, k, false) * M[n - k];
        dy[mi(n)] = y[mi(n) + 1];
        dy[mi(n) + 1] = h * y[mi(n)] - qs * g;
      }
    };

    std::vector<double> y0(dim, 0.0);
    y0[0] = traj.x0 + traj.v0;
    y0[1] = traj.v0;
    y0[2] = y0[3] = 1.0;
    y0[4] = 1.0;
    const bool last = pass == order + 1;
    auto dense = (last && opts.keep_path) ? std::make_shared<DenseSolution<std::vector<double>>>() : nullptr;
    std::vector<double> yt = integrate(rhs, 0.0, T, y0, opts.ode, cuts, dense.get());
    if (last) {
      init_ = y0;
      end_ = yt;
    }
    const double Zt = yt[2];
    if (!(Zt > 0.0)) throw ConvergenceError("variational Jacobian is not positive");
    if (pass == 1) {
      c_[1] = 1.0 / Zt;
      d_[0] = -yt[4] / Zt;
    } else {
      if (pass <= order) c_[pass] = -yt[xi(pass)] / Zt;
      d_[pass - 1] = -yt[mi(pass - 1)] / Zt;
    }
    if (last) dense_ = std::move(dense);
  }
}

std::vector<double> DerivativeLadder::state(double s) const {
  if (s <= 0.0 || t_ == 0.0) return init_;
  if (s >= t_) return end_;
  if (!dense_) throw DomainError("ladder was built without its dense path");
  return (*dense_)(s);
}

std::size_t DerivativeLadder::x_index(int n) const { return static_cast<std::size_t>(6 + 2 * (n - 2)); }

std::size_t DerivativeLadder::mixed_index(int n) const {
  return static_cast<std::size_t>(6 + 2 * std::max(0, order_ - 1) + 2 * (n - 1));
}

double DerivativeLadder::dx(int n, double s) const {
  if (n < 1 || n > order_) throw DomainError("ladder order not available");
  auto y = state(s);
  if (n == 1) return c_[1] * y[2];
  return y[x_index(n)] + c_[n] * y[2];
}

double DerivativeLadder::dx_dx0(int n, double s) const {
  if (n < 0 || n > order_) throw DomainError("ladder order not available");
  auto y = state(s);
  if (n == 0) return y[4] + d_[0] * y[2];
  return y[mixed_index(n)] + d_[n] * y[2];
}

double DerivativeLadder::dx_dx0_w(int n) const {
  if (n < 0 || n > order_) throw DomainError("ladder order not available");
  auto y = state(t_);
  if (n == 0) return y[5] + d_[0] * y[3];
  return y[mixed_index(n) + 1] + d_[n] * y[3];
}

double DerivativeLadder::dx_w(int n) const {
  if (n < 1 || n > order_) throw DomainError("ladder order not available");
  auto y = state(t_);
  if (n == 1) return c_[1] * y[3];
  return y[x_index(n) + 1] + c_[n] * y[3];
}

double LadderMargins::min() const {
  double m = std::min({dx_positive, dx_upper, dx0_lower, dx0_upper});
  for (const auto* v : {&x1, &x2, &x3, &x4})
    for (double e : *v) m = std::min(m, e);
  return m;
}

LadderMargins ladder_margins(const DerivativeLadder& ladder, int samples) {
  const double t = ladder.horizon();
  const int N = ladder.order();
  const double gt = gamma_value(t);
  LadderMargins m{};
  m.dx_positive = m.dx_upper = m.dx0_lower = m.dx0_upper = 1.0;
  m.x1.assign(N + 1, 1.0);
  m.x2.assign(N + 1, 1.0);
  m.x3.assign(N + 1, 1.0);
  m.x4.assign(N + 1, 1.0);
  auto fact2 = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f * f;
  };
  auto rel = [](double bound, double v) { return (bound - std::abs(v)) / bound; };

  for (int i = 0; i < std::max(samples, 1); ++i) {
    const double s = (t == 0.0) ? 0.0 : t * i / samples;
    const double gs = gamma_value(s);
    const double b_dx = gs / gt;
    const double dx1 = ladder.dx(1, s);
    m.dx_positive = std::min(m.dx_positive, dx1 / b_dx);
    m.dx_upper = std::min(m.dx_upper, (b_dx - dx1) / b_dx);
    if (t > 0.0) {
      const double b0 = (t - s) / gt;
      const double m0 = ladder.dx_dx0(0, s);
      m.dx0_lower = std::min(m.dx0_lower, m0 / b0);
      m.dx0_upper = std::min(m.dx0_upper, (b0 - m0) / b0);
    }
    for (int n = 0; n <= N; ++n) {
      const double w = phi_value(n, t) * fact2(n);
      if (n >= 2) m.x1[n] = std::min(m.x1[n], rel(w * gs / (200.0 * std::pow(gt, n)), ladder.dx(n, s)));
      if (t > 0.0)
        m.x3[n] = std::min(m.x3[n], rel(w * (t - s) / std::pow(gt, n + 1), ladder.dx_dx0(n, s)));
    }
    if (t == 0.0) break;
  }
  for (int n = 0; n <= N; ++n) {
    const double w = phi_value(n, t) * fact2(n);
    if (n == 1) m.x2[n] = rel(1.0 / gt, ladder.dx_w0(1));
    if (n >= 2) m.x2[n] = rel(w / (200.0 * std::pow(gt, n)), ladder.dx_w0(n));
    m.x4[n] = rel(w / std::pow(gt, n + 1), ladder.dx_dx0_w(n));
  }
  return m;
}

}  // namespace vy
