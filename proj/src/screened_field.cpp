#include "vy/screened_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss.hpp>

#include "vy/error.hpp"

namespace vy {

namespace {

constexpr int kPts = 6;  // quintic panel interpolant

// M_c(lambda) = int_0^1 e^{-lambda u} u^c du, c < kPts.
std::array<double, kPts> exp_moments(double lambda) {
  std::array<double, kPts> m{};
  if (lambda < 1.0) {
    for (int c = 0; c < kPts; ++c) {
      double term = 1.0, sum = 0.0;
      for (int k = 0; k < 40; ++k) {
        sum += term / (c + k + 1);
        term *= -lambda / (k + 1);
      }
      m[c] = sum;
    }
  } else {
    double e = std::exp(-lambda);
    m[0] = (1.0 - e) / lambda;
    for (int c = 1; c < kPts; ++c) m[c] = (c * m[c - 1] - e) / lambda;
  }
  return m;
}

// Panel weights for every stencil of kPts nodes that contains the panel,
// indexed by o = start - j + (kPts - 2). toward_right[o][k] integrates
// h e^{-(x_{j+1} - y)} against the k-th Lagrange basis over the panel;
// toward_left[o][k] integrates h e^{-(y - x_j)}.
struct PanelWeights {
  std::array<std::array<double, kPts>, kPts - 1> toward_right{};
  std::array<std::array<double, kPts>, kPts - 1> toward_left{};
};

PanelWeights panel_weights(double h) {
  auto M = exp_moments(h);
  // int_0^1 e^{-h(1-u)} u^c du = sum_i C(c,i) (-1)^i M_i
  std::array<double, kPts> Mr{};
  for (int c = 0; c < kPts; ++c) {
    double binom = 1.0;
    for (int i = 0; i <= c; ++i) {
      Mr[c] += binom * ((i % 2) ? -1.0 : 1.0) * M[i];
      binom = binom * (c - i) / (i + 1);
    }
  }

  PanelWeights w;
  for (int o = 0; o < kPts - 1; ++o) {
    int start = o - (kPts - 2);
    for (int k = 0; k < kPts; ++k) {
      // Monomial coefficients of the Lagrange basis polynomial.
      std::array<double, kPts> poly{};
      poly[0] = 1.0;
      double denom = 1.0;
      int deg = 0;
      for (int l = 0; l < kPts; ++l) {
        if (l == k) continue;
        double root = start + l;
        std::array<double, kPts> next{};
        for (int c = 0; c <= deg; ++c) {
          next[c + 1] += poly[c];
          next[c] -= root * poly[c];
        }
        poly = next;
        ++deg;
        denom *= static_cast<double>(k - l);
      }
      double r = 0.0, l = 0.0;
      for (int c = 0; c < kPts; ++c) {
        r += poly[c] * Mr[c];
        l += poly[c] * M[c];
      }
      w.toward_right[o][k] = h * r / denom;
      w.toward_left[o][k] = h * l / denom;
    }
  }
  return w;
}

// Undivided difference of order `order` starting at node i.
double undivided(const std::vector<double>& f, int i, int order) {
  double acc = 0.0, binom = 1.0;
  for (int k = 0; k <= order; ++k) {
    acc += ((order - k) % 2 ? -binom : binom) * f[i + k];
    binom = binom * (order - k) / (k + 1);
  }
  return std::abs(acc);
}

// Left end of the ENO-selected stencil for the panel [x_j, x_{j+1}]: grow
// from {j, j+1} towards the side with the smaller difference.
int eno_start(const std::vector<double>& f, int j, int n) {
  int lo = j, hi = j + 1;
  for (int order = 2; order < kPts; ++order) {
    bool can_left = lo - 1 >= 0, can_right = hi + 1 <= n - 1;
    if (can_left && (!can_right || undivided(f, lo - 1, order) < undivided(f, lo, order)))
      --lo;
    else
      ++hi;
  }
  return lo;
}

}  // namespace

GridFunction solve_potential(const GridFunction& rho, const PotentialOptions& opts) {
  const auto& f = rho.values();
  const int n = static_cast<int>(f.size());
  if (opts.check_boundary) {
    double edge = std::max(std::abs(f.front()), std::abs(f.back()));
    if (edge > opts.boundary_tol) {
      std::ostringstream msg;
      msg << "density does not decay at the domain boundary (|rho| = " << edge
          << " at x = +-" << rho.half_width() << "); enlarge the domain";
      throw TruncationError(msg.str());
    }
  }
  const double h = rho.spacing();
  const PanelWeights w = panel_weights(h);
  std::vector<double> a(n - 1), b(n - 1);
  for (int j = 0; j + 1 < n; ++j) {
    int start = eno_start(f, j, n);
    int o = start - j + (kPts - 2);
    double ra = 0.0, rb = 0.0;
    for (int k = 0; k < kPts; ++k) {
      ra += w.toward_right[o][k] * f[start + k];
      rb += w.toward_left[o][k] * f[start + k];
    }
    a[j] = ra;
    b[j] = rb;
  }
  const double decay = std::exp(-h);
  std::vector<double> phi(n, 0.0);
  double left = 0.0;
  for (int i = 0; i < n; ++i) {
    phi[i] = left;
    if (i + 1 < n) left = decay * left + a[i];
  }
  double right = 0.0;
  for (int i = n - 1; i >= 0; --i) {
    if (i + 1 < n) right = b[i] + decay * right;
    phi[i] = 0.5 * (phi[i] + right);
  }
  return GridFunction(rho.half_width(), std::move(phi));
}

MaxPrincipleMargins max_principle_margins(const GridFunction& rho, const GridFunction& phi, int n) {
  if (n < 0 || n + 2 > kMaxDerivativeOrder) throw DomainError("max_principle_margins: n in [0, 6]");
  if (!rho.same_grid(phi)) throw DomainError("max_principle_margins: grids differ");
  double rn = spatial_derivative(rho, n).sup_norm();
  double rn2 = spatial_derivative(rho, n + 2).sup_norm();
  double pn = spatial_derivative(phi, n).sup_norm();
  double pn2 = spatial_derivative(phi, n + 2).sup_norm();
  return {rn - pn, std::min(2.0 * rn, rn2) - pn2};
}

// ---------------------------------------------------------------------------

FieldHistory::FieldHistory(std::vector<double> times, std::vector<GridFunction> potentials,
                           int max_order)
    : times_(std::move(times)), max_order_(max_order) {
  if (times_.empty() || times_.size() != potentials.size())
    throw DomainError("FieldHistory: need one potential per time node");
  if (times_.front() != 0.0) throw DomainError("FieldHistory: first time node must be 0");
  for (std::size_t j = 1; j < times_.size(); ++j)
    if (!(times_[j] > times_[j - 1])) throw DomainError("FieldHistory: times must increase");
  if (max_order < 2 || max_order > kMaxDerivativeOrder)
    throw DomainError("FieldHistory: max_order must be in [2, 8]");
  half_width_ = potentials.front().half_width();
  nodes_ = potentials.front().size();
  zero_ = true;
  for (const auto& p : potentials) {
    if (!p.same_grid(potentials.front())) throw DomainError("FieldHistory: slices must share a grid");
    if (p.sup_norm() != 0.0) zero_ = false;
  }

  const std::size_t m = times_.size();
  derivs_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    derivs_[j].reserve(max_order + 1);
    derivs_[j].push_back(potentials[j]);
    for (int d = 1; d <= max_order; ++d) derivs_[j].push_back(spatial_derivative(potentials[j], d));
  }

  // Node slopes in s from the quadratic through neighbouring nodes.
  slopes_.assign(m, std::vector<std::vector<double>>(max_order + 1, std::vector<double>(nodes_, 0.0)));
  if (m == 1) return;
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t i0 = (j == 0) ? 0 : (j == m - 1 ? (m >= 3 ? m - 3 : m - 2) : j - 1);
    std::size_t cnt = std::min<std::size_t>(3, m);
    std::vector<double> ts(cnt);
    for (std::size_t k = 0; k < cnt; ++k) ts[k] = times_[i0 + k];
    auto w = fd_weights(times_[j], ts, 1);
    for (int d = 0; d <= max_order; ++d) {
      auto& out = slopes_[j][d];
      for (std::size_t k = 0; k < cnt; ++k) {
        const auto& v = derivs_[i0 + k][d].values();
        for (std::size_t i = 0; i < nodes_; ++i) out[i] += w[k] * v[i];
      }
    }
  }
}

FieldHistory FieldHistory::from_densities(std::vector<double> times,
                                          const std::vector<GridFunction>& rho, int max_order,
                                          const PotentialOptions& opts) {
  std::vector<GridFunction> pots;
  pots.reserve(rho.size());
  for (const auto& r : rho) pots.push_back(solve_potential(r, opts));
  return FieldHistory(std::move(times), std::move(pots), max_order);
}

FieldHistory FieldHistory::zero(std::vector<double> times, double half_width, std::size_t nodes,
                                int max_order) {
  std::vector<GridFunction> pots(times.size(), GridFunction::zeros(half_width, nodes));
  return FieldHistory(std::move(times), std::move(pots), max_order);
}

const GridFunction& FieldHistory::derivative(std::size_t slice, int order) const {
  if (slice >= times_.size() || order < 0 || order > max_order_)
    throw DomainError("FieldHistory::derivative: index out of range");
  return derivs_[slice][order];
}

double FieldHistory::sup_norm(std::size_t slice, int order) const {
  return derivative(slice, order).sup_norm();
}

std::size_t FieldHistory::locate_time(double s) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), s);
  std::size_t j = static_cast<std::size_t>(it - times_.begin());
  if (j == 0) return 0;
  return std::min(j - 1, times_.size() - 2);
}

void FieldHistory::evaluate(double x, double s, int first, int count, double* out) const {
  if (first < 0 || first + count - 1 > max_order_)
    throw DomainError("FieldHistory::evaluate: derivative order not cached");
  const double tol = 1e-12 * (1.0 + times_.back());
  if (!(s >= -tol && s <= times_.back() + tol))
    throw DomainError("FieldHistory::evaluate: time outside the history");
  if (std::abs(x) > half_width_) {
    // The solver's density vanishes outside [-L, L], where phi is therefore
    // exactly phi(+-L) e^{-(|x| - L)}. Used for integrator stages of
    // characteristics ending near the edge; farther out is an error.
    const double d = std::abs(x) - half_width_;
    if (!(d <= kExteriorFraction * half_width_)) {
      std::ostringstream msg;
      msg << "characteristic left the domain: x = " << x << " at s = " << s;
      throw TruncationError(msg.str());
    }
    const double sign = x > 0.0 ? -1.0 : 1.0;
    const double edge = evaluate(std::copysign(half_width_, x), s, 0) * std::exp(-d);
    for (int k = 0; k < count; ++k) out[k] = ((first + k) % 2 ? sign : 1.0) * edge;
    return;
  }
  if (zero_) {
    std::fill(out, out + count, 0.0);
    return;
  }

  // 9-point barycentric Lagrange in x on uniform nodes.
  constexpr int kPts = 9;
  static constexpr double kBary[kPts] = {1, -8, 28, -56, 70, -56, 28, -8, 1};
  const double h = 2.0 * half_width_ / static_cast<double>(nodes_ - 1);
  const double u = (x + half_width_) / h;
  long start = static_cast<long>(std::floor(u)) - kPts / 2 + 1;
  start = std::clamp(start, 0L, static_cast<long>(nodes_) - kPts);
  double wx[kPts];
  int exact = -1;
  double wsum = 0.0;
  for (int k = 0; k < kPts; ++k) {
    double d = u - static_cast<double>(start + k);
    if (std::abs(d) < 1e-14) {
      exact = k;
      break;
    }
    wx[k] = kBary[k] / d;
    wsum += wx[k];
  }
  if (exact >= 0) {
    for (int k = 0; k < kPts; ++k) wx[k] = (k == exact) ? 1.0 : 0.0;
  } else {
    for (int k = 0; k < kPts; ++k) wx[k] /= wsum;
  }
  auto interp_x = [&](const double* v) {
    double acc = 0.0;
    for (int k = 0; k < kPts; ++k) acc += wx[k] * v[start + k];
    return acc;
  };

  if (times_.size() == 1) {
    for (int c = 0; c < count; ++c) out[c] = interp_x(derivs_[0][first + c].values().data());
    return;
  }
  const std::size_t j = locate_time(s);
  const double s0 = times_[j], s1 = times_[j + 1], ds = s1 - s0;
  const double tau = std::clamp((s - s0) / ds, 0.0, 1.0);
  const double t2 = tau * tau, t3 = t2 * tau;
  const double h00 = 2 * t3 - 3 * t2 + 1, h10 = (t3 - 2 * t2 + tau) * ds;
  const double h01 = -2 * t3 + 3 * t2, h11 = (t3 - t2) * ds;
  for (int c = 0; c < count; ++c) {
    int d = first + c;
    out[c] = h00 * interp_x(derivs_[j][d].values().data()) +
             h10 * interp_x(slopes_[j][d].data()) +
             h01 * interp_x(derivs_[j + 1][d].values().data()) +
             h11 * interp_x(slopes_[j + 1][d].data());
  }
}

double FieldHistory::evaluate(double x, double s, int order) const {
  double v;
  evaluate(x, s, order, 1, &v);
  return v;
}

double FieldHistory::damping_ratio() const {
  double r = 0.0;
  for (std::size_t j = 0; j < times_.size(); ++j)
    r = std::max(r, derivs_[j][2].sup_norm() / damping_bound(times_[j]));
  return r;
}

double FieldHistory::max_force() const {
  double r = 0.0;
  for (std::size_t j = 0; j < times_.size(); ++j) r = std::max(r, derivs_[j][1].sup_norm());
  return r;
}

// ---------------------------------------------------------------------------

double weighted_field_bound(int n, TimePoint t) {
  if (n < 1) throw DomainError("weighted_field_bound: n must be positive");
  double tv = t.value();
  double f = std::tgamma(n + 1.0), f1 = std::tgamma(static_cast<double>(n));
  return std::min(phi_value(n, tv) * f * f / 270.0, phi_value(n - 1, tv) * f1 * f1 / 3.0);
}

double weighted_field_integral(const FieldHistory& hist, int n, TimePoint tp,
                                 double rel_accuracy) {
  if (n < 1 || n + 1 > hist.max_order())
    throw DomainError("weighted_field_integral: order not cached in the history");
  const double t = tp.value();
  if (t > hist.horizon() * (1 + 1e-12)) throw DomainError("weighted_field_integral: history too short");
  if (t == 0.0 || hist.is_zero()) return 0.0;

  const auto& ts = hist.times();
  const std::size_t m = ts.size();
  std::vector<double> sup(m), slope(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) sup[j] = hist.sup_norm(j, n + 1);
  std::size_t covering = 0;
  while (covering < m && ts[covering] < t) ++covering;
  if (covering < 2) throw ConvergenceError("history gap: need at least three time nodes on [0, t]");
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t i0 = (j == 0) ? 0 : (j == m - 1 ? (m >= 3 ? m - 3 : m - 2) : j - 1);
    std::size_t cnt = std::min<std::size_t>(3, m);
    std::vector<double> nodes(ts.begin() + i0, ts.begin() + i0 + cnt);
    auto w = fd_weights(ts[j], nodes, 1);
    for (std::size_t k = 0; k < cnt; ++k) slope[j] += w[k] * sup[i0 + k];
  }

  using GL = boost::math::quadrature::gauss<double, 8>;
  const double gt = gamma_value(t);
  double cubic = 0.0, linear = 0.0, scale = 0.0;
  for (std::size_t j = 0; j + 1 < m && ts[j] < t; ++j) {
    double a = ts[j], b = std::min(ts[j + 1], t), ds = ts[j + 1] - ts[j];
    auto node_value = [&](double s, bool hermite) {
      double tau = (s - ts[j]) / ds;
      if (!hermite) return (1 - tau) * sup[j] + tau * sup[j + 1];
      double t2 = tau * tau, t3 = t2 * tau;
      return (2 * t3 - 3 * t2 + 1) * sup[j] + (t3 - 2 * t2 + tau) * ds * slope[j] +
             (-2 * t3 + 3 * t2) * sup[j + 1] + (t3 - t2) * ds * slope[j + 1];
    };
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    const auto& xs = GL::abscissa();
    const auto& ws = GL::weights();
    for (std::size_t k = 0; k < xs.size(); ++k) {
      for (double sign : {-1.0, 1.0}) {
        double s = mid + sign * half * xs[k];
        double weight = half * ws[k] * std::pow(gamma_value(s), n) * (t - s) / gt;
        cubic += weight * std::max(0.0, node_value(s, true));
        linear += weight * node_value(s, false);
        scale += weight * std::max(sup[j], sup[j + 1]);
      }
    }
  }
  if (std::abs(cubic - linear) > rel_accuracy * scale) {
    std::ostringstream msg;
    msg << "history gap: time nodes too sparse for the weighted integral (cubic " << cubic
        << " vs linear " << linear << ")";
    throw ConvergenceError(msg.str());
  }
  return cubic;
}

}  // namespace vy
