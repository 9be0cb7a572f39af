#include "vy/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "vy/combinatorics.hpp"
#include "vy/error.hpp"
#include "vy/parallel.hpp"
#include "vy/quadrature.hpp"

namespace vy {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

constexpr double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

void check_order(int n) {
  if (n < 0 || n > InitialData::kMaxOrder) throw DomainError("derivative order out of range");
}

struct Window {
  double lo, hi;
};

// x0 interval outside which every term of f~0(x0, v) is negligible for
// v = w0 within `extra` of the free-streaming value (x - x0)/(t+1).
std::optional<Window> x0_window(const InitialData& data, double x, double t, double cutoff, double extra) {
  std::optional<Window> out;
  for (const auto& g : data.terms()) {
    const double r = std::sqrt(std::log(1.0 / cutoff) / g.a) + extra;
    // v in [cv - r, cv + r]
    double lo = x - (t + 1.0) * (g.cv + r), hi = x - (t + 1.0) * (g.cv - r);
    // x0 + v in [cx - r, cx + r]: (t x0 + x)/(t+1) up to the v slack.
    if (t > 0.0) {
      lo = std::max(lo, ((g.cx - r) * (t + 1.0) - x) / t);
      hi = std::min(hi, ((g.cx + r) * (t + 1.0) - x) / t);
    } else if (std::abs(x - g.cx) > r) {
      continue;
    }
    if (!(hi > lo)) continue;
    if (!out) out = Window{lo, hi};
    out->lo = std::min(out->lo, lo);
    out->hi = std::max(out->hi, hi);
  }
  return out;
}

double narrowest_scale(const InitialData& data) {
  double a = 0.0;
  for (const auto& g : data.terms()) a = std::max(a, g.a);
  return a > 0.0 ? 1.0 / std::sqrt(a) : 1.0;
}

struct NodeResult {
  double rho = 0.0;
  std::size_t pairs = 0;
  std::size_t iterations = 0;
  double max_residual = 0.0;
  IntegralBoundValues ladder;  // filled on ladder nodes
};

NodeResult integrate_node(const InitialData& data, const FieldHistory& hist, double x, TimePoint t,
                          Coupling q, const ReconstructOptions& opts, bool with_ladder) {
  NodeResult out;
  const int N = opts.n_max;
  if (with_ladder) {
    out.ladder.data.assign(N + 1, 0.0);
    out.ladder.density.assign(N + 1, 0.0);
    out.ladder.rho_derivs.assign(N + 1, 0.0);
  }
  const double T = t.value();
  const double slack = hist.is_zero() ? 0.0 : 0.75 * hist.max_force() * T;
  auto win = x0_window(data, x, T, opts.cutoff, slack);
  if (!win) return out;
  const double panel = 8.0 * narrowest_scale(data) / opts.nodes_per_unit;
  const auto nodes = gauss_legendre_panels(win->lo, win->hi, panel);

  double prev_x0 = 0.0, prev_v0 = 0.0, prev2_x0 = 0.0, prev2_v0 = 0.0;
  int have = 0;
  double dv[InitialData::kMaxOrder + 1];
  for (const auto& node : nodes) {
    const double x0 = node.x;
    double guess = (x - x0) / (1.0 + T);
    if (have >= 2) guess = prev_v0 + (prev_v0 - prev2_v0) * (x0 - prev_x0) / (prev_x0 - prev2_x0);
    Trajectory tr;
    try {
      tr = solve_bvp_from(x, x0, t, hist, q, guess, opts.bvp);
    } catch (const ConvergenceError& e) {
      std::ostringstream msg;
      msg << e.what() << " (x = " << x << ", x0 = " << x0 << ", t = " << T << ")";
      throw ConvergenceError(msg.str());
    }
    prev2_x0 = prev_x0;
    prev2_v0 = prev_v0;
    prev_x0 = x0;
    prev_v0 = tr.v0;
    ++have;
    ++out.pairs;
    out.iterations += static_cast<std::size_t>(tr.iterations);
    out.max_residual = std::max(out.max_residual, tr.residual);

    const double jac = std::abs(dx0_w(tr));
    if (!with_ladder) {
      out.rho += node.w * data.sheared(x0, tr.v0) * jac;
      continue;
    }
    DerivativeLadder lad(tr, hist, q, N, opts.bvp);
    data.sheared_dv_all(N, x0, tr.v0, dv);
    double c[BellTable::kMaxOrder + 1] = {}, M[BellTable::kMaxOrder + 1] = {}, F[BellTable::kMaxOrder + 1] = {};
    for (int j = 1; j <= N; ++j) c[j] = lad.dx_w0(j);
    for (int j = 0; j <= N; ++j) M[j] = lad.dx_dx0_w(j);
    if (!(M[0] < 0.0)) throw ConvergenceError("d_x0 w is not negative along a characteristic");
    BellTable bell;
    bell.fill(c, N);
    for (int k = 0; k <= N; ++k) F[k] = bell.compose(dv, k);
    out.rho += node.w * dv[0] * (-M[0]);
    for (int n = 0; n <= N; ++n) {
      double G = 0.0;
      for (int k = 0; k <= n; ++k) G += binomial(n, k) * F[k] * M[n - k];
      out.ladder.data[n] += node.w * std::abs(F[n]);
      out.ladder.density[n] += node.w * std::abs(G);
      out.ladder.rho_derivs[n] -= node.w * G;
    }
  }
  return out;
}

}  // namespace

InitialData InitialData::gaussian(double amplitude, double a) {
  return mixture({GaussianTerm{amplitude, 0.0, 0.0, a}});
}

InitialData InitialData::mixture(std::vector<GaussianTerm> terms) {
  for (const auto& g : terms)
    if (!(g.a > 0.0) || !std::isfinite(g.weight) || !std::isfinite(g.cx) || !std::isfinite(g.cv))
      throw DomainError("Gaussian term needs finite parameters and a > 0");
  InitialData d;
  d.terms_ = std::move(terms);
  return d;
}

bool InitialData::is_zero() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const GaussianTerm& g) { return g.weight == 0.0; });
}

InitialData InitialData::scaled(double factor) const {
  InitialData d = *this;
  for (auto& g : d.terms_) g.weight *= factor;
  return d;
}

double InitialData::f0(double x, double v) const {
  double s = 0.0;
  for (const auto& g : terms_) {
    const double X = x - g.cx, V = v - g.cv;
    s += g.weight * std::exp(-g.a * (X * X + V * V));
  }
  return s;
}

double InitialData::directional(int n, double x, double v) const {
  check_order(n);
  double s = 0.0;
  for (const auto& g : terms_) {
    const double X = x - g.cx, V = v - g.cv;
    const double y = std::sqrt(0.5 * g.a) * (X + V);
    double h0 = 1.0, h1 = 2.0 * y;
    double hn = (n == 0) ? h0 : h1;
    for (int k = 1; k < n; ++k) {
      hn = 2.0 * y * h1 - 2.0 * k * h0;
      h0 = h1;
      h1 = hn;
    }
    s += g.weight * std::pow(-std::sqrt(2.0 * g.a), n) * hn * std::exp(-g.a * (X * X + V * V));
  }
  return s;
}

void InitialData::sheared_dv_all(int n, double x0, double v, double* out) const {
  check_order(n);
  std::fill(out, out + n + 1, 0.0);
  const double x = x0 + v;
  for (const auto& g : terms_) {
    const double X = x - g.cx, V = v - g.cv;
    const double y = std::sqrt(0.5 * g.a) * (X + V);
    const double e = g.weight * std::exp(-g.a * (X * X + V * V));
    const double step = -std::sqrt(2.0 * g.a);
    double h0 = 1.0, h1 = 2.0 * y, scale = e;
    out[0] += e;
    for (int k = 1; k <= n; ++k) {
      scale *= step;
      out[k] += scale * h1;
      const double h2 = 2.0 * y * h1 - 2.0 * k * h0;
      h0 = h1;
      h1 = h2;
    }
  }
}

double InitialData::mass() const {
  double m = 0.0;
  for (const auto& g : terms_) m += g.weight * M_PI / g.a;
  return m;
}

double InitialData::support_radius(double cutoff) const {
  double r = 0.0;
  for (const auto& g : terms_) r = std::max(r, std::sqrt(std::log(1.0 / cutoff) / g.a));
  return r;
}

SupportBox InitialData::support(double cutoff) const {
  if (terms_.empty()) return {0.0, 0.0, 0.0, 0.0};
  SupportBox b{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest(),
               std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
  for (const auto& g : terms_) {
    const double r = std::sqrt(std::log(1.0 / cutoff) / g.a);
    b.x_lo = std::min(b.x_lo, g.cx - r);
    b.x_hi = std::max(b.x_hi, g.cx + r);
    b.v_lo = std::min(b.v_lo, g.cv - r);
    b.v_hi = std::max(b.v_hi, g.cv + r);
  }
  return b;
}

InitialData shear_transform(const InitialData& f0) { return f0; }

DataCertificate certify_initial_data(const InitialData& data, int n_max, double safety, double rel_tol) {
  if (n_max < 0 || n_max + 1 > InitialData::kMaxOrder) throw DomainError("certify_initial_data: order out of range");
  if (!(safety >= 1.0)) throw DomainError("certify_initial_data: safety factor must be >= 1");
  DataCertificate cert;
  const SupportBox box = data.support(1e-24);
  for (int n = 0; n <= n_max; ++n) {
    double norm = 0.0, err = 0.0;
    if (!data.is_zero()) {
      // In u = x + v, w = x - v the sign changes of a single term's Hermite
      // factor are lines u = const, so the inner integrals are smooth.
      auto r = integrate_adaptive_2d(
          [&](double u, double w) { return 0.5 * std::abs(data.directional(n + 1, 0.5 * (u + w), 0.5 * (u - w))); },
          box.x_lo + box.v_lo, box.x_hi + box.v_hi, box.x_lo - box.v_hi, box.x_hi - box.v_lo, rel_tol);
      norm = r.value;
      err = r.error;
    }
    const double bound = factorial(n) * factorial(n) / (1e4 * safety);
    cert.norms.push_back(norm);
    cert.errors.push_back(err);
    cert.margins.push_back(bound - norm);
    if (bound - norm < 0.0 && cert.passed) {
      cert.passed = false;
      cert.failing_order = n;
    }
  }
  return cert;
}

InitialData auto_tune_amplitude(const InitialData& shape, int n_max, double safety, double slack) {
  if (shape.is_zero()) return shape;
  const DataCertificate unit = certify_initial_data(shape, n_max, 1.0);
  double factor = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= n_max; ++n)
    if (unit.norms[n] > 0.0)
      factor = std::min(factor, factorial(n) * factorial(n) / (1e4 * safety * unit.norms[n]));
  return shape.scaled(factor * (1.0 - slack));
}

GridFunction free_streaming_density(const InitialData& data, TimePoint t, int n, double half_width,
                                    std::size_t nodes, double rel_tol) {
  check_order(n);
  const double T = t.value();
  GridFunction out = GridFunction::zeros(half_width, nodes);
  std::vector<double> vals(out.size(), 0.0);
  const double scale = std::pow(T + 1.0, -n - 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out.x(i);
    auto win = x0_window(data, x, T, 1e-20, 0.0);
    if (!win) continue;
    auto r = integrate_adaptive([&](double x0) { return data.sheared_dv(n, x0, (x - x0) / (T + 1.0)); },
                                win->lo, win->hi, rel_tol);
    vals[i] = scale * r.value;
  }
  return GridFunction(half_width, std::move(vals));
}

double free_streaming_exact(const InitialData& data, TimePoint t, int n, double x) {
  if (n < 0 || n > InitialData::kMaxOrder) throw DomainError("free_streaming_exact: order out of range");
  const double tt = t.value();
  double s = 0.0;
  for (const auto& g : data.terms()) {
    const double b = g.a / (1.0 + tt * tt);
    const double y = x - g.cx - g.cv * tt;
    const double z = std::sqrt(b) * y;
    double h0 = 1.0, h1 = 2.0 * z;
    double hn = (n == 0) ? h0 : h1;
    for (int k = 1; k < n; ++k) {
      hn = 2.0 * z * h1 - 2.0 * k * h0;
      h0 = h1;
      h1 = hn;
    }
    s += g.weight * M_PI / g.a * std::sqrt(b / M_PI) * std::pow(-std::sqrt(b), n) * hn * std::exp(-z * z);
  }
  return s;
}

double free_streaming_envelope(const DataCertificate& cert, int n, TimePoint t) {
  return cert.norms.at(n) / std::pow(t.value() + 1.0, n + 1);
}

DensitySlice::DensitySlice(double t, GridFunction rho, int n_max) : t_(t) {
  if (n_max < 0 || n_max > kMaxDerivativeOrder) throw DomainError("DensitySlice: order out of range");
  TimePoint check(t);
  derivs_.push_back(std::move(rho));
  for (int n = 1; n <= n_max; ++n) derivs_.push_back(spatial_derivative(derivs_[0], n));
  for (const auto& d : derivs_) sups_.push_back(d.sup_norm());
}

double DensitySlice::constant(int n) const {
  const double f = factorial(n);
  return sup(n) * std::pow(gamma_value(t_), n + 1) / (f * f * phi_value(n, t_));
}

double decay_envelope(int n, double t) {
  const double f = factorial(n);
  return std::pow(3.0, n) * f * f * std::pow(t + 1.0, -n - 1) / 1e3;
}

double DensitySlice::envelope_ratio(int n) const { return sup(n) / decay_envelope(n, t_); }

void DensitySlice::write_csv(std::ostream& os) const {
  os << "x,rho";
  for (int n = 1; n <= n_max(); ++n) os << ",d" << n << "rho";
  os << '\n';
  char buf[32];
  const auto& g = rho();
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", g.x(i));
    os << buf;
    for (const auto& d : derivs_) {
      std::snprintf(buf, sizeof buf, ",%.17g", d[i]);
      os << buf;
    }
    os << '\n';
  }
}

void write_decay_csv(std::ostream& os, const std::vector<DensitySlice>& slices) {
  os << "t,n,sup,c_n,envelope\n";
  char buf[160];
  for (const auto& s : slices)
    for (int n = 0; n <= s.n_max(); ++n) {
      std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%.17g\n", s.time(), n, s.sup(n), s.constant(n),
                    decay_envelope(n, s.time()));
      os << buf;
    }
}

double data_integral_bound(int n, TimePoint t) {
  const double f = factorial(n);
  return f * f * phi_eval(n, t) / (8000.0 * std::pow(gamma_eval(t).value, n));
}

double density_integral_bound(int n, TimePoint t) {
  const double f = factorial(n);
  return f * f * phi_eval(n, t) / (3000.0 * std::pow(gamma_eval(t).value, n));
}

IntegralBoundValues integral_bound_values(const InitialData& data, const FieldHistory& hist, double x,
                                  TimePoint t, Coupling q, const ReconstructOptions& opts) {
  if (std::abs(x) > hist.half_width()) throw DomainError("x outside the field grid");
  return integrate_node(data, hist, x, t, q, opts, true).ladder;
}

ReconstructResult reconstruct_density(const InitialData& data, const FieldHistory& hist, TimePoint t,
                                      Coupling q, const ReconstructOptions& opts) {
  if (t.value() > hist.horizon() * (1.0 + 1e-14)) throw DomainError("field history does not span [0, t]");
  if (opts.n_max < 0 || opts.n_max > 6) throw DomainError("reconstruct: n_max must be in [0, 6]");
  if (!(opts.nodes_per_unit > 0.0)) throw DomainError("reconstruct: nodes_per_unit must be positive");
  const GridFunction grid = GridFunction::zeros(hist.half_width(), hist.grid_nodes());
  const std::size_t N = grid.size();
  const int stride = opts.ladder_stride;
  std::vector<NodeResult> nodes(N);
  parallel_for(N, opts.jobs, [&](std::size_t i) {
    const bool lad = stride > 0 && i % static_cast<std::size_t>(stride) == 0;
    nodes[i] = integrate_node(data, hist, grid.x(i), t, q, opts, lad);
  });

  ReconstructResult res{GridFunction::zeros(hist.half_width(), N), {}, {}, {}, {}, {}, 0, 0, 0.0};
  std::vector<double> vals(N);
  for (std::size_t i = 0; i < N; ++i) {
    vals[i] = nodes[i].rho;
    res.pairs += nodes[i].pairs;
    res.newton_iterations += nodes[i].iterations;
    res.max_residual = std::max(res.max_residual, nodes[i].max_residual);
  }
  res.rho = GridFunction(hist.half_width(), std::move(vals));
  if (stride <= 0) return res;

  const int nm = opts.n_max;
  res.ladder_derivs.assign(nm + 1, {});
  res.route_discrepancy.assign(nm + 1, 0.0);
  res.route_discrepancy_abs.assign(nm + 1, 0.0);
  res.bounds.data.assign(nm + 1, 1.0);
  res.bounds.density.assign(nm + 1, 1.0);
  std::vector<GridFunction> grid_d;
  for (int n = 0; n <= nm; ++n) grid_d.push_back(n == 0 ? res.rho : spatial_derivative(res.rho, n));
  for (std::size_t i = 0; i < N; i += static_cast<std::size_t>(stride)) {
    res.ladder_x.push_back(grid.x(i));
    const auto& L = nodes[i].ladder;
    for (int n = 0; n <= nm; ++n) {
      res.ladder_derivs[n].push_back(L.rho_derivs[n]);
      res.route_discrepancy_abs[n] = std::max(res.route_discrepancy_abs[n], std::abs(L.rho_derivs[n] - grid_d[n][i]));
      const double b1 = data_integral_bound(n, t), b2 = density_integral_bound(n, t);
      res.bounds.data[n] = std::min(res.bounds.data[n], (b1 - L.data[n]) / b1);
      res.bounds.density[n] = std::min(res.bounds.density[n], (b2 - L.density[n]) / b2);
    }
  }
  for (int n = 0; n <= nm; ++n) {
    const double sup = grid_d[n].sup_norm();
    res.route_discrepancy[n] = sup > 0.0 ? res.route_discrepancy_abs[n] / sup : res.route_discrepancy_abs[n];
  }
  return res;
}

}  // namespace vy
