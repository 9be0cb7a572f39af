#include "vy/comparison_ode.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vy/error.hpp"
#include "vy/quadrature.hpp"

namespace vy {

CoefficientPath::CoefficientPath(Rule h, std::vector<double> breakpoints)
    : rule_(std::move(h)), breakpoints_(std::move(breakpoints)) {
  if (!rule_) throw DomainError("CoefficientPath: empty rule");
  std::sort(breakpoints_.begin(), breakpoints_.end());
}

CoefficientPath CoefficientPath::zero() { return CoefficientPath([](double) { return 0.0; }); }

CoefficientPath CoefficientPath::extreme(int sign) {
  if (sign != 1 && sign != -1) throw DomainError("CoefficientPath::extreme: sign must be +-1");
  return CoefficientPath([sign](double s) { return sign * damping_bound(s); });
}

CoefficientPath CoefficientPath::random(std::uint64_t seed, double horizon) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (seed % 2 == 1) {
    // theta = sin(sum of a few random sinusoids on log-spread frequencies)
    std::vector<std::array<double, 3>> modes;
    for (int k = 0; k < 4; ++k) {
      double freq = std::pow(10.0, -1.5 + 2.5 * unit(rng)) * (1.0 + 10.0 / (1.0 + horizon));
      modes.push_back({3.0 * (unit(rng) - 0.5), freq, 2 * M_PI * unit(rng)});
    }
    return CoefficientPath([modes](double s) {
      double arg = 0.0;
      for (auto [a, w, p] : modes) arg += a * std::sin(w * s + p);
      return std::sin(arg) * damping_bound(s);
    });
  }
  int pieces = 2 + static_cast<int>(rng() % 6);
  std::vector<double> cuts;
  for (int k = 0; k + 1 < pieces; ++k) cuts.push_back(horizon * unit(rng));
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> level(pieces);
  for (double& l : level) l = 2.0 * unit(rng) - 1.0;
  return CoefficientPath(
      [cuts, level](double s) {
        auto idx = static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), s) - cuts.begin());
        return level[idx] * damping_bound(s);
      },
      cuts);
}

double CoefficientPath::certify(double t, int samples) {
  if (samples < 2) throw DomainError("certify: need at least two samples");
  double worst = 0.0;
  for (int i = 0; i <= samples; ++i) {
    double s = t * i / samples;
    worst = std::max(worst, std::abs(rule_(s)) / damping_bound(s));
  }
  for (double b : breakpoints_)
    if (b <= t) {
      worst = std::max(worst, std::abs(rule_(b)) / damping_bound(b));
    }
  if (worst <= 1.0 + 1e-12) certified_horizon_ = std::max(t, certified_horizon_.value_or(0.0));
  return worst;
}

namespace {

void require_admissible(const CoefficientPath& h, double t) {
  if (h.certified_for(t)) return;
  CoefficientPath copy = h;
  double ratio = copy.certify(t);
  if (ratio > 1.0 + 1e-12)
    throw DomainError("inadmissible coefficient: |h| exceeds -gamma''/gamma by factor " +
                      std::to_string(ratio));
}

LinearBvpSolution solve_profile(const CoefficientPath& h, const std::function<double(double)>* F,
                                double t, BoundaryProfile profile, const OdeOptions& opt) {
  if (!(t > 0.0)) throw DomainError("boundary problems need t > 0");
  require_admissible(h, t);
  using Fw = LinearBvpSolution::Forward;
  using Bw = LinearBvpSolution::Backward;

  auto forward = std::make_shared<DenseSolution<Fw>>();
  auto frhs = [&](double s, const Fw& y, Fw& dy) {
    dy[0] = y[1];
    dy[1] = h(s) * y[0];
    dy[2] = F ? (*F)(s)*y[0] : 0.0;
  };
  integrate(frhs, 0.0, t, Fw{1.0, 1.0, 0.0}, opt, h.breakpoints(), forward.get());
  // Positivity is what makes 1/y1^2 integrable; it holds under admissibility.
  for (double s : forward->nodes())
    if (!((*forward)(s)[0] > 0.0)) throw ConvergenceError("growing solution lost positivity");

  std::vector<double> mirrored;
  for (double b : h.breakpoints())
    if (b > 0 && b < t) mirrored.push_back(t - b);
  auto backward = std::make_shared<DenseSolution<Bw>>();
  auto brhs = [&](double r, const Bw& y, Bw& dy) {
    double s = t - r;
    double y1 = (*forward)(s)[0];
    dy[0] = 1.0 / (y1 * y1);
    dy[1] = F ? (*F)(s)*y1 * y[0] : 0.0;
  };
  OdeOptions bopt = opt;
  bopt.abs_tol = opt.abs_tol * 1e-4;
  bopt.rel_tol = opt.rel_tol * 1e-2;
  integrate(brhs, 0.0, t, Bw{0.0, 0.0}, bopt, mirrored, backward.get());
  return LinearBvpSolution(forward, backward, profile, t);
}

}  // namespace

LinearBvpSolution::LinearBvpSolution(std::shared_ptr<const DenseSolution<Forward>> forward,
                                     std::shared_ptr<const DenseSolution<Backward>> backward,
                                     BoundaryProfile profile, double horizon, double factor)
    : forward_(std::move(forward)), backward_(std::move(backward)), profile_(profile), t_(horizon),
      factor_(factor) {}

double LinearBvpSolution::value(double s) const {
  Forward f = (*forward_)(s);
  if (profile_ == BoundaryProfile::kGrowing) return factor_ * f[0];
  Backward b = (*backward_)(t_ - s);
  double y2 = f[0] * b[0];
  if (profile_ == BoundaryProfile::kDecaying) return factor_ * y2;
  return factor_ * (-y2 * f[2] - f[0] * b[1]);
}

double LinearBvpSolution::derivative(double s) const {
  Forward f = (*forward_)(s);
  if (profile_ == BoundaryProfile::kGrowing) return factor_ * f[1];
  Backward b = (*backward_)(t_ - s);
  double dy2 = f[1] * b[0] - 1.0 / f[0];
  if (profile_ == BoundaryProfile::kDecaying) return factor_ * dy2;
  return factor_ * (-dy2 * f[2] - f[1] * b[1]);
}

double LinearBvpSolution::boundary_residual() const {
  double y0 = value(0.0), dy0 = derivative(0.0), yt = value(t_);
  switch (profile_) {
    case BoundaryProfile::kGrowing:
      return std::abs(y0 - dy0);
    case BoundaryProfile::kDecaying:
      return std::abs(y0 - dy0 - factor_) + std::abs(yt);
    case BoundaryProfile::kForced:
      return std::abs(y0 - dy0) + std::abs(yt);
  }
  return 0.0;
}

LinearBvpSolution LinearBvpSolution::scaled(double factor) const {
  LinearBvpSolution r = *this;
  r.factor_ *= factor;
  return r;
}

LinearBvpSolution solve_y1(const CoefficientPath& h, TimePoint t, double c, const OdeOptions& opt) {
  if (!(c > 0.0)) throw DomainError("solve_y1: c must be positive");
  return solve_profile(h, nullptr, t.value(), BoundaryProfile::kGrowing, opt).scaled(c);
}

LinearBvpSolution solve_y2(const CoefficientPath& h, TimePoint t, const OdeOptions& opt) {
  return solve_profile(h, nullptr, t.value(), BoundaryProfile::kDecaying, opt);
}

LinearBvpSolution solve_forced(const CoefficientPath& h, const std::function<double(double)>& F,
                               TimePoint t, const OdeOptions& opt) {
  if (!F) throw DomainError("solve_forced: empty forcing");
  return solve_profile(h, &F, t.value(), BoundaryProfile::kForced, opt);
}

double gamma_tilde(TimePoint tp, double s) {
  double t = tp.value();
  if (!(s >= 0.0 && s <= t)) throw DomainError("gamma_tilde: s outside [0, t]");
  if (s == t) return 0.0;
  auto q = integrate_adaptive([](double tau) { double g = gamma_value(tau); return 1.0 / (g * g); },
                              s, t, 1e-12);
  return gamma_value(s) * q.value;
}

GreenKernel::GreenKernel(const CoefficientPath& h, TimePoint t, const OdeOptions& opt)
    : t_(t.value()), y1_(solve_y1(h, t, 1.0, opt)), y2_(solve_y2(h, t, opt)) {}

double GreenKernel::operator()(double s, double tau) const {
  if (!(s >= 0 && s <= t_ && tau >= 0 && tau <= t_)) throw DomainError("kernel arguments outside [0, t]");
  return y1_.value(std::min(s, tau)) * y2_.value(std::max(s, tau));
}

double GreenKernel::bound(double s, double tau) const {
  return std::min(gamma_value(s) * (t_ - tau), gamma_value(tau) * (t_ - s)) / gamma_value(t_);
}

double kernel_bound_margin(const CoefficientPath& h, TimePoint t, double s, double tau) {
  return GreenKernel(h, t).margin(s, tau);
}

double ComparisonMargins::min() const {
  return std::min({y1_positive, y1_gamma_ratio, y1_over_gamma_monotone, y2_bounds, y2_tilde_monotone,
                   product_bound, gamma_tilde_bound, wronskian, forced_gamma, forced_linear, kernel,
                   boundary_residual});
}

ComparisonMargins comparison_margins(const CoefficientPath& h, const std::function<double(double)>& F,
                                     TimePoint tp, int samples) {
  const double t = tp.value();
  GreenKernel K(h, tp);
  const auto& y1 = K.y1();
  const auto& y2 = K.y2();
  auto y = solve_forced(h, F, tp);
  const double gt = gamma_value(t);

  std::vector<double> grid;
  for (int i = 0; i < samples; ++i) grid.push_back(t * i / samples);
  for (int j = 3; j <= 6; ++j) grid.push_back(t - t * std::pow(10.0, -j));
  std::sort(grid.begin(), grid.end());

  ComparisonMargins m{};
  m.y1_positive = 1e300;
  m.y1_gamma_ratio = m.y1_over_gamma_monotone = m.y2_bounds = m.y2_tilde_monotone = 1e300;
  m.product_bound = m.gamma_tilde_bound = 1e300;
  m.wronskian = 0.0;
  const double y1t = y1.value(t);
  double prev_r1 = -1, prev_r2 = -1;
  double sup_gamma = 0.0, sup_linear = std::abs(y.derivative(t));
  for (double s : grid) {
    double g = gamma_value(s);
    double a = y1.value(s), b = y2.value(s);
    double gtil = gamma_tilde(tp, s);
    double lin = (t - s) / gt;
    m.y1_positive = std::min(m.y1_positive, a / y1t);
    double cap = g * y1t / gt;
    m.y1_gamma_ratio = std::min(m.y1_gamma_ratio, (cap - a) / cap);
    double r1 = a / g;
    if (prev_r1 > 0) m.y1_over_gamma_monotone = std::min(m.y1_over_gamma_monotone, (r1 - prev_r1) / prev_r1);
    prev_r1 = r1;
    m.y2_bounds = std::min({m.y2_bounds, b / lin, (lin - b) / lin});
    double r2 = b / gtil;
    if (prev_r2 > 0) m.y2_tilde_monotone = std::min(m.y2_tilde_monotone, (prev_r2 - r2) / prev_r2);
    prev_r2 = r2;
    m.product_bound = std::min(m.product_bound, (g * gtil - a * b) / (g * gtil));
    m.gamma_tilde_bound = std::min(m.gamma_tilde_bound, (lin - gtil) / lin);
    double w = y2.derivative(s) * a - y1.derivative(s) * b;
    m.wronskian = std::min(m.wronskian, -std::abs(w + 1.0));
    double ys = std::abs(y.value(s));
    sup_gamma = std::max(sup_gamma, ys / g);
    sup_linear = std::max(sup_linear, ys / (t - s));
  }
  // Endpoint s = t: the (t-s) bounds become slope bounds.
  m.y2_bounds = std::min(m.y2_bounds, (1.0 / gt - std::abs(y2.derivative(t))) * gt);
  sup_gamma = std::max(sup_gamma, std::abs(y.value(t)) / gt);

  std::vector<double> bps = h.breakpoints();
  auto absF = [&](double s) { return std::abs(F(s)); };
  double rhs_gamma = integrate_adaptive([&](double s) { return absF(s) * (t - s) / gt; }, 0.0, t, 1e-11, bps, 1e-300).value;
  double rhs_linear = integrate_adaptive([&](double s) { return absF(s) * gamma_value(s) / gt; }, 0.0, t, 1e-11, bps, 1e-300).value;
  m.forced_gamma = rhs_gamma > 0 ? (rhs_gamma - sup_gamma) / rhs_gamma : -sup_gamma;
  m.forced_linear = rhs_linear > 0 ? (rhs_linear - sup_linear) / rhs_linear : -sup_linear;

  m.kernel = 1e300;
  std::vector<double> coarse;
  for (std::size_t i = 0; i < grid.size(); i += 8) coarse.push_back(grid[i]);
  coarse.push_back(t);
  for (double s : coarse)
    for (double tau : coarse) {
      double bnd = K.bound(s, tau);
      double k = std::abs(K(s, tau));
      m.kernel = std::min(m.kernel, bnd > 0 ? (bnd - k) / bnd : -k);
    }

  m.boundary_residual = -std::max({y1.boundary_residual(), y2.boundary_residual(), y.boundary_residual()});
  return m;
}

}  // namespace vy
