#include "vy/quadrature.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <sstream>

#include "vy/error.hpp"

namespace vy {

namespace {

struct Panel {
  double a, b, value, error, l1;
  bool operator<(const Panel& o) const { return error < o.error; }
};

// One Gauss-Kronrod 7/15 panel with Boost's tabulated nodes and weights.
Panel gk15(const std::function<double(double)>& f, double a, double b) {
  using K15 = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G7 = boost::math::quadrature::gauss<double, 7>;
  const auto& xk = K15::abscissa();
  const auto& wk = K15::weights();
  const auto& wg = G7::weights();
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double fc = f(mid);
  double k = wk[0] * fc, g = wg[0] * fc, l = wk[0] * std::abs(fc);
  for (std::size_t i = 1; i < xk.size(); ++i) {
    double f1 = f(mid - half * xk[i]), f2 = f(mid + half * xk[i]);
    k += wk[i] * (f1 + f2);
    l += wk[i] * (std::abs(f1) + std::abs(f2));
    if (i % 2 == 0) g += wg[i / 2] * (f1 + f2);
  }
  Panel p{a, b, k * half, std::abs(k - g) * half, l * half};
  p.error = std::max(p.error, 50.0 * std::numeric_limits<double>::epsilon() * p.l1);
  return p;
}

}  // namespace

QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              double rel_tol, std::span<const double> breakpoints,
                              double abs_floor, unsigned max_depth) {
  if (!(b >= a)) throw DomainError("integrate_adaptive: need a <= b");
  rel_tol = std::max(rel_tol, 1e-13);
  std::vector<double> cuts{a};
  for (double c : breakpoints)
    if (c > a && c < b) cuts.push_back(c);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<Panel> heap;
  double err = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Panel p = gk15(f, cuts[i], cuts[i + 1]);
    err += p.error;
    l1 += p.l1;
    heap.push(p);
  }
  const std::size_t max_panels = std::size_t{1} << std::min(max_depth, 24u);
  const double min_width = 1e-14 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
  while (err > rel_tol * std::max(l1, abs_floor) && heap.size() < max_panels) {
    Panel p = heap.top();
    if (p.b - p.a < min_width) break;
    heap.pop();
    double m = 0.5 * (p.a + p.b);
    Panel left = gk15(f, p.a, m), right = gk15(f, m, p.b);
    err += left.error + right.error - p.error;
    l1 += left.l1 + right.l1 - p.l1;
    heap.push(left);
    heap.push(right);
  }
  QuadResult total;
  while (!heap.empty()) {
    const Panel& p = heap.top();
    total.value += p.value;
    total.error += p.error;
    total.l1 += p.l1;
    heap.pop();
  }
  if (!std::isfinite(total.value) || total.error > rel_tol * std::max(total.l1, abs_floor)) {
    std::ostringstream msg;
    msg << "adaptive quadrature did not reach tolerance " << rel_tol << " on [" << a << ", "
        << b << "]: error " << total.error << ", |f| integral " << total.l1;
    throw ConvergenceError(msg.str());
  }
  return total;
}

QuadResult integrate_adaptive_2d(const std::function<double(double, double)>& f, double xa,
                                 double xb, double va, double vb, double rel_tol,
                                 double abs_floor) {
  // The inner tolerance is tighter so that inner noise does not stall the outer rule.
  double inner_tol = rel_tol * 0.1;
  double inner_err_sum = 0.0;
  auto outer = [&](double v) {
    auto inner = [&](double x) { return f(x, v); };
    QuadResult r = integrate_adaptive(inner, xa, xb, inner_tol, {}, abs_floor);
    inner_err_sum = std::max(inner_err_sum, r.error);
    return r.value;
  };
  QuadResult r = integrate_adaptive(outer, va, vb, rel_tol, {}, abs_floor);
  r.error += inner_err_sum * (vb - va);
  return r;
}

std::vector<QuadNode> gauss_legendre_panels(double a, double b, double panel_width) {
  if (!(b > a) || !(panel_width > 0)) throw DomainError("gauss_legendre_panels: bad interval");
  using GL = boost::math::quadrature::gauss<double, 8>;
  const auto& abscissa = GL::abscissa();
  const auto& weights = GL::weights();
  auto panels = static_cast<std::size_t>(std::ceil((b - a) / panel_width - 1e-12));
  panels = std::max<std::size_t>(panels, 1);
  double h = (b - a) / static_cast<double>(panels);
  std::vector<QuadNode> nodes;
  nodes.reserve(panels * 8);
  for (std::size_t p = 0; p < panels; ++p) {
    double mid = a + (static_cast<double>(p) + 0.5) * h;
    double half = 0.5 * h;
    for (std::size_t k = 0; k < abscissa.size(); ++k) {
      nodes.push_back({mid - half * abscissa[k], half * weights[k]});
      if (abscissa[k] != 0.0) nodes.push_back({mid + half * abscissa[k], half * weights[k]});
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](const QuadNode& l, const QuadNode& r) { return l.x < r.x; });
  return nodes;
}

}  // namespace vy
