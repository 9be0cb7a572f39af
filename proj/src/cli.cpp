#include "vy/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "vy/characteristics.hpp"
#include "vy/combinatorics.hpp"
#include "vy/comparison_ode.hpp"
#include "vy/error.hpp"
#include "vy/grid.hpp"
#include "vy/parallel.hpp"
#include "vy/screened_field.hpp"
#include "vy/weights.hpp"

namespace vy {

namespace {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// CSV builder with full precision so reruns are byte-identical.
class Csv {
 public:
  explicit Csv(const std::string& header) {
    os_.precision(17);
    os_ << header << '\n';
  }
  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((os_ << (first ? "" : ",") << v, first = false), ...);
    os_ << '\n';
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<double> geometric_times(double horizon, double first, double ratio) {
  std::vector<double> t{0.0};
  for (double s = first; s < horizon; s *= ratio) t.push_back(s);
  t.push_back(horizon);
  return t;
}

// Asymmetric field that does not decay; exercises the nonlinear ladder terms.
FieldHistory strong_field() {
  auto times = geometric_times(4.0, 0.05, 1.3);
  std::vector<GridFunction> rho;
  for (double s : times)
    rho.push_back(GridFunction::sample(20.0, 1601, [s](double x) {
      return 0.2 / std::pow(1.0 + s, 1.5) *
             (std::exp(-(x - 0.5) * (x - 0.5)) + 0.5 * std::exp(-2.0 * (x + 1.0) * (x + 1.0)));
    }));
  return FieldHistory::from_densities(times, rho, 8);
}

// Spreading density A/(1+s) exp(-x^2/(1+s)^2) whose curvature stays under the damping bound.
FieldHistory spreading_field() {
  auto times = geometric_times(10.0, 0.05, 1.2);
  std::vector<GridFunction> rho;
  for (double s : times)
    rho.push_back(GridFunction::sample(60.0, 1201, [s](double x) {
      const double w = 1.0 + s;
      return 2e-3 / w * std::exp(-x * x / (w * w));
    }));
  return FieldHistory::from_densities(times, rho, 8);
}

BvpOptions tight_bvp() {
  BvpOptions o;
  o.tol = 1e-13;
  o.ode.abs_tol = 1e-13;
  o.ode.rel_tol = 1e-13;
  return o;
}

// Seven-point centred finite difference of order `order`.
double central_fd(const std::function<double(double)>& f, double z, double step, int order) {
  std::vector<double> nodes;
  for (int k = -3; k <= 3; ++k) nodes.push_back(z + k * step);
  auto w = fd_weights(z, nodes, order);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) acc += w[i] * f(nodes[i]);
  return acc;
}

}  // namespace

void SuiteResult::fail(const std::string& what) {
  passed = false;
  failures.push_back(what);
}

double SuiteResult::metric(const std::string& key) const {
  for (const auto& [k, v] : metrics)
    if (k == key) return v;
  throw DomainError("suite " + name + " has no metric " + key);
}

std::string SuiteResult::summary() const {
  std::ostringstream os;
  os << name << ": " << (passed ? "PASS" : "FAIL") << " (" << fmt(seconds) << " s";
  for (const auto& [k, v] : metrics) os << ", " << k << " " << fmt(v);
  os << ")";
  if (!failures.empty()) os << ", " << failures.size() << " failed checks";
  return os.str();
}

SuiteResult tuple_bounds_suite(int n_max, int power_sum_max, double tol) {
  Stopwatch clock;
  SuiteResult r;
  r.name = "tuple_bounds";
  Csv margins("n,t,tuples,factorial_min,weighted_min,series_margin");
  double w1 = 1e300, w2 = 1e300, w4 = 1e300;
  for (int n = 1; n <= n_max; ++n)
    for (double t : kCertificationTimes) {
      auto rep = tuple_bound_margins(n, TimePoint(t), std::max(n_max, kDefaultMaxOrder));
      double m1 = 1e300, m2 = 1e300;
      for (const auto& m : rep.factorial_margins) m1 = std::min(m1, m.margin);
      for (const auto& m : rep.weighted_margins) m2 = std::min(m2, m.margin);
      if (rep.weighted_margins.empty()) m2 = 0.0;
      if (rep.factorial_margins.empty()) m1 = 0.0;
      margins.row(n, t, rep.tuples.size(), m1, m2, rep.series_margin);
      w1 = std::min(w1, m1);
      w2 = std::min(w2, m2);
      w4 = std::min(w4, rep.series_margin);
      const std::string at = " at n=" + std::to_string(n) + ", t=" + fmt(t);
      r.check(m1 >= -tol, "factorial margin " + fmt(m1) + at);
      r.check(m2 >= -tol, "weighted margin " + fmt(m2) + at);
      r.check(rep.series_margin >= -tol, "series margin " + fmt(rep.series_margin) + at);
    }
  Csv sums("n,power_sum");
  double s_max = 0.0;
  for (int n = 1; n <= power_sum_max; ++n) {
    const double s = tuple_power_sum(n);
    sums.row(n, s);
    s_max = std::max(s_max, s);
    r.check(s <= 15.0, "power sum " + fmt(s) + " > 15 at n=" + std::to_string(n));
  }
  r.metrics = {{"min_factorial_margin", w1}, {"min_weighted_margin", w2}, {"min_series_margin", w4}, {"max_power_sum", s_max}};
  r.tables = {{"tuple_bounds.csv", margins.str()}, {"tuple_power_sums.csv", sums.str()}};
  r.seconds = clock.seconds();
  return r;
}

SuiteResult binomial_sums_suite(int n_max, double tol) {
  Stopwatch clock;
  SuiteResult r;
  r.name = "binomial_sums";
  Csv csv("n,t,sum_from_1,sum_from_0");
  double m1 = 0.0, m0 = 0.0;
  for (int n = 1; n <= n_max; ++n)
    for (double t : kCertificationTimes) {
      auto s = binom_phi_sums(n, TimePoint(t));
      csv.row(n, t, s.sum_from_1, s.sum_from_0);
      m1 = std::max(m1, s.sum_from_1);
      m0 = std::max(m0, s.sum_from_0);
      const std::string at = " at n=" + std::to_string(n) + ", t=" + fmt(t);
      r.check(s.sum_from_1 <= 5.0 / 3.0 + tol, "sum from k=1 " + fmt(s.sum_from_1) + " > 5/3" + at);
      r.check(s.sum_from_0 <= 8.0 / 3.0 + tol, "sum from k=0 " + fmt(s.sum_from_0) + " > 8/3" + at);
    }
  const double exact = binom_phi_sums(3, TimePoint(0.0)).sum_from_1;
  r.check(std::abs(exact - 5.0 / 3.0) <= 1e-15, "n=3, t=0 sum " + fmt(exact) + " is not 5/3");
  r.metrics = {{"max_sum_from_1", m1}, {"max_sum_from_0", m0}, {"sum_n3_t0", exact}};
  r.tables = {{"binomial_sums.csv", csv.str()}};
  r.seconds = clock.seconds();
  return r;
}

SuiteResult time_integral_suite(int n_max, double quad_tol) {
  Stopwatch clock;
  SuiteResult r;
  r.name = "time_integral";
  Csv csv("n,t,lhs,rhs,margin,quad_error");
  double worst = 1e300, worst_rel = 1e300;
  for (int n = 1; n <= n_max; ++n)
    for (double t : kCertificationTimes) {
      auto m = time_integral_margin(n, TimePoint(t), quad_tol);
      csv.row(n, t, m.lhs, m.rhs, m.margin, m.quad_error);
      worst = std::min(worst, m.margin);
      worst_rel = std::min(worst_rel, m.margin / m.rhs);
      r.check(m.margin >= 0.0, "time integral margin " + fmt(m.margin) + " at n=" + std::to_string(n) + ", t=" + fmt(t));
    }
  const double a1 = time_integral_margin(1, TimePoint(0.0), quad_tol).rhs;
  const double a2 = time_integral_margin(2, TimePoint(0.0), quad_tol).rhs;
  r.check(std::abs(a1 - 50.0 / 9.0) <= 1e-14 * 50.0 / 9.0, "rhs(1) = " + fmt(a1) + ", expected 50/9");
  r.check(std::abs(a2 - 200.0 / 9.0) <= 1e-14 * 200.0 / 9.0, "rhs(2) = " + fmt(a2) + ", expected 200/9");
  r.metrics = {{"min_margin", worst}, {"min_relative_margin", worst_rel}, {"rhs1", a1}, {"rhs2", a2}};
  r.tables = {{"time_integral.csv", csv.str()}};
  r.seconds = clock.seconds();
  return r;
}

SuiteResult comparison_suite(int random_paths, std::uint64_t seed, double slack, double closed_form_tol) {
  Stopwatch clock;
  SuiteResult r;
  r.name = "comparison";
  const std::array<double, 4> times{0.1, 1.0, 10.0, 100.0};

  // h = 0: y1 = 1 + s, y2 = (t-s)/(1+t), forced (F = 1) s^2/2 - t^2 (s+1)/(2(t+1)), K = (1+min)(t-max)/(1+t).
  // Errors are relative once the exact value exceeds 1 (K and the forced solution grow like t, t^2).
  double cf = 0.0;
  const auto zero = CoefficientPath::zero();
  for (double t : times) {
    TimePoint tp(t);
    auto y1 = solve_y1(zero, tp, 1.0);
    auto y2 = solve_y2(zero, tp);
    auto y = solve_forced(zero, [](double) { return 1.0; }, tp);
    GreenKernel K(zero, tp);
    const double a = -t * t / (2 * (t + 1));
    for (int i = 0; i <= 50; ++i) {
      const double s = t * i / 50.0, tau = 0.37 * s;
      cf = std::max({cf, std::abs(y1.value(s) - (1 + s)) / (1 + s), std::abs(y1.derivative(s) - 1.0),
                     std::abs(y2.value(s) - (t - s) / (1 + t)), std::abs(y2.derivative(s) + 1.0 / (1 + t)),
                     std::abs(y.value(s) - (s * s / 2 + a * (s + 1))) / std::max(1.0, t * t),
                     std::abs(K(s, tau) - (1 + tau) * (t - s) / (1 + t)) / std::max(1.0, (1 + tau) * (t - s) / (1 + t))});
    }
  }
  r.check(cf <= closed_form_tol, "h=0 closed forms off by " + fmt(cf));

  std::vector<std::pair<std::string, CoefficientPath>> paths{{"zero", CoefficientPath::zero()},
                                                             {"extreme+", CoefficientPath::extreme(1)},
                                                             {"extreme-", CoefficientPath::extreme(-1)}};
  for (int k = 0; k < random_paths; ++k)
    paths.emplace_back("random" + std::to_string(k), CoefficientPath::random(seed * 1000003ULL + k + 1, times.back()));
  std::mt19937_64 rng(seed + 17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Csv csv(
      "path,t,y1_positive,y1_gamma_ratio,y1_over_gamma_monotone,y2_bounds,y2_tilde_monotone,product_bound,"
      "gamma_tilde_bound,wronskian,forced_gamma,forced_linear,kernel,boundary_residual,min");
  double worst = 1e300;
  for (auto& [name, h] : paths)
    for (double t : times) {
      const double a = u(rng), w = 3 * std::abs(u(rng)), p = u(rng);
      auto F = [=](double s) { return a + std::cos(w * s + p); };
      auto m = comparison_margins(h, F, TimePoint(t), 200);
      const double mn = m.min();
      csv.row(name, t, m.y1_positive, m.y1_gamma_ratio, m.y1_over_gamma_monotone, m.y2_bounds,
              m.y2_tilde_monotone, m.product_bound, m.gamma_tilde_bound, m.wronskian, m.forced_gamma,
              m.forced_linear, m.kernel, m.boundary_residual, mn);
      worst = std::min(worst, mn);
      r.check(mn >= -slack, "comparison margin " + fmt(mn) + " for h=" + name + ", t=" + fmt(t));
      r.check(m.y1_positive > 0.0, "y1 not positive for h=" + name + ", t=" + fmt(t));
    }
  r.metrics = {{"closed_form_error", cf}, {"min_margin", worst}, {"paths", static_cast<double>(paths.size())}};
  r.tables = {{"comparison.csv", csv.str()}};
  r.seconds = clock.seconds();
  return r;
}

SuiteResult screened_field_suite(int random_inputs, std::uint64_t seed, double tol, double margin_slack) {
  Stopwatch clock;
  SuiteResult r;
  r.name = "screened_field";
  constexpr double L = 20.0;
  constexpr std::size_t N = 1025;
  auto sup_err = [](const GridFunction& g, auto&& f) {
    double m = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) m = std::max(m, std::abs(g[i] - f(g.x(i))));
    return m;
  };
  auto rho = GridFunction::sample(L, N, [](double x) { return (3 - 4 * x * x) * std::exp(-x * x); });
  const double manufactured = sup_err(solve_potential(rho), [](double x) { return std::exp(-x * x); });
  r.check(manufactured <= tol, "manufactured potential error " + fmt(manufactured));
  auto kernel = GridFunction::sample(L, N, [](double x) { return 0.5 * std::exp(-std::abs(x)); });
  PotentialOptions loose;
  loose.boundary_tol = 1e-8;
  const double self = sup_err(solve_potential(kernel, loose),
                              [](double x) { return 0.25 * (1 + std::abs(x)) * std::exp(-std::abs(x)); });
  r.check(self <= tol, "self-convolution error " + fmt(self));

  Csv csv("input,n,m1,m2");
  std::mt19937_64 rng(seed + 11);
  std::uniform_real_distribution<double> amp(-1.0, 1.0), centre(-5.0, 5.0), width(0.5, 2.0);
  double worst = 1e300;
  for (int trial = 0; trial < random_inputs; ++trial) {
    const int terms = 1 + static_cast<int>(rng() % 4);
    std::vector<std::array<double, 3>> c;
    for (int k = 0; k < terms; ++k) c.push_back({amp(rng), centre(rng), width(rng)});
    auto g = GridFunction::sample(L, N, [&](double x) {
      double v = 0.0;
      for (auto [a, m, w] : c) v += a * std::exp(-(x - m) * (x - m) / (w * w));
      return v;
    });
    auto p = solve_potential(g);
    for (int n = 0; n <= 4; ++n) {
      auto m = max_principle_margins(g, p, n);
      csv.row(trial, n, m.m1, m.m2);
      worst = std::min({worst, m.m1, m.m2});
      r.check(m.m1 >= -margin_slack && m.m2 >= -margin_slack,
              "(phi1) margin " + fmt(std::min(m.m1, m.m2)) + " on input " + std::to_string(trial) + ", n=" +
                  std::to_string(n));
    }
  }
  r.metrics = {{"manufactured_error", manufactured}, {"self_convolution_error", self}, {"min_phi1_margin", worst}};
  r.tables = {{"screened_field.csv", csv.str()}};
  r.seconds = clock.seconds();
  return r;
}

SuiteResult characteristics_suite(int random_solves, std::uint64_t seed, int jobs, double closed_form_tol,
                                  double fd_tol) {
  Stopwatch clock;
  SuiteResult r;
  r.name = "characteristics";

  // Zero field: X = x0 + v0 (1+s), v0 = (x-x0)/(1+t), d_x X = (1+s)/(1+t), d_x0 X = (t-s)/(1+t).
  double cf = 0.0;
  const auto free = FieldHistory::zero({0.0, 50.0, 100.0}, 20.0, 65, 8);
  for (double t : {0.0, 0.1, 1.0, 10.0, 100.0}) {
    const double x = 1.7, x0 = -0.4, v0 = (x - x0) / (1.0 + t);
    auto tr = solve_bvp(x, x0, TimePoint(t), free, Coupling::kRepulsive);
    DerivativeLadder lad(tr, free, Coupling::kRepulsive, 4);
    cf = std::max({cf, std::abs(tr.v0 - v0), std::abs(w_pair(tr).w - v0), std::abs(dx0_w(tr) + 1.0 / (1.0 + t)),
                   std::abs(lad.dx_w0(1) - 1.0 / (1 + t))});
    for (double s : {0.0, 0.5 * t, t}) {
      cf = std::max({cf, std::abs(tr.X(s) - (x0 + v0 * (1 + s))), std::abs(lad.dx(1, s) - (1 + s) / (1 + t)),
                     std::abs(lad.dx_dx0(0, s) - (t - s) / (1 + t))});
      for (int n = 2; n <= 4; ++n) cf = std::max(cf, std::abs(lad.dx(n, s)));
    }
  }
  r.check(cf <= closed_form_tol, "zero-field closed forms off by " + fmt(cf));

  // Ladder against seven-point finite differences of the boundary problem.
  const auto strong = strong_field();
  const double T = 4.0, x = 0.3, x0 = -1.0;
  double fd_err = 0.0;
  for (auto q : {Coupling::kRepulsive, Coupling::kAttractive}) {
    auto tr = solve_bvp(x, x0, TimePoint(T), strong, q, tight_bvp());
    DerivativeLadder lad(tr, strong, q, 3, tight_bvp());
    auto X_at = [&](double xx, double y0, double s) {
      return solve_bvp(xx, y0, TimePoint(T), strong, q, tight_bvp()).X(s);
    };
    for (double s : {0.0, 1.3, 3.1}) {
      for (int n = 1; n <= 3; ++n)
        fd_err = std::max(fd_err, std::abs(lad.dx(n, s) - central_fd([&](double xx) { return X_at(xx, x0, s); }, x, 0.04, n)));
      fd_err = std::max(fd_err,
                        std::abs(lad.dx_dx0(0, s) - central_fd([&](double y0) { return X_at(x, y0, s); }, x0, 0.04, 1)));
    }
    auto w0_of_x = [&](double xx) { return solve_bvp(xx, x0, TimePoint(T), strong, q, tight_bvp()).v0; };
    for (int n = 1; n <= 3; ++n) fd_err = std::max(fd_err, std::abs(lad.dx_w0(n) - central_fd(w0_of_x, x, 0.04, n)));
  }
  r.check(fd_err <= fd_tol, "ladder vs finite differences off by " + fmt(fd_err));

  // Comparison bounds on the first variations, on random solves in a field within the damping certificate.
  const auto spreading = spreading_field();
  r.check(spreading.damping_certified(), "spreading field exceeds the damping bound");
  struct Sample {
    double x, x0, t;
    Coupling q;
  };
  std::vector<Sample> samples;
  std::mt19937_64 rng(seed + 20261019);
  std::uniform_real_distribution<double> pos(-5.0, 5.0), tim(0.0, 10.0);
  for (int k = 0; k < random_solves; ++k) {
    const double a = pos(rng), b = pos(rng), c = tim(rng);
    samples.push_back({a, b, c, (k % 2) ? Coupling::kRepulsive : Coupling::kAttractive});
  }
  std::vector<LadderMargins> margins(samples.size());
  std::vector<double> residuals(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t k) {
    const auto& s = samples[k];
    auto tr = solve_bvp(s.x, s.x0, TimePoint(s.t), spreading, s.q);
    residuals[k] = tr.residual;
    margins[k] = ladder_margins(DerivativeLadder(tr, spreading, s.q, 4), 32);
  }, 1);
  Csv csv("x,x0,t,q,residual,dx_positive,dx_upper,dx0_lower,dx0_upper,x1_min,x2_min,x3_min,x4_min,min");
  double worst = 1e300;
  auto vmin = [](const std::vector<double>& v) { return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end()); };
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& m = margins[k];
    const auto& s = samples[k];
    csv.row(s.x, s.x0, s.t, charge(s.q), residuals[k], m.dx_positive, m.dx_upper, m.dx0_lower, m.dx0_upper, vmin(m.x1),
            vmin(m.x2), vmin(m.x3), vmin(m.x4), m.min());
    worst = std::min(worst, m.min());
    r.check(m.min() >= 0.0, "ladder margin " + fmt(m.min()) + " at x=" + fmt(s.x) + ", x0=" + fmt(s.x0) + ", t=" + fmt(s.t));
    r.check(residuals[k] <= 1e-10, "shooting residual " + fmt(residuals[k]));
  }
  r.metrics = {{"closed_form_error", cf}, {"fd_error", fd_err}, {"min_ladder_margin", worst}};
  r.tables = {{"characteristics.csv", csv.str()}};
  r.seconds = clock.seconds();
  return r;
}

SuiteResult free_stream_suite(const InitialData& data, int n_max, const std::vector<double>& times, double quad_tol) {
  Stopwatch clock;
  SuiteResult r;
  r.name = "free_stream";
  const DataCertificate cert = certify_initial_data(data, n_max);
  Csv csv("t,n,sup,envelope,ratio,quadrature_error");
  double worst_ratio = 0.0, worst_err = 0.0;
  for (double t : times) {
    const TimePoint tp(t);
    const double L = required_half_width(data, std::max(t, 1.0));
    for (int n = 0; n <= n_max; ++n) {
      const GridFunction g = free_streaming_density(data, tp, n, L, 801);
      double err = 0.0;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        err = std::max(err, std::abs(g[i] - free_streaming_exact(data, tp, n, g.x(i))));
        if (std::abs(g[i]) > std::abs(g[arg])) arg = i;
      }
      // Refine the sup of the closed form around the grid maximum.
      double sup = g.sup_norm();
      const double lo = g.x(arg == 0 ? 0 : arg - 1), hi = g.x(std::min(g.size() - 1, arg + 1));
      for (int k = 0; k <= 400; ++k) sup = std::max(sup, std::abs(free_streaming_exact(data, tp, n, lo + (hi - lo) * k / 400.0)));
      const double env = free_streaming_envelope(cert, n, tp);
      const double env_err = cert.errors.at(n) / std::pow(t + 1.0, n + 1);
      const double rel = sup > 0.0 ? err / sup : 0.0;
      const double ratio = env > 0.0 ? sup / env : 0.0;
      csv.row(t, n, sup, env, ratio, rel);
      worst_ratio = std::max(worst_ratio, ratio);
      worst_err = std::max(worst_err, rel);
      const std::string at = " at n=" + std::to_string(n) + ", t=" + fmt(t);
      r.check(rel <= quad_tol, "quadrature vs closed form " + fmt(rel) + at);
      r.check(sup <= env + env_err + quad_tol * env, "sup " + fmt(sup) + " above envelope " + fmt(env) + at);
    }
  }
  r.metrics = {{"max_envelope_ratio", worst_ratio}, {"max_quadrature_error", worst_err}};
  r.tables = {{"free_stream.csv", csv.str()}};
  r.seconds = clock.seconds();
  return r;
}

SuiteResult simulate_suite(const RunResult& result) {
  SuiteResult r;
  r.name = "simulate";
  const RunReport& rep = result.report;
  r.seconds = rep.seconds;
  r.check(rep.data_certified, "initial data fail the derivative certificate at order " + std::to_string(rep.certificate.failing_order));
  r.check(rep.converged, "Picard did not converge in " + std::to_string(rep.config.max_iterations) + " iterates");
  r.check(rep.contraction_pass, "difference ratio >= 0.5 after iterate 2");
  r.check(rep.normalization_pass, "an iterate exceeds c_n(t) <= 1/3000");
  r.check(rep.envelope_pass, "final density exceeds the decay envelope");
  r.check(rep.bounds_pass, "negative transported-integral margin");
  double max_ratio = 0.0, max_c = 0.0, max_env = 0.0;
  for (std::size_t i = 1; i < rep.ratios.size(); ++i) max_ratio = std::max(max_ratio, rep.ratios[i]);
  for (const auto& c : rep.iterate_constants)
    for (double v : c) max_c = std::max(max_c, v);
  for (const auto& e : rep.envelope_ratios)
    for (double v : e) max_env = std::max(max_env, v);
  r.metrics = {{"amplitude", rep.amplitude},
               {"iterates", static_cast<double>(rep.differences.size())},
               {"final_difference", rep.differences.empty() ? 0.0 : rep.differences.back()},
               {"max_ratio_after_2", max_ratio},
               {"max_c_n", max_c},
               {"max_envelope_ratio", max_env}};

  Csv it("iterate,difference,ratio,max_c_n,input_const,output_const,iterate_bound");
  for (std::size_t k = 0; k < rep.differences.size(); ++k) {
    double c = 0.0;
    for (double v : rep.iterate_constants[k]) c = std::max(c, v);
    it.row(k + 1, rep.differences[k], k == 0 ? 0.0 : rep.ratios[k - 1], c, rep.iterate_bounds[k].input_const,
           rep.iterate_bounds[k].output_const, rep.iterate_bounds[k].pass ? 1 : 0);
  }
  std::ostringstream hist, decay;
  result.final.write_csv(hist);
  write_decay_csv(decay, result.final.slices);
  r.tables = {{"rho_history.csv", hist.str()}, {"decay.csv", decay.str()}, {"iterations.csv", it.str()}};
  return r;
}

SuiteResult oracle_suite(const OracleComparison& cmp, double sup_tol, double drift_tol) {
  SuiteResult r;
  r.name = "oracle";
  r.check(cmp.max_sup_error <= sup_tol, "sup |rho_oracle - rho_picard| = " + fmt(cmp.max_sup_error));
  r.check(cmp.mass_drift <= drift_tol, "oracle mass drift " + fmt(cmp.mass_drift));
  r.check(cmp.undershoot <= 1e-10, "oracle undershoot " + fmt(cmp.undershoot));
  r.check(cmp.envelope_pass, "oracle density exceeds the decay envelope");
  r.metrics = {{"max_sup_error", cmp.max_sup_error},
               {"max_relative_error", cmp.max_relative_error},
               {"mass_drift", cmp.mass_drift},
               {"undershoot", cmp.undershoot},
               {"steps", static_cast<double>(cmp.run.steps)}};
  Csv csv("t,sup_error,relative_error,d1_error");
  for (std::size_t k = 0; k < cmp.times.size(); ++k)
    csv.row(cmp.times[k], cmp.sup_error[k], cmp.relative_error[k], cmp.d1_error[k]);
  std::ostringstream hist, decay;
  cmp.run.history.write_csv(hist);
  write_decay_csv(decay, cmp.run.history.slices);
  r.tables = {{"oracle_compare.csv", csv.str()}, {"oracle_rho_history.csv", hist.str()}, {"oracle_decay.csv", decay.str()}};
  return r;
}

SuiteResult decay_suite(const DensityHistory& history, int n_max) {
  Stopwatch clock;
  SuiteResult r;
  r.name = "decay";
  Csv env("t,n,c_n,envelope_ratio");
  double max_c = 0.0, max_env = 0.0;
  for (const auto& s : history.slices)
    for (int n = 0; n <= n_max; ++n) {
      const double c = s.constant(n), e = s.envelope_ratio(n);
      env.row(s.time(), n, c, e);
      max_c = std::max(max_c, c);
      max_env = std::max(max_env, e);
      const std::string at = " at n=" + std::to_string(n) + ", t=" + fmt(s.time());
      r.check(c <= 1.0 / 3000.0, "c_n " + fmt(c) + " > 1/3000" + at);
      r.check(e <= 1.0, "envelope ratio " + fmt(e) + at);
    }
  std::ostringstream decay;
  write_decay_csv(decay, history.slices);
  r.metrics = {{"max_c_n", max_c}, {"max_envelope_ratio", max_env}};
  r.tables = {{"decay.csv", decay.str()}, {"envelope.csv", env.str()}};
  r.seconds = clock.seconds();
  return r;
}

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream o(p, std::ios::binary);
  o << text;
  if (!o) throw DomainError("cannot write " + p.string());
}

DensityHistory load_history(const fs::path& p, int n_max) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DomainError("no stored Picard result at " + p.string() + "; run simulate first");
  return DensityHistory::load(in, n_max);
}

}  // namespace

int dispatch(const CommandSpec& spec, std::ostream& log) {
  RunConfig cfg = spec.config.empty() ? RunConfig{} : RunConfig::load(spec.config);
  if (spec.jobs) cfg.jobs = *spec.jobs;
  if (spec.seed) cfg.seed = *spec.seed;
  cfg.validate();
  const fs::path out(spec.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw DomainError("output directory " + spec.out + " is not writable");

  std::vector<SuiteResult> suites;
  std::vector<std::pair<std::string, std::string>> extra;  // non-CSV artefacts
  if (spec.command == "verify-lemmas") {
    suites.push_back(tuple_bounds_suite());
    suites.push_back(binomial_sums_suite());
    suites.push_back(time_integral_suite());
    suites.push_back(comparison_suite(100, cfg.seed));
    suites.push_back(screened_field_suite(100, cfg.seed));
    suites.push_back(characteristics_suite(100, cfg.seed, cfg.jobs));
  } else if (spec.command == "free-stream") {
    suites.push_back(free_stream_suite(make_initial_data(cfg), cfg.certify_order));
  } else if (spec.command == "simulate") {
    RunResult res = run(cfg);
    suites.push_back(simulate_suite(res));
    std::ostringstream bin;
    res.final.save(bin);
    extra = {{"history.bin", bin.str()}, {"report.json", res.report.to_json() + "\n"}};
  } else if (spec.command == "oracle-compare") {
    const DensityHistory hist = load_history(out / "history.bin", cfg.n_max);
    const Stopwatch clock;
    suites.push_back(oracle_suite(run_and_compare(cfg, make_initial_data(cfg), hist)));
    suites.back().seconds = clock.seconds();
  } else if (spec.command == "decay-report") {
    suites.push_back(decay_suite(load_history(out / "history.bin", cfg.n_max), cfg.n_max));
  } else {
    throw DomainError("unknown subcommand '" + spec.command + "'");
  }

  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json failures = nlohmann::json::array();
  bool ok = true;
  for (const auto& s : suites) {
    for (const auto& [file, text] : s.tables) write_text(out / file, text);
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [k, v] : s.metrics) m[k] = v;
    summary[s.name] = {{"passed", s.passed}, {"seconds", s.seconds}, {"metrics", m}, {"failed_checks", s.failures.size()}};
    for (const auto& f : s.failures) failures.push_back({{"suite", s.name}, {"check", f}});
    ok = ok && s.passed;
    if (spec.verbosity >= 1) log << s.summary() << '\n';
    const std::size_t shown = spec.verbosity >= 2 ? s.failures.size() : std::min<std::size_t>(5, s.failures.size());
    for (std::size_t i = 0; i < shown; ++i) log << "  " << s.failures[i] << '\n';
  }
  for (const auto& [file, text] : extra) write_text(out / file, text);
  summary["command"] = spec.command;
  summary["passed"] = ok;
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_text(out / "failures.json", nlohmann::json{{"failures", failures}}.dump(2) + "\n");
  return ok ? kExitOk : kExitMarginFailure;
}

}  // namespace vy
