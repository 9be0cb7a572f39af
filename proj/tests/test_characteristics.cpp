#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vy/characteristics.hpp"
#include "vy/error.hpp"
#include "vy/grid.hpp"

using namespace vy;

namespace {

std::vector<double> geometric_times(double horizon, double first, double ratio) {
  std::vector<double> t{0.0};
  for (double s = first; s < horizon; s *= ratio) t.push_back(s);
  t.push_back(horizon);
  return t;
}

// Strong, asymmetric field that does not decay: exercises the ladder algebra.
FieldHistory strong_history() {
  auto times = geometric_times(4.0, 0.05, 1.3);
  std::vector<GridFunction> rho;
  for (double s : times)
    rho.push_back(GridFunction::sample(20.0, 1601, [s](double x) {
      return 0.2 / std::pow(1.0 + s, 1.5) *
             (std::exp(-(x - 0.5) * (x - 0.5)) + 0.5 * std::exp(-2.0 * (x + 1.0) * (x + 1.0)));
    }));
  return FieldHistory::from_densities(times, rho, 8);
}

// Spreading density A/(1+s) exp(-x^2/(1+s)^2): curvature decays like (1+s)^-3.
FieldHistory certified_history(double amplitude = 2e-3) {
  auto times = geometric_times(10.0, 0.05, 1.2);
  std::vector<GridFunction> rho;
  for (double s : times)
    rho.push_back(GridFunction::sample(60.0, 1201, [s, amplitude](double x) {
      double w = 1.0 + s;
      return amplitude / w * std::exp(-x * x / (w * w));
    }));
  return FieldHistory::from_densities(times, rho, 8);
}

BvpOptions tight() {
  BvpOptions o;
  o.tol = 1e-13;
  o.ode.abs_tol = 1e-13;
  o.ode.rel_tol = 1e-13;
  return o;
}

double fd(const std::function<double(double)>& f, double z, double step, int order) {
  std::vector<double> nodes;
  for (int k = -3; k <= 3; ++k) nodes.push_back(z + k * step);
  auto w = fd_weights(z, nodes, order);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) acc += w[i] * f(nodes[i]);
  return acc;
}

}  // namespace

TEST_CASE("zero field: free streaming closed forms") {
  auto hist = FieldHistory::zero({0.0, 50.0, 100.0}, 20.0, 65, 8);
  for (double t : {0.0, 0.1, 1.0, 10.0, 100.0}) {
    double x = 1.7, x0 = -0.4;
    auto tr = solve_bvp(x, x0, TimePoint(t), hist, Coupling::kRepulsive);
    double v0 = (x - x0) / (1.0 + t);
    CHECK(tr.v0 == doctest::Approx(v0).epsilon(1e-12));
    CHECK(tr.residual <= 1e-10);
    for (double s : {0.0, 0.3 * t, t}) CHECK(std::abs(tr.X(s) - (x0 + v0 * (1 + s))) <= 1e-10);
    auto [w, w0] = w_pair(tr);
    CHECK(std::abs(w - v0) <= 1e-10);
    CHECK(std::abs(w0 - v0) <= 1e-10);
    CHECK(std::abs(dx0_w(tr) + 1.0 / (1.0 + t)) <= 1e-10);

    DerivativeLadder lad(tr, hist, Coupling::kAttractive, 4);
    for (double s : {0.0, 0.5 * t, t}) {
      CHECK(std::abs(lad.dx(1, s) - (1 + s) / (1 + t)) <= 1e-10);
      CHECK(std::abs(lad.dx_dx0(0, s) - (t - s) / (1 + t)) <= 1e-10);
      for (int n = 2; n <= 4; ++n) CHECK(lad.dx(n, s) == 0.0);
      for (int n = 1; n <= 4; ++n) CHECK(lad.dx_dx0(n, s) == 0.0);
    }
    CHECK(std::abs(lad.dx_dx0_w(0) + 1.0 / (1 + t)) <= 1e-10);
    CHECK(std::abs(lad.dx_w0(1) - 1.0 / (1 + t)) <= 1e-10);
    CHECK(std::abs(lad.dx_dx0_w(0)) <= 1.0 / gamma_value(t));
    CHECK(ladder_margins(lad).min() >= 0.0);

    if (t > 0.0) {
      auto ex = variational_first(tr, hist, Coupling::kRepulsive, Variation::kEndpoint);
      auto ef = variational_first(tr, hist, Coupling::kRepulsive, Variation::kFoot);
      for (double s : {0.0, 0.25 * t, t}) {
        CHECK(std::abs(ex.value(s) - (1 + s) / (1 + t)) <= 1e-10);
        CHECK(std::abs(ef.value(s) - (t - s) / (1 + t)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("coupling validation and domain errors") {
  CHECK(coupling_from_int(1) == Coupling::kRepulsive);
  CHECK(coupling_from_int(-1) == Coupling::kAttractive);
  CHECK_THROWS_AS(coupling_from_int(0), DomainError);
  auto hist = FieldHistory::zero({0.0, 1.0, 2.0}, 5.0, 65, 4);
  CHECK_THROWS_AS(solve_bvp(0.0, 0.0, TimePoint(3.0), hist, Coupling::kRepulsive), DomainError);
  CHECK_THROWS_AS(DerivativeLadder(solve_bvp(0.0, 0.0, TimePoint(1.0), hist, Coupling::kRepulsive),
                                   hist, Coupling::kRepulsive, 3),
                  DomainError);

  auto strong = strong_history();
  // The characteristic from x0 = -60 starts outside the potential grid.
  CHECK_THROWS_AS(solve_bvp(0.0, -60.0, TimePoint(1.0), strong, Coupling::kRepulsive), TruncationError);
  BvpOptions one;
  one.max_iter = 1;
  CHECK_THROWS_AS(solve_bvp(0.5, -1.0, TimePoint(4.0), strong, Coupling::kAttractive, one), ConvergenceError);
}

TEST_CASE("strong field: converged residual, idempotence and mirror symmetry") {
  auto hist = strong_history();
  for (auto q : {Coupling::kRepulsive, Coupling::kAttractive}) {
    auto tr = solve_bvp(0.3, -1.0, TimePoint(4.0), hist, q);
    CHECK(tr.residual <= 1e-10);
    CHECK(tr.iterations >= 2);
    CHECK(std::abs(tr.X(0.0) - tr.V(0.0) - (-1.0)) <= 1e-14);
    auto again = solve_bvp(tr.X(4.0), -1.0, TimePoint(4.0), hist, q);
    CHECK(std::abs(w_pair(again).w - w_pair(tr).w) <= 1e-9);
    std::ostringstream os;
    tr.write_csv(os);
    CHECK(os.str().rfind("s,X,V\n", 0) == 0);
  }

  // Even density: mirrored endpoints give mirrored characteristics.
  auto times = geometric_times(3.0, 0.1, 1.4);
  std::vector<GridFunction> rho;
  for (double s : times)
    rho.push_back(GridFunction::sample(20.0, 801, [s](double x) { return 0.3 * std::exp(-x * x * (1 + s)); }));
  auto even = FieldHistory::from_densities(times, rho, 4);
  for (auto q : {Coupling::kRepulsive, Coupling::kAttractive}) {
    auto a = solve_bvp(0.8, -1.3, TimePoint(3.0), even, q, tight());
    auto b = solve_bvp(-0.8, 1.3, TimePoint(3.0), even, q, tight());
    CHECK(std::abs(a.v0 + b.v0) <= 1e-11);
    for (double s : {0.0, 1.0, 2.5}) CHECK(std::abs(a.X(s) + b.X(s)) <= 1e-10);
  }
}

TEST_CASE("ladder agrees with finite differences of the boundary problem") {
  auto hist = strong_history();
  const double T = 4.0, x = 0.3, x0 = -1.0;
  for (auto q : {Coupling::kRepulsive, Coupling::kAttractive}) {
    auto tr = solve_bvp(x, x0, TimePoint(T), hist, q, tight());
    DerivativeLadder lad(tr, hist, q, 3, tight());
    for (double s : {0.0, 1.3, 3.1}) {
      auto X_of_x = [&](double xx) { return solve_bvp(xx, x0, TimePoint(T), hist, q, tight()).X(s); };
      for (int n = 1; n <= 3; ++n) {
        double ref = fd(X_of_x, x, 0.04, n);
        CHECK(std::abs(lad.dx(n, s) - ref) <= 1e-5);
      }
      auto X_of_x0 = [&](double y0) { return solve_bvp(x, y0, TimePoint(T), hist, q, tight()).X(s); };
      CHECK(std::abs(lad.dx_dx0(0, s) - fd(X_of_x0, x0, 0.04, 1)) <= 1e-5);
      for (int n = 1; n <= 2; ++n) {
        auto mixed = [&](double xx) {
          return fd([&](double y0) { return solve_bvp(xx, y0, TimePoint(T), hist, q, tight()).X(s); },
                    x0, 0.04, 1);
        };
        CHECK(std::abs(lad.dx_dx0(n, s) - fd(mixed, x, 0.04, n)) <= 1e-5);
      }
    }
    // Velocity-side scalars.
    auto w0_of_x = [&](double xx) { return solve_bvp(xx, x0, TimePoint(T), hist, q, tight()).v0; };
    for (int n = 1; n <= 3; ++n) CHECK(std::abs(lad.dx_w0(n) - fd(w0_of_x, x, 0.04, n)) <= 1e-5);
    auto w_of_x0 = [&](double y0) { return w_pair(solve_bvp(x, y0, TimePoint(T), hist, q, tight())).w; };
    CHECK(std::abs(lad.dx_dx0_w(0) - fd(w_of_x0, x0, 0.04, 1)) <= 1e-5);
    CHECK(std::abs(lad.dx_dx0_w(0) - dx0_w(tr)) <= 1e-9);
    auto w_of_x = [&](double xx) { return w_pair(solve_bvp(xx, x0, TimePoint(T), hist, q, tight())).w; };
    CHECK(std::abs(lad.dx_w(2) - fd(w_of_x, x, 0.04, 2)) <= 1e-5);
    // The ladder's nonlinear terms are not negligible here.
    CHECK(std::abs(lad.dx(2, 0.0)) > 1e-3);
  }
}

TEST_CASE("strong field is rejected by the first variation") {
  auto hist = strong_history();
  auto tr = solve_bvp(0.3, -1.0, TimePoint(4.0), hist, Coupling::kRepulsive);
  CHECK_THROWS_AS(variational_first(tr, hist, Coupling::kRepulsive, Variation::kEndpoint), DomainError);
}

TEST_CASE("certified field: first variations and comparison margins") {
  auto hist = certified_history();
  REQUIRE(hist.damping_certified());
  std::mt19937_64 rng(20261019);
  std::uniform_real_distribution<double> pos(-5.0, 5.0), tim(0.0, 10.0);
  double worst = 1.0;
  for (int k = 0; k < 100; ++k) {
    double x = pos(rng), x0 = pos(rng), t = tim(rng);
    auto q = (k % 2) ? Coupling::kRepulsive : Coupling::kAttractive;
    auto tr = solve_bvp(x, x0, TimePoint(t), hist, q);
    REQUIRE(tr.residual <= 1e-10);
    DerivativeLadder lad(tr, hist, q, 4);
    auto m = ladder_margins(lad, 32);
    worst = std::min(worst, m.min());
    CHECK(m.dx_positive > 0.0);
    if (k < 10) {
      auto ex = variational_first(tr, hist, q, Variation::kEndpoint);
      auto ef = variational_first(tr, hist, q, Variation::kFoot);
      for (double s : {0.0, 0.4 * t, 0.9 * t}) {
        CHECK(std::abs(ex.value(s) - lad.dx(1, s)) <= 1e-8);
        CHECK(std::abs(ef.value(s) - lad.dx_dx0(0, s)) <= 1e-8);
      }
      auto X_of_x = [&](double xx) { return solve_bvp(xx, x0, TimePoint(t), hist, q, tight()).X(0.5 * t); };
      CHECK(std::abs(ex.value(0.5 * t) - fd(X_of_x, x, 0.02, 1)) <= 1e-6);
      auto X_of_x0 = [&](double y0) { return solve_bvp(x, y0, TimePoint(t), hist, q, tight()).X(0.5 * t); };
      CHECK(std::abs(ef.value(0.5 * t) - fd(X_of_x0, x0, 0.02, 1)) <= 1e-6);
      // |d_x w0| <= 1/gamma(t) read off neighbouring solves.
      auto w0_of_x = [&](double xx) { return solve_bvp(xx, x0, TimePoint(t), hist, q, tight()).v0; };
      CHECK(std::abs(fd(w0_of_x, x, 0.02, 1)) <= 1.0 / gamma_value(t) + 1e-9);
    }
  }
  MESSAGE("worst normalised ladder margin " << worst);
  CHECK(worst >= 0.0);
}
