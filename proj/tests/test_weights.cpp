#include <doctest.h>

#include <cmath>
#include <random>

#include "vy/error.hpp"
#include "vy/weights.hpp"

using namespace vy;

TEST_CASE("gamma values and derivatives") {
  auto g0 = gamma_eval(TimePoint(0.0));
  CHECK(g0.value == 1.0);
  CHECK(g0.first == 1.0);
  CHECK(g0.second == doctest::Approx(-0.01).epsilon(1e-15));

  auto g1 = gamma_eval(TimePoint(1.0));
  CHECK(g1.value == doctest::Approx(1.99693147180559944).epsilon(1e-15));
  CHECK(g1.first == doctest::Approx(0.995).epsilon(1e-15));
  CHECK(g1.second == doctest::Approx(-0.0025).epsilon(1e-15));

  for (double t : {0.0, 1e-8, 0.3, 1.0, 7.0, 50.0, 1e4, 1e8}) {
    double r = gamma_eval(TimePoint(t)).value / (t + 1.0);
    CHECK(r > 0.99);
    CHECK(r <= 1.0);
  }
  // Derivatives against centred differences.
  for (double t : {0.5, 3.0, 40.0}) {
    double h = 1e-4;
    double fd1 = (gamma_value(t + h) - gamma_value(t - h)) / (2 * h);
    double fd2 = (gamma_eval(TimePoint(t + h)).first - gamma_eval(TimePoint(t - h)).first) / (2 * h);
    CHECK(gamma_eval(TimePoint(t)).first == doctest::Approx(fd1).epsilon(1e-8));
    CHECK(gamma_eval(TimePoint(t)).second == doctest::Approx(fd2).epsilon(1e-6));
  }
  CHECK_THROWS_AS(TimePoint(-1e-300), DomainError);
  CHECK_THROWS_AS(TimePoint(NAN), DomainError);
}

TEST_CASE("phi weights") {
  CHECK(phi_eval(0, TimePoint(9.0)) == 1.0);
  CHECK(phi_eval(1, TimePoint(9.0)) == 1.0);
  CHECK(phi_eval(2, TimePoint(123.0)) == 1.0);
  CHECK(phi_eval(7, TimePoint(0.0)) == 1.0);
  CHECK(phi_eval(3, TimePoint(4.0)) == doctest::Approx(std::exp(0.4)).epsilon(1e-15));
  CHECK(phi_eval(4, TimePoint(4.0)) == doctest::Approx(std::exp(2.0 / 3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(phi_eval(-1, TimePoint(1.0)), DomainError);

  for (double t : kCertificationTimes) {
    for (int n = 0; n <= 50; ++n) {
      double p = phi_eval(n, TimePoint(t));
      CHECK(p >= 1.0);
      CHECK(p <= std::exp(static_cast<double>(n)));
      CHECK(phi_eval(n + 1, TimePoint(t)) >= p);
      if (n >= 3) {
        double lhs = phi_eval(n - 1, TimePoint(t)) * phi_eval(n + 1, TimePoint(t));
        CHECK(lhs <= p * p * (1 + 1e-15));
      }
    }
  }
  double prev_t = 0.0;
  for (double t : kCertificationTimes) {
    for (int n = 0; n <= 50; ++n) CHECK(phi_eval(n, TimePoint(t)) >= phi_eval(n, TimePoint(prev_t)));
    prev_t = t;
  }
}

TEST_CASE("log inequality") {
  CHECK(log_inequality_margin(1.0, 1.0) == 0.0);
  CHECK(log_inequality_margin(2.0, 1.0) == doctest::Approx(0.02648051389327864).epsilon(1e-13));
  CHECK(log_inequality_margin(std::exp(1.0), 1.0) == doctest::Approx(0.07576568547998048).epsilon(1e-13));
  CHECK_THROWS_AS(log_inequality_margin(1.0, 2.0), DomainError);
  CHECK_THROWS_AS(log_inequality_margin(1.0, 0.0), DomainError);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-6.0, 6.0);
  for (int i = 0; i < 10000; ++i) {
    double b = std::exp(u(rng));
    double a = b * std::exp(std::abs(u(rng)));
    CHECK(log_inequality_margin(a, b) >= -1e-12);
  }
}

namespace {

// Independent oracle: substitution s = u^2 removes the sqrt singularity, then a
// fine composite Simpson rule on each side of the crossover.
double t1_lhs_oracle(int n, double t) {
  double gt = gamma_value(t);
  double nn = static_cast<double>(n) * (n + 1);
  auto f = [&](double u) {
    double s = u * u;
    double g = gamma_value(s);
    double a = 2.0 * phi_value(n - 1, s);
    double b = phi_value(n + 1, s) * nn * nn / (g * g);
    return std::min(a, b) * (t - s) / gt * 2.0 * u;
  };
  // crossover in u by bisection on a - b
  auto d = [&](double u) {
    double s = u * u;
    double g = gamma_value(s);
    return 2.0 * phi_value(n - 1, s) - phi_value(n + 1, s) * nn * nn / (g * g);
  };
  double hi = std::sqrt(t);
  std::vector<double> cuts{0.0};
  if (d(0.0) * d(hi) < 0) {
    double lo = 0.0, up = hi;
    for (int i = 0; i < 200; ++i) {
      double m = 0.5 * (lo + up);
      if ((d(m) < 0) == (d(lo) < 0)) lo = m; else up = m;
    }
    cuts.push_back(0.5 * (lo + up));
  }
  cuts.push_back(hi);
  double total = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    int m = 200000;
    double a = cuts[c], b = cuts[c + 1], h = (b - a) / m;
    double acc = f(a) + f(b);
    for (int i = 1; i < m; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    total += acc * h / 3.0;
  }
  return total;
}

}  // namespace

TEST_CASE("t1 integral bound") {
  CHECK(time_integral_margin(1, TimePoint(3.0)).rhs == doctest::Approx(50.0 / 9.0).epsilon(1e-15));
  CHECK(time_integral_margin(2, TimePoint(100.0)).rhs == doctest::Approx(200.0 / 9.0).epsilon(1e-15));
  CHECK(time_integral_margin(5, TimePoint(10.0)).margin > 0.0);

  for (auto [n, t] : {std::pair{1, 4.0}, {3, 25.0}, {8, 1.0}, {12, 100.0}}) {
    auto r = time_integral_margin(n, TimePoint(t));
    CHECK(r.lhs == doctest::Approx(t1_lhs_oracle(n, t)).epsilon(1e-7));
  }
  CHECK(time_integral_margin(4, TimePoint(0.0)).lhs == 0.0);
  CHECK_THROWS_AS(time_integral_margin(0, TimePoint(1.0)), DomainError);
}
