#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <iterator>
#include <random>
#include <set>

#include "vy/combinatorics.hpp"
#include "vy/error.hpp"

using namespace vy;

namespace {

// Partition numbers via Euler's pentagonal recurrence.
std::vector<long long> partition_numbers(int n_max) {
  std::vector<long long> p(n_max + 1, 0);
  p[0] = 1;
  for (int n = 1; n <= n_max; ++n) {
    for (int k = 1;; ++k) {
      int g1 = k * (3 * k - 1) / 2, g2 = k * (3 * k + 1) / 2;
      if (g1 > n) break;
      long long sign = (k % 2) ? 1 : -1;
      p[n] += sign * p[n - g1];
      if (g2 <= n) p[n] += sign * p[n - g2];
    }
  }
  return p;
}

}  // namespace

TEST_CASE("partition enumeration") {
  auto p = partition_numbers(20);
  CHECK(p[16] == 231);
  for (int n = 1; n <= 16; ++n) {
    auto tuples = enumerate_partitions(n);
    CHECK(static_cast<long long>(tuples.size()) == p[n]);
    std::set<std::vector<int>> seen;
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      const auto& t = tuples[i];
      int sum = 0, k = 0;
      for (int j = 1; j <= n; ++j) {
        sum += j * t.m[j - 1];
        k += t.m[j - 1];
      }
      CHECK(sum == n);
      CHECK(t.k == k);
      CHECK(t.s == 2 * k - t.m[0]);
      CHECK(t.k >= 1);
      CHECK(t.k <= n);
      if (n >= 2) CHECK(t.s >= 2);
      CHECK(seen.insert(t.m).second);
      if (i > 0) CHECK(tuples[i - 1].m < t.m);
    }
    auto filtered = enumerate_partitions(n, 16, true);
    CHECK(filtered.size() == tuples.size() - 1);
    for (const auto& t : filtered) CHECK(t.m[n - 1] == 0);
  }

  auto one = enumerate_partitions(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].m == std::vector<int>{1});

  auto two = enumerate_partitions(2);
  REQUIRE(two.size() == 2);
  // (m1, m2, k, s): (0,1,1,2) sorts before (2,0,2,2)
  CHECK(two[0].m == std::vector<int>{0, 1});
  CHECK(two[0].k == 1);
  CHECK(two[0].s == 2);
  CHECK(two[1].m == std::vector<int>{2, 0});
  CHECK(two[1].k == 2);
  CHECK(two[1].s == 2);

  CHECK(enumerate_partitions(4).size() == 5);
  CHECK_THROWS_AS(enumerate_partitions(17), DomainError);
  CHECK(enumerate_partitions(20, 20).size() == static_cast<std::size_t>(p[20]));
  CHECK_THROWS_AS(enumerate_partitions(0), DomainError);
}

TEST_CASE("multinomial weights") {
  PartitionTuple a{2, {2, 0}, 2, 2};
  PartitionTuple b{2, {0, 1}, 1, 2};
  CHECK(multinomial_weight(a) == 1);
  CHECK(multinomial_weight(b) == 2);
  PartitionTuple c{6, {0, 3, 0, 0, 0, 0}, 3, 6};
  CHECK(multinomial_weight(c) == 120);
  // Sum of n!/(prod m_j! (j!)^{m_j}) over partitions is the Bell number.
  double bell = 0.0;
  for (const auto& t : enumerate_partitions(10)) {
    double w = static_cast<double>(multinomial_weight(t));
    for (int j = 1; j <= 10; ++j) w /= std::pow(std::tgamma(j + 1.0), t.m[j - 1]);
    bell += w;
  }
  CHECK(bell == doctest::Approx(115975.0).epsilon(1e-12));
}

TEST_CASE("Faa di Bruno application") {
  // g(x) = x: only m_1 = n survives and (F o g)^(n) = F^(n).
  std::vector<double> outer{0.3, -1.2, 2.5, 0.7, -4.0, 9.0};
  std::vector<double> inner{0.0, 1.0, 0.0, 0.0, 0.0, 0.0};
  for (int n = 1; n <= 5; ++n) CHECK(faa_di_bruno_apply(outer, inner, n) == doctest::Approx(outer[n]));

  // F = exp, g = sin at x0: compare with derivatives of exp(sin x) by recurrence.
  double x0 = 0.37;
  int N = 6;
  std::vector<double> fo(N + 1, std::exp(std::sin(x0)));
  std::vector<double> gi(N + 1);
  for (int j = 0; j <= N; ++j) gi[j] = std::sin(x0 + j * M_PI / 2);
  // y = exp(sin x): y' = y cos x, so y^(n) = sum C(n-1,k) y^(k) (cos)^(n-1-k)
  std::vector<double> y(N + 1);
  y[0] = fo[0];
  for (int n = 1; n <= N; ++n) {
    double acc = 0.0, binom = 1.0;
    for (int k = 0; k <= n - 1; ++k) {
      acc += binom * y[k] * std::cos(x0 + (n - 1 - k) * M_PI / 2);
      binom = binom * (n - 1 - k) / (k + 1);
    }
    y[n] = acc;
  }
  for (int n = 1; n <= N; ++n) {
    CHECK(faa_di_bruno_apply(fo, gi, n) == doctest::Approx(y[n]).epsilon(1e-12));
    double top = fo[1] * gi[n];
    CHECK(faa_di_bruno_apply(fo, gi, n, true) == doctest::Approx(y[n] - top).epsilon(1e-12));
  }
}

TEST_CASE("coefficient estimates, small orders") {
  auto r1 = tuple_bound_margins(1, TimePoint(0.0));
  REQUIRE(r1.factorial_margins.size() == 1);
  CHECK(r1.factorial_margins[0].lhs == 1.0);
  CHECK(r1.factorial_margins[0].rhs == 1.0);
  CHECK(r1.weighted_margins[0].lhs == 1.0);
  CHECK(r1.weighted_margins[0].rhs == 1.0);
  CHECK(r1.power_sum == 0.0);
  CHECK(r1.series_lhs == 1.0);
  CHECK(r1.series_rhs == doctest::Approx(std::exp(0.15)));

  auto r2 = tuple_bound_margins(2, TimePoint(0.0));
  CHECK(r2.series_lhs == doctest::Approx(2.01).epsilon(1e-15));
  CHECK(r2.series_rhs == doctest::Approx(2.0 * std::exp(0.15)).epsilon(1e-15));

  auto r12 = tuple_bound_margins(12, TimePoint(100.0));
  CHECK(r12.factorial_margins.size() == 77);
  for (std::size_t i = 0; i < r12.factorial_margins.size(); ++i) {
    CHECK(r12.factorial_margins[i].margin >= -1e-12);
    CHECK(r12.weighted_margins[i].margin >= -1e-12);
  }
  CHECK(r12.series_margin >= 0.0);
}

TEST_CASE("coefficient estimates, exact left side against lgamma") {
  for (const auto& rep : {tuple_bound_margins(16, TimePoint(0.0))}) {
    for (std::size_t i = 0; i < rep.tuples.size(); ++i) {
      const auto& p = rep.tuples[i];
      double lg = 2 * std::lgamma(p.k + 1.0) - std::lgamma(p.m[0] + 1.0) - std::lgamma(p.n + 1.0);
      for (int j = 2; j <= p.n; ++j) lg += p.m[j - 1] * (std::lgamma(j + 1.0) - std::log(2.0));
      CHECK(rep.factorial_margins[i].lhs == doctest::Approx(std::exp(lg)).epsilon(1e-11));
    }
  }
}

TEST_CASE("interpolation inequalities") {
  for (int n = 3; n <= 16; ++n) {
    auto m = interpolation_margins(n, 2, TimePoint(5.0));
    CHECK(m.factorial_margin == 0.0);
    CHECK(m.phi_margin == 0.0);
  }
  auto a = interpolation_margins(4, 3, TimePoint(0.0));
  CHECK(a.factorial_margin == doctest::Approx(0.0).epsilon(1e-14).scale(3.0));
  auto b = interpolation_margins(10, 5, TimePoint(0.0));
  CHECK(b.phi_margin >= 0.0);
  for (double t : kCertificationTimes)
    for (int n = 3; n <= 30; ++n)
      for (int j = 2; j <= n; ++j) {
        auto m = interpolation_margins(n, j, TimePoint(t));
        CHECK(m.factorial_relative >= -1e-12);
        CHECK(m.phi_relative >= -1e-12);
      }
  CHECK_THROWS_AS(interpolation_margins(2, 2, TimePoint(0.0)), DomainError);
  CHECK_THROWS_AS(interpolation_margins(5, 6, TimePoint(0.0)), DomainError);
}

TEST_CASE("binomial phi sums") {
  auto s3 = binom_phi_sums(3, TimePoint(0.0));
  CHECK(s3.sum_from_1 == 5.0 / 3.0);
  CHECK(binom_phi_sums(0, TimePoint(2.0)).sum_from_0 == 1.0);
  CHECK(binom_phi_sums(0, TimePoint(2.0)).sum_from_1 == 0.0);
  CHECK(binom_phi_sums(20, TimePoint(25.0)).sum_from_1 <= 5.0 / 3.0);
}

TEST_CASE("Bell table matches the tuple enumeration") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    double D[BellTable::kMaxOrder + 1], outer[BellTable::kMaxOrder + 1];
    for (int i = 0; i <= BellTable::kMaxOrder; ++i) {
      D[i] = u(rng);
      outer[i] = u(rng);
    }
    double absD[BellTable::kMaxOrder + 1], absOuter[BellTable::kMaxOrder + 1];
    for (int i = 0; i <= BellTable::kMaxOrder; ++i) {
      absD[i] = std::abs(D[i]);
      absOuter[i] = std::abs(outer[i]);
    }
    BellTable bell, magnitude;
    bell.fill(D, BellTable::kMaxOrder);
    magnitude.fill(absD, BellTable::kMaxOrder);
    for (int n = 1; n <= BellTable::kMaxOrder; ++n)
      for (bool top : {false, true}) {
        double ref = faa_di_bruno_apply(std::span<const double>(outer, n + 1), std::span<const double>(D, n + 1),
                                        n, top);
        // Cancellation: compare at the size of the summed magnitudes.
        CHECK(std::abs(bell.compose(outer, n, top) - ref) <= 1e-13 * magnitude.compose(absOuter, n, false));
      }
  }
  // B_{n,k}(1, 1, ...) are Stirling numbers of the second kind.
  double ones[BellTable::kMaxOrder + 1];
  std::fill(std::begin(ones), std::end(ones), 1.0);
  BellTable s2;
  s2.fill(ones, 10);
  CHECK(s2(10, 3) == 9330.0);
  CHECK(s2(7, 4) == 350.0);
}
