#include "vy/combinatorics.hpp"

#include <array>
#include <cmath>
#include <string>

#include "vy/error.hpp"

namespace vy {

namespace {

using u128 = unsigned __int128;

void enumerate_from(int j, int n, int remaining, std::vector<int>& m,
                    std::vector<PartitionTuple>& out) {
  if (j > n) {
    if (remaining != 0) return;
    PartitionTuple p;
    p.n = n;
    p.m = m;
    for (int i = 0; i < n; ++i) p.k += m[i];
    p.s = 2 * p.k - m[0];
    out.push_back(std::move(p));
    return;
  }
  for (int c = 0; c * j <= remaining; ++c) {
    m[j - 1] = c;
    enumerate_from(j + 1, n, remaining - c * j, m, out);
  }
  m[j - 1] = 0;
}

u128 checked_mul(u128 a, u128 b) {
  u128 r;
  if (__builtin_mul_overflow(a, b, &r)) throw OverflowError("exact factorial arithmetic overflow");
  return r;
}

u128 factorial128(int n) {
  u128 r = 1;
  for (int i = 2; i <= n; ++i) r = checked_mul(r, static_cast<u128>(i));
  return r;
}

double to_double(u128 v) { return static_cast<double>(v); }

// (k!)^2 prod_{j>=2} (j!/2)^{m_j} and m_1! n! as exact integers when they fit,
// so the factorial-ratio left side is a single correctly rounded quotient.
double factorial_ratio(const PartitionTuple& p) {
  try {
    u128 num = checked_mul(factorial128(p.k), factorial128(p.k));
    for (int j = 2; j <= p.n; ++j) {
      u128 half = factorial128(j) / 2;
      for (int c = 0; c < p.m[j - 1]; ++c) num = checked_mul(num, half);
    }
    u128 den = checked_mul(factorial128(p.m[0]), factorial128(p.n));
    // Reduce exactly before converting.
    u128 a = num, b = den;
    while (b != 0) {
      u128 r = a % b;
      a = b;
      b = r;
    }
    return to_double(num / a) / to_double(den / a);
  } catch (const OverflowError&) {
    double lg = 2.0 * std::lgamma(p.k + 1.0) - std::lgamma(p.m[0] + 1.0) - std::lgamma(p.n + 1.0);
    for (int j = 2; j <= p.n; ++j) lg += p.m[j - 1] * (std::lgamma(j + 1.0) - std::log(2.0));
    return std::exp(lg);
  }
}

}  // namespace

std::vector<PartitionTuple> enumerate_partitions(int n, int n_max, bool exclude_top) {
  if (n < 1) throw DomainError("enumerate_partitions: n must be positive");
  if (n > n_max)
    throw DomainError("enumerate_partitions: n = " + std::to_string(n) + " exceeds n_max = " +
                      std::to_string(n_max));
  std::vector<PartitionTuple> out;
  std::vector<int> m(static_cast<std::size_t>(n), 0);
  enumerate_from(1, n, n, m, out);
  if (exclude_top && n >= 1) {
    std::erase_if(out, [n](const PartitionTuple& p) { return p.m[n - 1] != 0; });
  }
  return out;
}

std::uint64_t multinomial_weight(const PartitionTuple& p) {
  u128 num = factorial128(p.n);
  u128 den = 1;
  for (int c : p.m) den = checked_mul(den, factorial128(c));
  u128 r = num / den;
  if (r > static_cast<u128>(UINT64_MAX)) throw OverflowError("multinomial weight exceeds 64 bits");
  return static_cast<std::uint64_t>(r);
}

double faa_di_bruno_apply(std::span<const double> outer, std::span<const double> inner, int n,
                          bool exclude_top) {
  if (n < 1) throw DomainError("faa_di_bruno_apply: n must be positive");
  if (outer.size() < static_cast<std::size_t>(n + 1) || inner.size() < static_cast<std::size_t>(n + 1))
    throw DomainError("faa_di_bruno_apply: derivative arrays too short");
  std::vector<double> inv_fact(static_cast<std::size_t>(n + 1), 1.0);
  for (int j = 1; j <= n; ++j) inv_fact[j] = inv_fact[j - 1] / j;
  double total = 0.0;
  for (const auto& p : enumerate_partitions(n, n, exclude_top)) {
    double term = static_cast<double>(multinomial_weight(p)) * outer[p.k];
    for (int j = 1; j <= n; ++j) {
      int c = p.m[j - 1];
      if (c == 0) continue;
      term *= std::pow(inner[j] * inv_fact[j], c);
    }
    total += term;
  }
  return total;
}

double tuple_power_sum(int n) {
  if (n < 1) throw DomainError("tuple_power_sum: n must be positive");
  double sum = 0.0;
  for (int j = 2; j <= n; ++j) sum += std::pow(static_cast<double>(j) / n, (j - 2) / 4.0);
  return sum;
}

TupleBoundReport tuple_bound_margins(int n, TimePoint tp, int n_max) {
  double t = tp.value();
  TupleBoundReport rep;
  rep.n = n;
  rep.t = t;
  rep.tuples = enumerate_partitions(n, n_max);
  double dn = n;
  double phin = phi_value(n, t);
  double fact_n = std::tgamma(dn + 1.0);
  int id = 0;
  for (const auto& p : rep.tuples) {
    double lhs1 = factorial_ratio(p);
    double rhs1 = std::pow(p.s / dn, (p.s - 2) / 2.0);
    double rhs2 = 1.0;
    double phi_prod = phi_value(p.k, t) / phin;
    for (int j = 2; j <= n; ++j) {
      int c = p.m[j - 1];
      if (c == 0) continue;
      double ratio = j / dn;
      rhs1 *= std::pow(ratio, (j - 2) * c / 2.0);
      rhs2 *= std::pow(ratio, (j - 2) * c / 4.0);
      phi_prod *= std::pow(phi_value(j, t), c);
    }
    double lhs2 = lhs1 * phi_prod;
    rep.factorial_margins.push_back({id, lhs1, rhs1, rhs1 - lhs1});
    rep.weighted_margins.push_back({id, lhs2, rhs2, rhs2 - lhs2});

    // Series summand: (k!)^2 phi_k / (m_1! ... m_n!) prod_{j>=2} (j! phi_j / 200)^{m_j}
    double lg = 2.0 * std::lgamma(p.k + 1.0);
    for (int j = 1; j <= n; ++j) lg -= std::lgamma(p.m[j - 1] + 1.0);
    double term = std::exp(lg) * phi_value(p.k, t);
    for (int j = 2; j <= n; ++j) {
      int c = p.m[j - 1];
      if (c) term *= std::pow(std::tgamma(j + 1.0) * phi_value(j, t) / 200.0, c);
    }
    rep.series_lhs += term;
    ++id;
  }
  rep.power_sum = tuple_power_sum(n);
  rep.power_margin = 15.0 - rep.power_sum;
  rep.series_rhs = fact_n * phin * std::exp(0.15);
  rep.series_margin = 1.0 - rep.series_lhs / rep.series_rhs;
  return rep;
}

InterpolationMargins interpolation_margins(int n, int j, TimePoint tp) {
  if (n < 3 || j < 2 || j > n) throw DomainError("interpolation_margins: need n >= 3 and 2 <= j <= n");
  double t = tp.value();
  double e = static_cast<double>(j - 2) / (n - 2);
  double ratio = static_cast<double>(j) / n;
  double lhs1 = std::tgamma(j + 1.0) / 2.0;
  double rhs1 = std::pow(std::tgamma(n + 1.0) / 2.0, e) * std::pow(ratio, (j - 2) / 2.0);
  double lhs2 = phi_value(j, t);
  double rhs2 = std::pow(phi_value(n, t), e) * std::pow(ratio, -(j - 2) / 4.0);
  return {rhs1 - lhs1, rhs2 - lhs2, (rhs1 - lhs1) / lhs1, (rhs2 - lhs2) / lhs2};
}

BinomPhiSums binom_phi_sums(int n, TimePoint tp) {
  if (n < 0) throw DomainError("binom_phi_sums: n must be nonnegative");
  double t = tp.value();
  // Common denominator n! phi_n keeps small cases exact (n = 3, t = 0 gives 10/6).
  long double num = 0.0L;
  for (int k = 1; k <= n; ++k)
    num += std::tgamma(k + 1.0L) * std::tgamma(n - k + 1.0L) * phi_value(n - k, t) * phi_value(k, t);
  long double den = std::tgamma(n + 1.0L) * phi_value(n, t);
  double from1 = static_cast<double>(num / den);
  double from0 = static_cast<double>((num + den) / den);
  return {from1, from0};
}

void BellTable::fill(const double* D, int top) {
  if (top < 0 || top > kMaxOrder) throw DomainError("BellTable order out of range");
  static const auto binom = [] {
    std::array<std::array<double, kMaxOrder + 1>, kMaxOrder + 1> c{};
    for (int n = 0; n <= kMaxOrder; ++n) {
      c[n][0] = 1.0;
      for (int k = 1; k <= n; ++k) c[n][k] = c[n - 1][k - 1] + (k < n ? c[n - 1][k] : 0.0);
    }
    return c;
  }();
  b_[0][0] = 1.0;
  for (int n = 1; n <= top; ++n) {
    b_[n][0] = 0.0;
    for (int k = 1; k <= n; ++k) {
      double acc = 0.0;
      for (int i = 1; i <= n - k + 1; ++i) acc += binom[n - 1][i - 1] * D[i] * b_[n - i][k - 1];
      b_[n][k] = acc;
    }
  }
}

double BellTable::compose(const double* outer, int n, bool drop_top) const {
  if (n == 0) return outer[0];
  double acc = 0.0;
  for (int k = drop_top ? 2 : 1; k <= n; ++k) acc += outer[k] * b_[n][k];
  return acc;
}

}  // namespace vy
