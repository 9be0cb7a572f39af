#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vy/weights.hpp"

namespace vy {

inline constexpr int kDefaultMaxOrder = 16;

// Faa di Bruno index tuple: m[j-1] = m_j, sum_j j m_j = n, k = sum m_j, s = 2k - m_1.
struct PartitionTuple {
  int n = 0;
  std::vector<int> m;
  int k = 0;
  int s = 0;
};

// All tuples of order n in increasing lexicographic order of (m_1, ..., m_n).
// exclude_top drops the tuple with m_n = 1 (the single-part partition).
std::vector<PartitionTuple> enumerate_partitions(int n, int n_max = kDefaultMaxOrder,
                                                 bool exclude_top = false);

// n! / (m_1! ... m_n!) exactly; throws OverflowError past 64 bits.
std::uint64_t multinomial_weight(const PartitionTuple& p);

// n-th derivative of F(g(x)) from outer[k] = F^(k)(g(x)) and inner[j] = g^(j)(x),
// j = 1..n (inner[0] unused). exclude_top omits the F'(g) g^(n) term.
double faa_di_bruno_apply(std::span<const double> outer, std::span<const double> inner, int n,
                          bool exclude_top = false);

// Partial Bell polynomials B_{n,k}(D_1, ..., D_{n-k+1}) for n <= top by the
// recurrence B_{n,k} = sum_i C(n-1, i-1) D_i B_{n-i,k-1}. Same sums as
// faa_di_bruno_apply without enumerating tuples; D[0] is unused.
class BellTable {
 public:
  static constexpr int kMaxOrder = 10;

  void fill(const double* D, int top);
  double operator()(int n, int k) const { return b_[n][k]; }
  // d^n [F(g)] from outer[k] = F^(k)(g); drop_top omits the F'(g) g^(n) term.
  double compose(const double* outer, int n, bool drop_top = false) const;

 private:
  double b_[kMaxOrder + 1][kMaxOrder + 1] = {};
};

struct TupleMargin {
  int tuple_id;
  double lhs;
  double rhs;
  double margin;
};

struct TupleBoundReport {
  int n = 0;
  double t = 0.0;
  std::vector<PartitionTuple> tuples;
  std::vector<TupleMargin> factorial_margins;  // per tuple: factorial ratio vs power of s/n
  std::vector<TupleMargin> weighted_margins;   // the same with the phi weights
  double power_sum = 0.0;
  double power_margin = 0.0;
  double series_lhs = 0.0;
  double series_rhs = 0.0;
  double series_margin = 0.0;  // relative: 1 - lhs / rhs
};

TupleBoundReport tuple_bound_margins(int n, TimePoint t, int n_max = kDefaultMaxOrder);

// sum_{j=2}^n (j/n)^{(j-2)/4}; valid for any n >= 1 without enumeration.
double tuple_power_sum(int n);

struct InterpolationMargins {
  double factorial_margin;
  double phi_margin;
  double factorial_relative;  // margin / lhs
  double phi_relative;
};

InterpolationMargins interpolation_margins(int n, int j, TimePoint t);

struct BinomPhiSums {
  double sum_from_1;
  double sum_from_0;
};

// sum_k C(n,k)^{-1} phi_{n-k} phi_k / phi_n over k = 1..n and k = 0..n.
BinomPhiSums binom_phi_sums(int n, TimePoint t);

}  // namespace vy
