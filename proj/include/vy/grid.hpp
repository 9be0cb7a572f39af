#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace vy {

// Scalar field sampled at x_i = -L + i * 2L/(N-1), i = 0..N-1.
class GridFunction {
 public:
  GridFunction(double half_width, std::vector<double> values);
  static GridFunction zeros(double half_width, std::size_t nodes);
  template <class F>
  static GridFunction sample(double half_width, std::size_t nodes, F&& f) {
    GridFunction g = zeros(half_width, nodes);
    for (std::size_t i = 0; i < nodes; ++i) g.values_[i] = f(g.x(i));
    return g;
  }

  double half_width() const { return half_width_; }
  std::size_t size() const { return values_.size(); }
  double spacing() const { return 2.0 * half_width_ / static_cast<double>(values_.size() - 1); }
  double x(std::size_t i) const { return -half_width_ + static_cast<double>(i) * spacing(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

  double sup_norm() const;
  bool same_grid(const GridFunction& other) const;

  // CSV: header "x,value" then one row per node.
  void write_csv(std::ostream& os) const;
  // Binary slice: L (f64 LE), N (u64 LE), N values (f64 LE).
  void write_binary(std::ostream& os) const;
  static GridFunction read_binary(std::istream& is);

 private:
  double half_width_;
  std::vector<double> values_;
};

inline constexpr int kMaxDerivativeOrder = 8;

// Order-8 accurate finite differences: centred in the interior, shifted
// one-sided stencils near the ends. order in [0, 8].
GridFunction spatial_derivative(const GridFunction& g, int order);

// Finite-difference weights (Fornberg) for derivative `order` at z over nodes.
std::vector<double> fd_weights(double z, std::span<const double> nodes, int order);

}  // namespace vy
