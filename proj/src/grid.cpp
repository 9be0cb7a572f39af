#include "vy/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>

#include "vy/error.hpp"

namespace vy {

GridFunction::GridFunction(double half_width, std::vector<double> values)
    : half_width_(half_width), values_(std::move(values)) {
  if (!(half_width_ > 0.0) || !std::isfinite(half_width_))
    throw DomainError("grid half width must be positive");
  if (values_.size() < 8) throw DomainError("grid needs at least 8 nodes");
  for (double v : values_)
    if (!std::isfinite(v)) throw DomainError("grid values must be finite");
}

GridFunction GridFunction::zeros(double half_width, std::size_t nodes) {
  return GridFunction(half_width, std::vector<double>(nodes, 0.0));
}

double GridFunction::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool GridFunction::same_grid(const GridFunction& other) const {
  return half_width_ == other.half_width_ && values_.size() == other.values_.size();
}

void GridFunction::write_csv(std::ostream& os) const {
  char buf[64];
  os << "x,value\n";
  for (std::size_t i = 0; i < size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x(i), values_[i]);
    os << buf;
  }
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary slices assume little-endian");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw DomainError("truncated binary slice");
  return v;
}

}  // namespace

void GridFunction::write_binary(std::ostream& os) const {
  put<double>(os, half_width_);
  put<std::uint64_t>(os, values_.size());
  os.write(reinterpret_cast<const char*>(values_.data()),
           static_cast<std::streamsize>(values_.size() * sizeof(double)));
}

GridFunction GridFunction::read_binary(std::istream& is) {
  double L = get<double>(is);
  auto n = get<std::uint64_t>(is);
  if (n < 8 || n > (1ull << 32)) throw DomainError("binary slice has an invalid node count");
  std::vector<double> v(n);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
    throw DomainError("truncated binary slice");
  return GridFunction(L, std::move(v));
}

std::vector<double> fd_weights(double z, std::span<const double> x, int m) {
  const int n = static_cast<int>(x.size()) - 1;
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(n + 1, 0.0));
  double c1 = 1.0, c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    int mn = std::min(i, m);
    double c2 = 1.0, c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c[m];
}

GridFunction spatial_derivative(const GridFunction& g, int order) {
  if (order < 0 || order > kMaxDerivativeOrder)
    throw DomainError("spatial_derivative: order must be in [0, 8]");
  if (order == 0) return g;
  const int n = static_cast<int>(g.size());
  const int centred = 2 * ((order + 1) / 2) - 1 + 8;
  const int shifted = order + 8;
  if (n < shifted) throw DomainError("spatial_derivative: grid too small for stencil");
  const int half = centred / 2;
  const double scale = std::pow(g.spacing(), -order);

  // Weights depend only on the stencil start relative to the node.
  std::map<std::pair<int, int>, std::vector<double>> cache;
  auto weights = [&](int offset, int size) -> const std::vector<double>& {
    auto key = std::make_pair(offset, size);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<double> nodes(size);
    for (int k = 0; k < size; ++k) nodes[k] = offset + k;
    auto w = fd_weights(0.0, nodes, order);
    for (double& v : w) v *= scale;
    return cache.emplace(key, std::move(w)).first->second;
  };

  const auto& in = g.values();
  std::vector<double> out(g.size());
  for (int i = 0; i < n; ++i) {
    int start, size;
    if (i - half >= 0 && i + half < n) {
      start = i - half;
      size = centred;
    } else {
      size = shifted;
      start = (i - half < 0) ? 0 : n - size;
    }
    const auto& w = weights(start - i, size);
    double acc = 0.0;
    for (int k = 0; k < size; ++k) acc += w[k] * in[start + k];
    out[i] = acc;
  }
  return GridFunction(g.half_width(), std::move(out));
}

}  // namespace vy
