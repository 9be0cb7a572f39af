#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "vy/characteristics.hpp"
#include "vy/grid.hpp"
#include "vy/screened_field.hpp"

namespace vy {

// weight * exp(-a ((x - cx)^2 + (v - cv)^2))
struct GaussianTerm {
  double weight = 1.0;
  double cx = 0.0;
  double cv = 0.0;
  double a = 1.0;
};

struct SupportBox {
  double x_lo, x_hi, v_lo, v_hi;
};

// Initial density f0 as a Gaussian mixture. Directional derivatives
// (d_x + d_v)^n f0 are closed-form: for one term they equal
// weight (-sqrt(2a))^n H_n(sqrt(a/2) (x - cx + v - cv)) exp(...).
class InitialData {
 public:
  static constexpr int kMaxOrder = 12;

  InitialData() = default;
  static InitialData gaussian(double amplitude, double a = 1.0);
  static InitialData mixture(std::vector<GaussianTerm> terms);

  const std::vector<GaussianTerm>& terms() const { return terms_; }
  bool is_zero() const;
  InitialData scaled(double factor) const;

  double f0(double x, double v) const;
  // (d_x + d_v)^n f0 (x, v)
  double directional(int n, double x, double v) const;
  // f~0(x0, v) = f0(x0 + v, v)
  double sheared(double x0, double v) const { return f0(x0 + v, v); }
  // d_v^n f~0 (x0, v) = ((d_x + d_v)^n f0)(x0 + v, v)
  double sheared_dv(int n, double x0, double v) const { return directional(n, x0 + v, v); }
  // out[k] = d_v^k f~0 (x0, v), k = 0..n, sharing one Hermite recurrence per term.
  void sheared_dv_all(int n, double x0, double v, double* out) const;

  // Exact integral of f0.
  double mass() const;
  // Every term is below cutoff * |weight| outside this box.
  SupportBox support(double cutoff = 1e-16) const;
  // Radius r with exp(-a r^2) = cutoff for the narrowest term.
  double support_radius(double cutoff = 1e-16) const;

 private:
  std::vector<GaussianTerm> terms_;
};

// The shear f0 -> f~0. InitialData already evaluates f~0 on the fly (sheared()),
// so this is the identity on the stored terms.
InitialData shear_transform(const InitialData& f0);

struct DataCertificate {
  std::vector<double> norms;    // ||(d_x + d_v)^{n+1} f0||_1, n = 0..n_max
  std::vector<double> margins;  // (n!)^2 / (10^4 safety) - norm
  std::vector<double> errors;   // quadrature error estimates
  bool passed = true;
  int failing_order = -1;       // first n with a negative margin
};

// L1 norms by 2D adaptive quadrature over the support box.
DataCertificate certify_initial_data(const InitialData& data, int n_max, double safety = 1.0,
                           double rel_tol = 1e-9);

// Rescale data so certify_initial_data(n_max, safety) passes: amplitude set to
// (1 - slack) of the largest admissible one.
InitialData auto_tune_amplitude(const InitialData& shape, int n_max, double safety = 2.0,
                                double slack = 1e-3);

// d_x^n rho of the field-free flow at time t on the grid (L, N):
// (t+1)^{-n-1} int (d_v^n f~0)(x0, (x - x0)/(t+1)) dx0 by adaptive quadrature.
GridFunction free_streaming_density(const InitialData& data, TimePoint t, int n, double half_width,
                                    std::size_t nodes, double rel_tol = 1e-12);

// Closed form of d_x^n rho for the field-free flow at one point: each term
// streams to a Gaussian of exponent a/(1+t^2) centred at cx + cv t, mass w pi/a.
double free_streaming_exact(const InitialData& data, TimePoint t, int n, double x);

// ||(d_x + d_v)^{n+1} f0||_1 / (t+1)^{n+1}
double free_streaming_envelope(const DataCertificate& cert, int n, TimePoint t);

// Density at one time with cached grid derivatives and the normalised constants
// c_n(t) = sup |d^n rho| gamma(t)^{n+1} / ((n!)^2 phi_n(t)).
class DensitySlice {
 public:
  DensitySlice(double t, GridFunction rho, int n_max);

  double time() const { return t_; }
  int n_max() const { return static_cast<int>(derivs_.size()) - 1; }
  const GridFunction& rho() const { return derivs_[0]; }
  const GridFunction& derivative(int n) const { return derivs_.at(n); }
  double sup(int n) const { return sups_.at(n); }
  double constant(int n) const;
  // sup |d^n rho| (t+1)^{n+1} / (3^n (n!)^2 / 10^3)
  double envelope_ratio(int n) const;
  // x, rho, d rho, ..., d^n rho
  void write_csv(std::ostream& os) const;

 private:
  double t_;
  std::vector<GridFunction> derivs_;
  std::vector<double> sups_;
};

// 3^n (n!)^2 (t+1)^{-n-1} / 10^3
double decay_envelope(int n, double t);

// Rows t, n, sup|d^n rho|, c_n(t), envelope.
void write_decay_csv(std::ostream& os, const std::vector<DensitySlice>& slices);

struct ReconstructOptions {
  int n_max = 4;
  double nodes_per_unit = 8.0;     // x0 Gauss-Legendre density
  double cutoff = 1e-16;           // support cut for f~0 relative to term weight
  int ladder_stride = 0;           // differentiate under the integral every k-th x node; 0 = off
  BvpOptions bvp = [] {
    BvpOptions o;
    o.keep_path = false;
    return o;
  }();
  int jobs = 1;
};

struct IntegralBoundMargins {
  std::vector<double> data;     // normalised (bound - value)/bound per order, min over x
  std::vector<double> density;
};

struct ReconstructResult {
  GridFunction rho = GridFunction::zeros(1.0, 8);
  std::vector<double> ladder_x;                 // x nodes used for the ladder route
  std::vector<std::vector<double>> ladder_derivs;  // [n][i] d^n rho at ladder_x[i]
  std::vector<double> route_discrepancy;        // per n, max |ladder - grid| / sup |grid|
  std::vector<double> route_discrepancy_abs;
  IntegralBoundMargins bounds;
  std::size_t pairs = 0;
  std::size_t newton_iterations = 0;
  double max_residual = 0.0;
};

// rho*(x, t) = int f~0(x0, w0) |d_x0 w| dx0 on the grid of hist.
ReconstructResult reconstruct_density(const InitialData& data, const FieldHistory& hist, TimePoint t,
                                      Coupling q, const ReconstructOptions& opts = {});

// Transported-data and density integrals at one x from the ladder: int |d_x^n [f~0(x0, w0)]| dx0
// and int |d_x^n [f~0(x0, w0) d_x0 w]| dx0, n = 0..n_max.
struct IntegralBoundValues {
  std::vector<double> data;
  std::vector<double> density;
  std::vector<double> rho_derivs;  // d_x^n rho (x) by differentiating under the integral
};

IntegralBoundValues integral_bound_values(const InitialData& data, const FieldHistory& hist, double x,
                                  TimePoint t, Coupling q, const ReconstructOptions& opts = {});

// (n!)^2 phi_n(t) / (8000 gamma(t)^n) and (n!)^2 phi_n(t) / (3000 gamma(t)^n)
double data_integral_bound(int n, TimePoint t);
double density_integral_bound(int n, TimePoint t);

}  // namespace vy
