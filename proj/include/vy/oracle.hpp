#pragma once

#include <cstddef>
#include <vector>

#include "vy/characteristics.hpp"
#include "vy/picard.hpp"
#include "vy/transport.hpp"

namespace vy {

// f on a periodic phase-space grid. The x nodes are those of a GridFunction on
// [-L, L] with the right endpoint identified with the left one; v_j = -vmax + j dv.
// Storage is row-major with one row per v node.
class PhaseSpaceFunction {
 public:
  PhaseSpaceFunction(double half_width, std::size_t x_nodes, double vmax, std::size_t v_nodes);
  static PhaseSpaceFunction sample(const InitialData& data, double half_width, std::size_t x_nodes, double vmax,
                                   std::size_t v_nodes);

  std::size_t nx() const { return nx_; }  // periodic x count = GridFunction size - 1
  std::size_t nv() const { return nv_; }
  double dx() const { return dx_; }
  double dv() const { return dv_; }
  double half_width() const { return half_width_; }
  double vmax() const { return vmax_; }
  double x(std::size_t i) const { return -half_width_ + static_cast<double>(i) * dx_; }
  double v(std::size_t j) const { return -vmax_ + static_cast<double>(j) * dv_; }

  double* row(std::size_t j) { return f_.data() + j * nx_; }
  const double* row(std::size_t j) const { return f_.data() + j * nx_; }
  double& at(std::size_t i, std::size_t j) { return f_[j * nx_ + i]; }
  double at(std::size_t i, std::size_t j) const { return f_[j * nx_ + i]; }

  double mass() const;
  double min() const;
  // rho = sum_j f dv on the GridFunction grid (endpoint copied from the left end).
  GridFunction density() const;
  // Fraction of |f| mass in the outer `band` of the v range on each side.
  double boundary_fraction(double band = 0.05) const;

 private:
  double half_width_, vmax_, dx_, dv_;
  std::size_t nx_, nv_;
  std::vector<double> f_;
};

// out[j] = s(j + shift) for the periodic cubic B-spline interpolant s of in[0..n).
// Integer shifts are exact permutations; sum(out) == sum(in) up to rounding.
void spline_shift_periodic(const double* in, std::size_t n, double shift, double* out);

struct OracleOptions {
  double dt = 0.01;
  double leak_threshold = 1e-10;  // allowed boundary_fraction before TruncationError
  bool zero_field = false;        // pure transport
  int jobs = 1;
};

// Strang-split semi-Lagrangian stepper: half x-shift (spectral), field from rho by
// a spectral screened-Poisson solve, full v-shift (cubic spline), half x-shift.
class SemiLagrangian {
 public:
  SemiLagrangian(const PhaseSpaceFunction& shape, Coupling q, const OracleOptions& opts);
  ~SemiLagrangian();
  SemiLagrangian(const SemiLagrangian&) = delete;
  SemiLagrangian& operator=(const SemiLagrangian&) = delete;

  void step(PhaseSpaceFunction& f, double dt) const;
  // d_x phi for the density of f, on the periodic x nodes.
  std::vector<double> field(const PhaseSpaceFunction& f) const;

 private:
  void shift_x(PhaseSpaceFunction& f, double dt) const;
  void shift_v(PhaseSpaceFunction& f, const std::vector<double>& dphi, double dt) const;

  std::size_t nx_;
  double dx_;
  double qs_;
  OracleOptions opts_;
  void* forward_;
  void* backward_;
};

struct OracleGrid {
  double half_width = 0.0;
  std::size_t x_nodes = 0;
  double vmax = 0.0;
  double dv = 0.0;
  std::size_t v_nodes = 0;
};

// vmax: widest term reaches 1e-20 of its peak; dv resolves the filament width
// 1/sqrt(2a(1+T^2)) at the horizon with 4/3 nodes per standard deviation.
OracleGrid oracle_grid(const RunConfig& cfg, const InitialData& data, double half_width, std::size_t x_nodes);

struct OracleRun {
  DensityHistory history;  // oracle densities at the requested times
  std::vector<double> masses;
  double mass_drift = 0.0;   // max |M(t) - M(0)| / M(0)
  double undershoot = 0.0;   // max(0, -min f) / max f0
  std::size_t steps = 0;
  OracleGrid grid;
};

// Evolves f0 and records rho exactly at `times` (substeps of size <= dt between nodes).
OracleRun evolve(const InitialData& data, const OracleGrid& grid, const std::vector<double>& times, Coupling q,
                 const OracleOptions& opts, int n_max);

struct OracleComparison {
  std::vector<double> times;
  std::vector<double> sup_error;      // sup |rho_oracle - rho_picard|
  std::vector<double> relative_error; // sup_error / sup |rho_picard|
  std::vector<double> d1_error;       // sup |d_x rho_oracle - d_x rho_picard|
  double max_sup_error = 0.0;
  double max_relative_error = 0.0;
  double mass_drift = 0.0;
  double undershoot = 0.0;
  // oracle-only decay table: c_n(t) and envelope ratios per slice
  std::vector<std::vector<double>> constants;
  std::vector<std::vector<double>> envelope_ratios;
  bool envelope_pass = true;
  OracleRun run;

  // sup error <= 1e-5 and mass drift <= 1e-8
  bool passed(double sup_tol = 1e-5, double drift_tol = 1e-8) const {
    return max_sup_error <= sup_tol && mass_drift <= drift_tol;
  }
};

// Runs the oracle on the grid and time nodes of `picard` and compares.
// Throws DomainError if the config grid does not match the stored history.
OracleComparison run_and_compare(const RunConfig& cfg, const InitialData& data, const DensityHistory& picard);

}  // namespace vy
