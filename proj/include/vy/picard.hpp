#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vy/transport.hpp"

namespace vy {

// Run parameters; the key=value config format uses the member names as keys.
struct RunConfig {
  int q = 1;
  // Initial data: "gaussian" (amplitude, width) or "mixture" (terms).
  std::string data = "gaussian";
  double width = 1.0;           // a in exp(-a (x^2 + v^2))
  std::optional<double> amplitude;  // "auto" (unset): tune against the derivative certificate
  std::string terms;            // "w,cx,cv,a; w,cx,cv,a; ..." for mixtures
  int certify_order = 8;
  double safety = 2.0;

  double half_width = 0.0;      // 0: derived from the data and the horizon
  double spacing = 0.25;
  double horizon = 50.0;
  int time_nodes = 64;
  double first_step = 0.05;

  int n_max = 4;
  double picard_tol = 1e-8;
  int max_iterations = 8;
  int min_iterations = 3;
  double bvp_tol = 1e-10;
  double ode_tol = 1e-10;
  double nodes_per_unit = 8.0;
  int ladder_stride = 32;

  double oracle_dt = 0.01;
  double oracle_vmax = 0.0;     // 0: derived from the data
  double oracle_dv = 0.0;       // 0: derived from the horizon

  int jobs = 1;
  std::uint64_t seed = 0;

  static RunConfig parse(std::istream& is);
  static RunConfig load(const std::string& path);
  // Applies one key=value assignment; throws DomainError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  std::string dump() const;  // key=value text that parses back to *this
};

Coupling coupling(const RunConfig& cfg);
InitialData make_initial_data(const RunConfig& cfg);
// Smallest L for which the field-free density at the horizon is below 1e-14
// at the grid ends (five percent added).
double required_half_width(const InitialData& data, double horizon);
// t_0 = 0, t_1 = first_step, geometric steps, t_{nodes-1} = horizon.
std::vector<double> geometric_time_grid(double horizon, int nodes, double first_step);

struct ResolvedGrid {
  double half_width;
  std::size_t nodes;
  std::vector<double> times;
};

// Applies the auto rules; throws DomainError("domain too small") if a given L is.
ResolvedGrid resolve_grid(const RunConfig& cfg, const InitialData& data);

struct DensityHistory {
  int iterate = 0;
  std::vector<DensitySlice> slices;

  static DensityHistory zero(const std::vector<double>& times, double half_width, std::size_t nodes,
                             int n_max);
  std::vector<double> times() const;
  std::vector<GridFunction> densities() const;
  FieldHistory field(int max_order) const;
  bool is_zero() const;
  // sup over time nodes of sup |rho - other.rho|
  double sup_difference(const DensityHistory& other) const;
  // max over slices of c_n(t)
  double max_constant(int n) const;

  // Long-format rho history, header "t,x,rho"; the oracle writes the same schema.
  void write_csv(std::ostream& os) const;

  void save(std::ostream& os) const;
  static DensityHistory load(std::istream& is, int n_max);
};

struct StepDiagnostics {
  int iterate = 0;
  std::size_t pairs = 0;
  std::size_t newton_iterations = 0;
  double max_residual = 0.0;
  double damping_ratio = 0.0;
  double seconds = 0.0;
  std::vector<double> route_discrepancy;  // per n, max over t (relative)
  std::vector<double> data_integral_margin;         // per n, min over t
  std::vector<double> density_integral_margin;
};

// One iterate: field from prev (frozen), then reconstruction at every time node.
DensityHistory picard_step(const DensityHistory& prev, const InitialData& data, const RunConfig& cfg,
                           StepDiagnostics* diag = nullptr);

struct IterateBoundCheck {
  double input_const;
  double output_const;
  bool pass;  // input_const <= 1/1500 implies output_const <= 1/3000
};

IterateBoundCheck iterate_bound_check(const DensityHistory& input, const DensityHistory& output, int n_max);

struct RunReport {
  RunConfig config;
  double amplitude = 0.0;
  double half_width = 0.0;
  std::size_t nodes = 0;
  std::vector<double> times;
  DataCertificate certificate;
  std::vector<StepDiagnostics> steps;
  std::vector<double> differences;          // d_k = sup |rho^(k) - rho^(k-1)|, k >= 1
  std::vector<double> ratios;               // d_k / d_{k-1}, k >= 2
  std::vector<std::vector<double>> iterate_constants;  // [k-1][n] max_t c_n(t)
  std::vector<IterateBoundCheck> iterate_bounds;
  std::vector<std::vector<double>> final_constants;    // [t][n]
  std::vector<std::vector<double>> envelope_ratios;    // [t][n] sup|d^n rho| (t+1)^{n+1} / (3^n (n!)^2/10^3)
  bool converged = false;
  bool data_certified = false;
  bool contraction_pass = false;  // d_k / d_{k-1} < 0.5 for k > 2
  bool normalization_pass = false;         // every iterate: c_n(t) <= 1/3000
  bool envelope_pass = false;
  bool bounds_pass = false;       // transported-integral margins >= 0 where evaluated
  double seconds = 0.0;

  bool passed() const {
    return converged && data_certified && contraction_pass && normalization_pass && envelope_pass && bounds_pass;
  }
  std::string to_json() const;
};

struct RunResult {
  DensityHistory final;
  RunReport report;
};

// Iterates from rho^(0) = 0 until d_k < picard_tol (with at least min_iterations
// iterates) or max_iterations. Non-convergence is reported, not thrown.
RunResult run(const RunConfig& cfg, const InitialData& data);
RunResult run(const RunConfig& cfg);

}  // namespace vy
