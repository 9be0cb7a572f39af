#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vy/oracle.hpp"
#include "vy/picard.hpp"
#include "vy/transport.hpp"

namespace vy {

// Outcome of one certification suite: CSV tables keyed by file name, headline
// metrics in insertion order, and a readable line per failed check.
struct SuiteResult {
  std::string name;
  bool passed = true;
  double seconds = 0.0;
  std::vector<std::string> failures;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, std::string>> tables;

  void fail(const std::string& what);
  void check(bool ok, const std::string& what) {
    if (!ok) fail(what);
  }
  double metric(const std::string& key) const;  // throws DomainError if absent
  std::string summary() const;
};

// Factorial, weighted and series margins of the Faa di Bruno tuples for n <= n_max on the
// certification times; power sums up to power_sum_max.
SuiteResult tuple_bounds_suite(int n_max = 16, int power_sum_max = 200, double tol = 1e-12);
// Binomial phi sums <= 5/3 and 8/3 for n <= n_max; 5/3 exactly at n = 3, t = 0.
SuiteResult binomial_sums_suite(int n_max = 50, double tol = 1e-12);
// Time-integral margins for n <= n_max, plus the anchors rhs(1) = 50/9 and rhs(2) = 200/9.
SuiteResult time_integral_suite(int n_max = 20, double quad_tol = 1e-8);
// The three comparison-solution bounds and the kernel bound for h in {0, +-gamma''/gamma,
// random paths} at t in {0.1, 1, 10, 100}; closed forms for h = 0.
SuiteResult comparison_suite(int random_paths = 100, std::uint64_t seed = 0, double slack = 1e-8,
                             double closed_form_tol = 1e-10);
// Manufactured potential, self-convolution and (phi1) margins on random inputs.
SuiteResult screened_field_suite(int random_inputs = 100, std::uint64_t seed = 0, double tol = 1e-6,
                                 double margin_slack = 1e-8);
// Zero-field closed forms, ladder vs finite differences and ladder margins on random solves.
SuiteResult characteristics_suite(int random_solves = 100, std::uint64_t seed = 0, int jobs = 1,
                                  double closed_form_tol = 1e-10, double fd_tol = 1e-5);
// Closed-form free streaming against quadrature, and sup |d^n rho| against the f0 envelope.
SuiteResult free_stream_suite(const InitialData& data, int n_max = 8,
                              const std::vector<double>& times = {0.0, 1.0, 4.0, 16.0, 50.0},
                              double quad_tol = 1e-9);
// Flags of a finished Picard run, with the rho history and decay tables.
SuiteResult simulate_suite(const RunResult& result);
SuiteResult oracle_suite(const OracleComparison& cmp, double sup_tol = 1e-5, double drift_tol = 1e-8);
// c_n(t) <= 1/3000 and envelope ratios <= 1 for a stored history.
SuiteResult decay_suite(const DensityHistory& history, int n_max);

struct CommandSpec {
  std::string command;  // verify-lemmas | free-stream | simulate | oracle-compare | decay-report
  std::string config;   // empty: built-in defaults
  std::string out = ".";
  int verbosity = 1;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitMarginFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs one subcommand, writes its tables plus summary.json and failures.json under
// spec.out, and returns the exit status. Throws DomainError on usage problems.
int dispatch(const CommandSpec& spec, std::ostream& log);

}  // namespace vy
