#include <iostream>

#include <CLI11.hpp>

#include "vy/cli.hpp"
#include "vy/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Screened Vlasov-Poisson simulator and inequality certification suite"};
  app.require_subcommand(1);
  app.fallthrough();

  vy::CommandSpec spec;
  int jobs = 0;
  std::uint64_t seed = 0;
  bool quiet = false;
  int verbose = 0;
  app.add_option("--config", spec.config, "key = value run configuration (defaults if omitted)")->check(CLI::ExistingFile);
  app.add_option("--out", spec.out, "output directory")->capture_default_str();
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_flag("-v,--verbose", verbose, "list every failed check");
  app.add_flag("-q,--quiet", quiet, "no summary lines");

  app.add_subcommand("verify-lemmas", "certify the weight, combinatorial, comparison, field and ladder inequalities");
  app.add_subcommand("free-stream", "closed-form free-streaming decay tables for the configured data");
  app.add_subcommand("simulate", "Picard iteration; writes rho history, decay tables and report.json");
  app.add_subcommand("oracle-compare", "semi-Lagrangian oracle against the stored simulate result in --out");
  app.add_subcommand("decay-report", "c_n(t) and envelope tables for the stored simulate result in --out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? vy::kExitOk : vy::kExitUsage;
  }
  spec.command = app.get_subcommands().front()->get_name();
  if (*jobs_opt) spec.jobs = jobs;
  if (*seed_opt) spec.seed = seed;
  spec.verbosity = quiet ? 0 : 1 + verbose;

  try {
    return vy::dispatch(spec, std::cout);
  } catch (const vy::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return vy::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return vy::kExitMarginFailure;
  }
}
