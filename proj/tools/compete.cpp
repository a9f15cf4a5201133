#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "compete/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Galerkin solver for -Δp u + Δq u = f(x, T(u), ∇T(u)) with hypothesis checks"};
  app.require_subcommand(1);

  std::string config;
  compete::CommandOptions opts;
  opts.log = &std::cerr;
  std::uint64_t seed = 0;
  int levels = 0;

  const char* names[] = {"solve", "check", "constants", "study"};
  const char* help[] = {"solve every level and write solve_report.json/.csv",
                        "check (H1)/(H2) and the T2/T3 conditions; write check_report.json",
                        "estimate λ_{1,p} and S_r; write constants.json",
                        "convergence study against the exact solution; write study.csv"};
  for (int i = 0; i < 4; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("config", config, "problem configuration (JSON)")->required();
    sub->add_option("--out-dir", opts.out_dir, "directory for reports")->capture_default_str();
    sub->add_option("--seed", seed, "seed for every randomized trial");
    sub->add_option("--levels", levels, "number of hierarchy levels");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string cmd = app.get_subcommands().front()->get_name();
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->count("--levels")) opts.levels = levels;

  compete::ProblemSpec spec;
  try {
    spec = compete::with_overrides(compete::parse_config(config), opts);
  } catch (const compete::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  if (cmd == "solve") return compete::cmd_solve(spec, opts);
  if (cmd == "check") return compete::cmd_check(spec, opts);
  if (cmd == "constants") return compete::cmd_constants(spec, opts);
  return compete::cmd_study(spec, opts);
}
