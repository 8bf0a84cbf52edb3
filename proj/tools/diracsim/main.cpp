#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dirac/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::string system;
  std::vector<std::string> params;
  double T = 0.0;
  double h = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  int branch = 1;
  double perturb = 0.0;
  double tol = 0.0;
  bool corrected = false;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  // -h is taken by the step size.
  cmd->set_help_flag("--help", "print this help and exit");
  cmd->add_option("--config", f.config, "INI file; flags given on the command line take precedence");
  cmd->add_option("--system", f.system,
                  "roller-racer | bicycle | lc-circuit | free-particle | linear-velocity | nonholonomic-toy | flat-toy");
  cmd->add_option("--param", f.params, "parameter override key=value (repeatable)");
  cmd->add_option("--T", f.T, "final time (default 10)");
  cmd->add_option("--h", f.h, "step size (default 1e-3)");
  cmd->add_option("--seed", f.seed, "sampling seed (default 42)");
  cmd->add_option("--out", f.out, "output path or stem");
  cmd->add_option("--branch", f.branch, "square-root branch of the built-in solution, +1 or -1");
  cmd->add_option("--perturb", f.perturb, "additive perturbation of the built-in velocity field");
  cmd->add_option("--tol", f.tol, "pass threshold (hj-check default 1e-9, reduce default 1e-6)");
  cmd->add_flag("--corrected", f.corrected, "bicycle: use the sin^2 reading of the lean term");
}

// Config file first, then every flag that was actually given.
dirac::RunConfig merge(CLI::App* cmd, const Flags& f) {
  dirac::RunConfig c;
  if (!f.config.empty()) c = dirac::load_config(f.config);
  if (cmd->count("--system")) c.system = f.system;
  if (cmd->count("--T")) c.T = f.T;
  if (cmd->count("--h")) c.h = f.h;
  if (cmd->count("--seed")) c.seed = f.seed;
  if (cmd->count("--out")) c.out = f.out;
  if (cmd->count("--branch")) c.branch = f.branch;
  if (cmd->count("--perturb")) c.perturb = f.perturb;
  if (cmd->count("--tol")) c.tol = f.tol;
  if (f.corrected) c.corrected = true;
  for (const auto& p : f.params) dirac::apply_param_override(c, p);
  dirac::check_param_keys(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lagrange-Dirac simulation, Hamilton-Jacobi checks and Chaplygin reduction"};
  app.set_help_flag("-h,--help", "print this help and exit");
  app.require_subcommand(1);

  Flags sim_flags, hj_flags, red_flags;
  auto* sim = app.add_subcommand("simulate", "integrate the Lagrange-Dirac equations and write a CSV");
  add_run_flags(sim, sim_flags);
  auto* hj = app.add_subcommand("hj-check", "verify the built-in Hamilton-Jacobi solution of a system");
  add_run_flags(hj, hj_flags);
  auto* red = app.add_subcommand("reduce", "reduce, integrate, reconstruct and compare with the direct run");
  add_run_flags(red, red_flags);

  std::string csv, svg = "plot.svg", xcol = "t";
  std::vector<std::string> columns;
  auto* plot = app.add_subcommand("plot", "SVG line chart of CSV columns");
  plot->add_option("csv", csv, "input CSV")->required();
  plot->add_option("--columns", columns, "columns to draw")->required()->delimiter(',');
  plot->add_option("--x", xcol, "abscissa column (default t)");
  plot->add_option("--out", svg, "output SVG (default plot.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dirac::kExitConfig;
  }

  auto run = [](CLI::App* cmd, const Flags& f, auto fn) {
    dirac::RunConfig c;
    const int code = dirac::run_guarded([&] { c = merge(cmd, f); return 0; }, std::cerr);
    if (code != 0) return code;
    return fn(c, std::cout, std::cerr);
  };
  if (*sim) return run(sim, sim_flags, dirac::cmd_simulate);
  if (*hj) return run(hj, hj_flags, dirac::cmd_hjcheck);
  if (*red) return run(red, red_flags, dirac::cmd_reduce);
  if (*plot) return dirac::cmd_plot(csv, columns, xcol, svg, std::cout, std::cerr);
  return dirac::kExitConfig;
}
