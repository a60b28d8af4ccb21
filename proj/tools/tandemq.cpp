// tandemq: solve, verify and evaluate the two-node tandem queue control
// problem. See README.md for the command reference.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tandem/cli.hpp"

namespace {

void add_common(CLI::App* cmd, tandem::cli::CommonOptions& o) {
  cmd->add_option("config", o.config_path, "Model config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", o.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--l1", o.l1, "Node-1 buffer cap")->capture_default_str();
  cmd->add_option("--l2", o.l2, "Node-2 buffer cap")->capture_default_str();
  cmd->add_option("--margin", o.margin, "Boundary band excluded by checks (default 3, reduced on small boxes)");
  cmd->add_option("--tol", o.tol, "Span stopping threshold")->capture_default_str();
  cmd->add_option("--max-iters", o.max_iters, "Iteration limit")->capture_default_str();
  cmd->add_option("--tie-tol", o.tie_tol, "Relative argmin tie tolerance")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = auto); results do not depend on it");
  cmd->add_flag("--allow-unconverged", o.allow_unconverged, "Exit 0 even if the solver hits --max-iters");
}

void add_policy(CLI::App* cmd, tandem::cli::PolicySource& p) {
  cmd->add_option("--policy", p.policy_path, "Policy CSV (x1,x2,a_value,b_value,...)");
  cmd->add_flag("--from-solve", p.from_solve, "Solve first and use the optimal policy");
}

}  // namespace

int main(int argc, char** argv) {
  namespace tc = tandem::cli;
  CLI::App app{"Optimal resource allocation for a two-node tandem queue"};
  app.require_subcommand(1);

  tc::CommonOptions common;
  tc::CheckCmdOptions check_opts;
  tc::PolicySource policy;
  tc::SimCmdOptions sim_opts;
  tc::SweepCmdOptions sweep_opts;
  double pi_tol = 1e-12;
  long pi_max_iters = 1000000;

  auto* solve = app.add_subcommand("solve", "Relative value iteration; writes value.csv, policy.csv, solution.json");
  add_common(solve, common);

  auto* check = app.add_subcommand("check", "Solve and verify structural properties; writes report.json");
  add_common(check, common);
  check->add_option("--mode", check_opts.mode, "strict | info")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Exact average cost of a policy; writes eval.json");
  add_common(evaluate, common);
  add_policy(evaluate, policy);
  evaluate->add_option("--pi-tol", pi_tol, "Stationary residual tolerance")->capture_default_str();
  evaluate->add_option("--pi-max-iters", pi_max_iters, "Stationary iteration limit")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "Discrete-event simulation of a policy; writes sim.json");
  add_common(simulate, common);
  add_policy(simulate, policy);
  simulate->add_option("--events", sim_opts.events, "Number of uniformized jumps")->capture_default_str();
  simulate->add_option("--batches", sim_opts.batches, "Batch-means batches")->capture_default_str();
  simulate->add_option("--warmup", sim_opts.warmup, "Fraction of simulated time discarded")->capture_default_str();
  simulate->add_option("--seed", common.seed, "Generator seed")->capture_default_str();

  auto* oracle = app.add_subcommand("oracle", "Exhaustive policy enumeration on a tiny box; writes oracle.json");
  add_common(oracle, common);

  auto* sweep = app.add_subcommand("sweep", "Re-solve over values of one config entry; writes sweep.csv");
  add_common(sweep, common);
  sweep->add_option("--param", sweep_opts.param, "Config path, e.g. lambda or node1.cost.2")->required();
  sweep->add_option("--values", sweep_opts.values, "Comma-separated values")->required()->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tc::kExitError;
  }

  if (*solve) return tc::cmd_solve(common);
  if (*check) return tc::cmd_check(common, check_opts);
  if (*evaluate) return tc::cmd_evaluate(common, policy, pi_tol, pi_max_iters);
  if (*simulate) return tc::cmd_simulate(common, policy, sim_opts);
  if (*oracle) return tc::cmd_oracle(common);
  if (*sweep) return tc::cmd_sweep(common, sweep_opts);
  return tc::kExitError;
}
