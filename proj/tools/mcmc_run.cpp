// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line experiment harness.
//
//   mcmc run   --target std_normal --kernel hmc ...   sample and report
//   mcmc bench --chains 1,2,4,...                     per-step scaling table
//
// `run` exit codes: 0 success, 2 unknown target, 3 unknown kernel,
// 4 invalid configuration, 5 unwritable output, 6 batch-semantics
// validation failure, 7 kernel-contract violation.

#include <chrono>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "batchmc/driver.hpp"
#include "batchmc/hmc.hpp"
#include "batchmc/run.hpp"
#include "batchmc/targets.hpp"

namespace {

struct BenchConfig {
  std::vector<batchmc::Index> chain_counts = {1, 2, 4, 8, 16, 32, 64, 128, 256};
  batchmc::Index steps = 200;
  batchmc::Index warmup = 50;
  double step_size = 0.5;
  batchmc::Index num_leapfrog = 3;
  std::uint64_t seed = 0;
  std::string report = "scaling_report.json";
  bool quiet = false;
};

int run_bench(const BenchConfig& config) {
  using namespace batchmc;
  using clock = std::chrono::steady_clock;

  nlohmann::json entries = nlohmann::json::array();
  double base_per_step = 0.0;
  if (!config.quiet) {
    std::printf("%8s %16s %22s\n", "chains", "per-step (us)", "per-chain-step (us)");
  }
  for (const Index chains : config.chain_counts) {
    auto target = make_std_normal<double>(1);
    auto kernel = hmc_kernel(target.target, config.step_size, config.num_leapfrog);
    ChainState<double> state = initial_state(target, chains);
    Results<double> results = kernel->bootstrap_results(state);
    const RngKey key = make_key(config.seed);
    for (Index step = 0; step < config.warmup; ++step) {
      auto [next, r] =
          kernel->one_step(state, results, fold_in(key, static_cast<std::uint64_t>(step)));
      state = std::move(next);
      results = std::move(r);
    }
    const auto t0 = clock::now();
    for (Index step = 0; step < config.steps; ++step) {
      auto [next, r] = kernel->one_step(
          state, results, fold_in(key, static_cast<std::uint64_t>(config.warmup + step)));
      state = std::move(next);
      results = std::move(r);
    }
    const double seconds = std::chrono::duration<double>(clock::now() - t0).count();
    const double per_step_us = seconds / static_cast<double>(config.steps) * 1e6;
    const double per_chain_us = per_step_us / static_cast<double>(chains);
    if (chains == config.chain_counts.front()) base_per_step = per_step_us;
    entries.push_back(
        {{"chains", chains},
         {"per_step_microseconds", per_step_us},
         {"per_chain_step_microseconds", per_chain_us},
         {"per_step_vs_first", base_per_step > 0 ? per_step_us / base_per_step : 0.0}});
    if (!config.quiet) {
      std::printf("%8lld %16.3f %22.4f\n", static_cast<long long>(chains), per_step_us,
                  per_chain_us);
    }
  }
  nlohmann::json report = {
      {"schema_version", 1},
      {"benchmark", "hmc_per_step_scaling"},
      {"config",
       {{"steps", config.steps},
        {"warmup", config.warmup},
        {"step_size", config.step_size},
        {"num_leapfrog", config.num_leapfrog},
        {"seed", config.seed}}},
      {"entries", entries}};
  try {
    write_json_file(config.report, report);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code::io_failure;
  }
  if (!config.quiet) std::printf("report: %s\n", config.report.c_str());
  return exit_code::ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"batched MCMC experiment harness"};
  app.require_subcommand(1);

  batchmc::RunConfig run_config;
  CLI::App* run_cmd = app.add_subcommand("run", "sample a built-in target and write a report");
  run_cmd->add_option("--target", run_config.target,
                      "std_normal | mvn_diag | correlated_gaussian | "
                      "ill_conditioned_gaussian | bimodal_mixture | coin_flip_posterior");
  run_cmd->add_option("--dim", run_config.dim, "event dimension (where applicable)");
  run_cmd->add_option("--rho", run_config.rho, "correlation for correlated_gaussian");
  run_cmd->add_option("--condition-number", run_config.condition_number,
                      "condition number for ill_conditioned_gaussian");
  run_cmd->add_option("--separation", run_config.separation,
                      "mode separation for bimodal_mixture");
  run_cmd->add_option("--heads", run_config.heads, "coin_flip_posterior heads");
  run_cmd->add_option("--flips", run_config.flips, "coin_flip_posterior flips");
  run_cmd->add_option("--loc", run_config.loc, "mvn_diag per-dimension locations")
      ->delimiter(',');
  run_cmd->add_option("--scale", run_config.scale, "mvn_diag per-dimension scales")
      ->delimiter(',');

  run_cmd->add_option("--kernel", run_config.kernel, "hmc | nuts | rwm | remc");
  run_cmd->add_option("--step-size", run_config.step_size,
                      "leapfrog step size (hmc/nuts) or proposal scale (rwm/remc)");
  run_cmd->add_option("--num-leapfrog", run_config.num_leapfrog, "hmc leapfrog steps");
  run_cmd->add_option("--max-tree-depth", run_config.max_tree_depth, "nuts depth cap");
  run_cmd->add_option("--max-energy-diff", run_config.max_energy_diff,
                      "nuts divergence threshold");
  run_cmd->add_option("--inverse-temperatures", run_config.inverse_temperatures,
                      "remc ladder, e.g. 1.0,0.5,0.25")
      ->delimiter(',');
  run_cmd->add_option("--transform", run_config.transform, "identity | exp | softplus");
  run_cmd->add_option("--adapt-step-size", run_config.adapt_step_size,
                      "number of step-size adaptation steps (0 = off)");
  run_cmd->add_option("--target-accept", run_config.target_accept,
                      "adaptation target acceptance probability");
  run_cmd->add_option("--adaptation-rate", run_config.adaptation_rate,
                      "adaptation log-step nudge per iteration");

  run_cmd->add_option("--num-chains", run_config.num_chains, "parallel chains");
  run_cmd->add_option("--num-results", run_config.num_results, "stored draws per chain");
  run_cmd->add_option("--num-burnin", run_config.num_burnin, "discarded warmup steps");
  run_cmd->add_option("--seed", run_config.seed, "root RNG seed");
  double init_value = 0.0;
  CLI::Option* init_opt =
      run_cmd->add_option("--init", init_value, "initial fill value for every chain");

  run_cmd->add_option("--output", run_config.output, "samples path (default samples.<format>)");
  run_cmd->add_option("--format", run_config.format, "csv | jsonl");
  run_cmd->add_option("--report", run_config.report,
                      "report path (default <output>.report.json)");
  run_cmd->add_option("--dtype", run_config.dtype, "f32 | f64");
  run_cmd->add_flag("--quiet", run_config.quiet, "suppress the summary");

  BenchConfig bench_config;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "HMC per-step wall time across chain counts");
  bench_cmd->add_option("--chains", bench_config.chain_counts, "chain counts to time")
      ->delimiter(',');
  bench_cmd->add_option("--steps", bench_config.steps, "timed steps per count");
  bench_cmd->add_option("--warmup", bench_config.warmup, "untimed warmup steps");
  bench_cmd->add_option("--step-size", bench_config.step_size, "hmc step size");
  bench_cmd->add_option("--num-leapfrog", bench_config.num_leapfrog, "hmc leapfrog steps");
  bench_cmd->add_option("--seed", bench_config.seed, "root RNG seed");
  bench_cmd->add_option("--report", bench_config.report, "report path");
  bench_cmd->add_flag("--quiet", bench_config.quiet, "suppress the table");

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) {
    if (init_opt->count() > 0) run_config.init = init_value;
    const batchmc::RunOutcome outcome = batchmc::run(run_config);
    if (outcome.code == batchmc::exit_code::ok) {
      if (!run_config.quiet) std::cout << outcome.message;
    } else {
      std::cerr << "error: " << outcome.message << '\n';
    }
    return outcome.code;
  }
  return run_bench(bench_config);
}
