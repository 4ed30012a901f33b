// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// The experiment harness behind the CLI: resolves a built-in target,
// validates its batch semantics, assembles the requested kernel stack
// (base sampler, optional bijector transform, optional step-size
// adaptation), runs sample_chain, computes diagnostics and moment errors,
// and writes the samples file plus a JSON report. Every failure mode maps
// to a distinct exit code.

#pragma once

#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "batchmc/adaptation.hpp"
#include "batchmc/diagnostics.hpp"
#include "batchmc/driver.hpp"
#include "batchmc/hmc.hpp"
#include "batchmc/io.hpp"
#include "batchmc/metropolis.hpp"
#include "batchmc/nuts.hpp"
#include "batchmc/replica_exchange.hpp"
#include "batchmc/targets.hpp"
#include "batchmc/transformed.hpp"
#include "batchmc/validate.hpp"

namespace batchmc {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int unknown_target = 2;
inline constexpr int unknown_kernel = 3;
inline constexpr int invalid_config = 4;
inline constexpr int io_failure = 5;
inline constexpr int batch_semantics = 6;
inline constexpr int contract_violation = 7;
}  // namespace exit_code

struct RunConfig {
  // target
  std::string target = "std_normal";
  Index dim = 1;
  double rho = 0.9;                    // correlated_gaussian
  double condition_number = 100.0;     // ill_conditioned_gaussian
  double separation = 8.0;             // bimodal_mixture
  Index heads = 7;                     // coin_flip_posterior
  Index flips = 10;
  std::vector<double> loc;             // mvn_diag (defaults to zeros)
  std::vector<double> scale;           // mvn_diag (defaults to ones)

  // kernel stack
  std::string kernel = "hmc";          // hmc | nuts | rwm | remc
  double step_size = 0.1;
  Index num_leapfrog = 3;
  Index max_tree_depth = 10;
  double max_energy_diff = 1000.0;
  std::vector<double> inverse_temperatures;  // remc; defaults to {1, .5, .25, .1}
  std::string transform = "identity";  // identity | exp | softplus
  Index adapt_step_size = 0;           // adaptation steps; 0 disables
  double target_accept = 0.75;
  double adaptation_rate = 0.01;

  // run
  Index num_chains = 16;
  Index num_results = 1000;
  Index num_burnin = 100;
  std::uint64_t seed = 0;
  std::optional<double> init;          // initial fill; target default otherwise

  // output
  std::string output;                  // default samples.<format>
  std::string format = "csv";
  std::string report;                  // default <output>.report.json
  std::string dtype = "f64";           // f32 | f64
  bool quiet = false;
};

struct RunOutcome {
  int code = exit_code::ok;
  std::string message;
  nlohmann::json report;
};

namespace detail {

template <typename S>
BuiltinTarget<S> resolve_target(const RunConfig& config) {
  if (config.target == "std_normal") return make_std_normal<S>(config.dim);
  if (config.target == "mvn_diag") {
    std::vector<S> loc(config.loc.begin(), config.loc.end());
    std::vector<S> scale(config.scale.begin(), config.scale.end());
    if (loc.empty()) loc.assign(static_cast<std::size_t>(config.dim), S(0));
    if (scale.empty()) scale.assign(static_cast<std::size_t>(config.dim), S(1));
    return make_mvn_diag<S>(std::move(loc), std::move(scale));
  }
  if (config.target == "correlated_gaussian") {
    return make_correlated_gaussian<S>(static_cast<S>(config.rho));
  }
  if (config.target == "ill_conditioned_gaussian") {
    return make_ill_conditioned_gaussian<S>(static_cast<S>(config.condition_number),
                                            std::max<Index>(config.dim, 2));
  }
  if (config.target == "bimodal_mixture") {
    return make_bimodal_mixture<S>(static_cast<S>(config.separation), config.dim);
  }
  if (config.target == "coin_flip_posterior") {
    return make_coin_flip_posterior<S>(config.heads, config.flips);
  }
  throw Error("unknown target '" + config.target + "'");
}

template <typename S>
KernelPtr<S> build_base_kernel(const RunConfig& config, const Target<S>& target,
                               const std::vector<Array<S>>& step_size) {
  if (config.kernel == "rwm") {
    return random_walk_metropolis_kernel<S>(target, step_size);
  }
  if (config.kernel == "hmc") {
    return hmc_kernel<S>(target, HmcConfig<S>{step_size, config.num_leapfrog});
  }
  if (config.kernel == "nuts") {
    NutsConfig<S> nuts{step_size, config.max_tree_depth,
                       static_cast<S>(config.max_energy_diff)};
    return nuts_kernel<S>(target, std::move(nuts));
  }
  if (config.kernel == "remc") {
    std::vector<double> betas = config.inverse_temperatures;
    if (betas.empty()) betas = {1.0, 0.5, 0.25, 0.1};
    Array<S> beta_arr(Shape{static_cast<Index>(betas.size())});
    for (std::size_t k = 0; k < betas.size(); ++k) beta_arr[static_cast<Index>(k)] =
        static_cast<S>(betas[k]);
    RemcConfig<S> remc;
    remc.inverse_temperatures = std::move(beta_arr);
    remc.inner_kernel_factory = [step_size](const Target<S>& scaled) {
      return random_walk_metropolis_kernel<S>(scaled, step_size);
    };
    return replica_exchange_kernel<S>(target, std::move(remc));
  }
  throw Error("unknown kernel '" + config.kernel + "'");
}

template <typename S>
BijectorPtr<S> resolve_bijector(const std::string& name) {
  if (name == "identity") return identity_bijector<S>();
  if (name == "exp") return exp_bijector<S>();
  if (name == "softplus") return softplus_bijector<S>();
  throw ConfigError("unknown transform '" + name + "' (expected identity, exp, or softplus)");
}

/// Path of the per-chain log acceptance ratio in the assembled stack's
/// results (below the adaptation wrapper).
inline std::string accept_ratio_path(const RunConfig& config) {
  std::string path;
  if (config.transform != "identity") path += "inner_results/";
  if (config.kernel == "remc") path += "inner_results/";
  return path + "log_accept_ratio";
}

template <typename S>
KernelPtr<S> build_kernel_stack(const RunConfig& config, const BuiltinTarget<S>& target) {
  auto with_step = [&config, &target](const std::vector<Array<S>>& eps) -> KernelPtr<S> {
    if (config.transform != "identity") {
      auto bijector = resolve_bijector<S>(config.transform);
      return transformed_kernel<S>(target.target, std::move(bijector),
                                   [&config, &eps](const Target<S>& pulled) {
                                     return build_base_kernel<S>(config, pulled, eps);
                                   });
    }
    return build_base_kernel<S>(config, target.target, eps);
  };
  const std::vector<Array<S>> initial_step{Array<S>::scalar(static_cast<S>(config.step_size))};
  if (config.adapt_step_size > 0) {
    StepSizeAdaptationConfig<S> adapt;
    adapt.target_accept_prob = static_cast<S>(config.target_accept);
    adapt.adaptation_rate = static_cast<S>(config.adaptation_rate);
    adapt.num_adaptation_steps = config.adapt_step_size;
    adapt.log_accept_ratio_path = accept_ratio_path(config);
    return std::make_shared<SimpleStepSizeAdaptation<S>>(with_step, initial_step,
                                                         std::move(adapt));
  }
  return with_step(initial_step);
}

inline nlohmann::json semantics_to_json(const BatchSemanticsReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& check : report.checks) {
    checks.push_back({{"name", check.name}, {"passed", check.passed}, {"detail", check.detail}});
  }
  return {{"passed", report.passed}, {"checks", checks}};
}

template <typename S>
RunOutcome run_typed(const RunConfig& config) {
  using clock = std::chrono::steady_clock;
  RunOutcome outcome;
  nlohmann::json& report = outcome.report;
  report["schema_version"] = 1;

  // --- target -------------------------------------------------------------
  BuiltinTarget<S> target;
  try {
    target = resolve_target<S>(config);
  } catch (const ConfigError& e) {
    outcome.code = exit_code::invalid_config;
    outcome.message = e.what();
    return outcome;
  } catch (const Error& e) {
    outcome.code = exit_code::unknown_target;
    outcome.message = e.what();
    return outcome;
  }

  report["config"] = {{"target", config.target},
                      {"dim", config.dim},
                      {"kernel", config.kernel},
                      {"transform", config.transform},
                      {"step_size", config.step_size},
                      {"num_leapfrog", config.num_leapfrog},
                      {"max_tree_depth", config.max_tree_depth},
                      {"adapt_step_size", config.adapt_step_size},
                      {"num_chains", config.num_chains},
                      {"num_results", config.num_results},
                      {"num_burnin", config.num_burnin},
                      {"seed", config.seed},
                      {"dtype", config.dtype},
                      {"format", config.format}};

  // --- batch-semantics validation ------------------------------------------
  const BatchSemanticsReport semantics =
      validate_batch_semantics<S>(target.target.log_prob, target.event_shapes,
                                  static_cast<S>(sizeof(S) == 8 ? 1e-12 : 1e-4));
  report["batch_semantics"] = semantics_to_json(semantics);
  if (!semantics.passed) {
    outcome.code = exit_code::batch_semantics;
    outcome.message = "target failed batch-semantics validation:\n" + semantics.summary();
    return outcome;
  }

  // --- kernel stack ---------------------------------------------------------
  KernelPtr<S> kernel;
  try {
    kernel = build_kernel_stack<S>(config, target);
  } catch (const ConfigError& e) {
    outcome.code = exit_code::invalid_config;
    outcome.message = e.what();
    return outcome;
  } catch (const ArgumentError& e) {
    outcome.code = exit_code::invalid_config;
    outcome.message = e.what();
    return outcome;
  } catch (const Error& e) {
    outcome.code = exit_code::unknown_kernel;
    outcome.message = e.what();
    return outcome;
  }

  if (config.num_chains < 1 || config.num_results < 0 || config.num_burnin < 0) {
    outcome.code = exit_code::invalid_config;
    outcome.message = "num_chains must be >= 1 and step counts nonnegative";
    return outcome;
  }

  // --- sampling ---------------------------------------------------------------
  ChainState<S> state =
      initial_state(target, config.num_chains,
                    config.init ? std::optional<S>(static_cast<S>(*config.init)) : std::nullopt);
  const RngKey key = make_key(config.seed);

  double accept_sum = 0.0;
  double accept_count = 0.0;
  double swap_accept_sum = 0.0;
  double swap_count = 0.0;
  const std::string accept_path = [&]() -> std::string {
    std::string path = config.adapt_step_size > 0 ? "inner_results/" : "";
    return path + accept_ratio_path(config);
  }();
  TraceFn<S> stats_trace = [&](const ChainState<S>&, const Results<S>& results) {
    try {
      const Array<S>& lar = results.template leaf_at<S>(accept_path);
      const Array<S> prob = select(isnan_mask(lar), Array<S>(lar.shape()),
                                   exp(minimum(lar, S(0))));
      accept_sum += static_cast<double>(sum_all(prob));
      accept_count += static_cast<double>(prob.size());
    } catch (const ContractError&) {
    }
    if (config.kernel == "remc") {
      try {
        std::string base = config.adapt_step_size > 0 ? "inner_results/" : "";
        if (config.transform != "identity") base += "inner_results/";
        const Mask& proposed = results.mask_at(base + "is_swap_proposed");
        const Mask& accepted = results.mask_at(base + "is_swap_accepted");
        swap_accept_sum += static_cast<double>(sum_all(cast<double>(accepted)));
        swap_count += static_cast<double>(sum_all(cast<double>(proposed)));
      } catch (const ContractError&) {
      }
    }
    return Results<S>::record({});
  };

  SampleChainResult<S> chain_result;
  double bootstrap_seconds = 0.0;
  double burnin_seconds = 0.0;
  double sampling_seconds = 0.0;
  try {
    const auto t0 = clock::now();
    Results<S> results0 = kernel->bootstrap_results(state);
    const auto t1 = clock::now();

    SampleChainOptions<S> burnin;
    burnin.kernel = kernel;
    burnin.current_state = state;
    burnin.num_burnin_steps = config.num_burnin;
    burnin.num_results = 0;
    burnin.key = key;
    burnin.initial_kernel_results = std::move(results0);
    burnin.first_step_index = 0;
    auto after_burnin = sample_chain(burnin);
    const auto t2 = clock::now();

    SampleChainOptions<S> sampling;
    sampling.kernel = kernel;
    sampling.current_state = after_burnin.final_state;
    sampling.num_results = config.num_results;
    sampling.key = key;
    sampling.trace_fn = stats_trace;
    sampling.initial_kernel_results = std::move(after_burnin.final_kernel_results);
    sampling.first_step_index = after_burnin.next_step_index;
    chain_result = sample_chain(sampling);
    const auto t3 = clock::now();

    bootstrap_seconds = std::chrono::duration<double>(t1 - t0).count();
    burnin_seconds = std::chrono::duration<double>(t2 - t1).count();
    sampling_seconds = std::chrono::duration<double>(t3 - t2).count();
  } catch (const ContractError& e) {
    outcome.code = exit_code::contract_violation;
    outcome.message = e.what();
    return outcome;
  } catch (const Error& e) {
    outcome.code = exit_code::invalid_config;
    outcome.message = e.what();
    return outcome;
  }

  const double total_steps = static_cast<double>(config.num_burnin + config.num_results);
  report["timings"] = {
      {"bootstrap_seconds", bootstrap_seconds},
      {"burnin_seconds", burnin_seconds},
      {"sampling_seconds", sampling_seconds},
      {"total_seconds", bootstrap_seconds + burnin_seconds + sampling_seconds},
      {"num_chains", config.num_chains},
      {"num_steps", total_steps},
      {"per_step_microseconds",
       total_steps > 0 ? (burnin_seconds + sampling_seconds) / total_steps * 1e6 : 0.0},
      {"per_chain_step_microseconds",
       total_steps > 0 ? (burnin_seconds + sampling_seconds) / total_steps /
                             static_cast<double>(config.num_chains) * 1e6
                       : 0.0}};

  nlohmann::json acceptance;
  acceptance["mean_accept_prob"] =
      accept_count > 0 ? nlohmann::json(accept_sum / accept_count) : nlohmann::json();
  if (config.kernel == "remc") {
    acceptance["mean_swap_accept_rate"] =
        swap_count > 0 ? nlohmann::json(swap_accept_sum / swap_count) : nlohmann::json();
  }
  report["acceptance"] = std::move(acceptance);

  // --- diagnostics and moment errors ---------------------------------------
  nlohmann::json parts = nlohmann::json::array();
  nlohmann::json moment_rows = nlohmann::json::array();
  for (std::size_t p = 0; p < chain_result.samples.size(); ++p) {
    const std::string part_name = chain_result.samples.size() == 1
                                      ? std::string("x")
                                      : "x" + std::to_string(p);
    nlohmann::json entry;
    entry["name"] = part_name;
    if (config.num_results >= 4) {
      const auto psrf = potential_scale_reduction(chain_result.samples[p]);
      const auto ess = effective_sample_size(chain_result.samples[p]);
      const auto moments = pooled_moments(chain_result.samples[p]);
      entry["r_hat"] = detail::array_to_json(psrf.r_hat);
      entry["ess"] = detail::array_to_json(ess.ess);
      entry["degenerate"] = any(psrf.degenerate) || any(ess.degenerate);
      entry["super_efficient"] = any(ess.super_efficient);
      entry["pooled_mean"] = detail::array_to_json(moments.mean);
      entry["pooled_variance"] = detail::array_to_json(moments.variance);

      if (p < target.analytic_mean.size() && target.analytic_mean[p].size() > 0 &&
          config.transform == "identity") {
        for (Index e = 0; e < moments.mean.size(); ++e) {
          moment_rows.push_back(
              {{"part", part_name},
               {"element", e},
               {"sample_mean", moments.mean[e]},
               {"analytic_mean", target.analytic_mean[p][e]},
               {"mean_abs_error", std::abs(moments.mean[e] - target.analytic_mean[p][e])},
               {"sample_variance", moments.variance[e]},
               {"analytic_variance", target.analytic_variance[p][e]},
               {"variance_rel_error",
                target.analytic_variance[p][e] != 0.0
                    ? std::abs(moments.variance[e] - target.analytic_variance[p][e]) /
                          target.analytic_variance[p][e]
                    : 0.0}});
        }
      }
    }
    parts.push_back(std::move(entry));
  }
  report["diagnostics"] = std::move(parts);
  report["moments"] = std::move(moment_rows);

  // --- outputs ------------------------------------------------------------------
  SampleFormat format;
  try {
    format = parse_sample_format(config.format);
  } catch (const ConfigError& e) {
    outcome.code = exit_code::invalid_config;
    outcome.message = e.what();
    return outcome;
  }
  const std::string samples_path =
      config.output.empty() ? std::string("samples.") + sample_format_name(format)
                            : config.output;
  const std::string report_path =
      config.report.empty() ? samples_path + ".report.json" : config.report;
  std::vector<std::string> names;
  for (std::size_t p = 0; p < chain_result.samples.size(); ++p) {
    names.push_back(chain_result.samples.size() == 1 ? std::string("x")
                                                     : "x" + std::to_string(p));
  }
  report["outputs"] = {{"samples_path", samples_path},
                       {"format", sample_format_name(format)},
                       {"report_path", report_path}};
  try {
    write_samples(chain_result.samples, names, Results<S>::record({}), samples_path, format);
    write_json_file(report_path, report);
  } catch (const IoError& e) {
    outcome.code = exit_code::io_failure;
    outcome.message = e.what();
    return outcome;
  }

  if (!config.quiet) {
    std::ostringstream os;
    os << "target=" << config.target << " kernel=" << config.kernel
       << " chains=" << config.num_chains << " draws=" << config.num_results
       << " burnin=" << config.num_burnin << " seed=" << config.seed << '\n';
    if (report["acceptance"]["mean_accept_prob"].is_number()) {
      os << "mean accept prob: " << report["acceptance"]["mean_accept_prob"].get<double>()
         << '\n';
    }
    for (const auto& entry : report["diagnostics"]) {
      if (entry.contains("r_hat")) {
        os << entry["name"].get<std::string>() << ": r_hat=" << entry["r_hat"].dump()
           << " ess=" << entry["ess"].dump() << '\n';
      }
    }
    os << "samples: " << samples_path << "\nreport:  " << report_path << '\n';
    outcome.message = os.str();
  }
  return outcome;
}

}  // namespace detail

inline RunOutcome run(const RunConfig& config) {
  if (config.dtype == "f64") return detail::run_typed<double>(config);
  if (config.dtype == "f32") return detail::run_typed<float>(config);
  RunOutcome outcome;
  outcome.code = exit_code::invalid_config;
  outcome.message = "unknown dtype '" + config.dtype + "' (expected f32 or f64)";
  return outcome;
}

}  // namespace batchmc
