// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Simple multiplicative step-size adaptation for warmup. The wrapper keeps
// the current step size and a step counter in its results; each step it
// rebuilds the (immutable) inner kernel from a factory at the current step
// size, delegates, reads the per-chain log acceptance ratio from a declared
// path in the inner results, and nudges the step size up or down by a fixed
// log factor depending on whether the cross-chain mean acceptance
// probability is above or below the target. After num_adaptation_steps the
// step size is frozen bitwise.

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "batchmc/kernel.hpp"

namespace batchmc {

template <typename S>
struct StepSizeAdaptationConfig {
  S target_accept_prob = S(0.75);
  S adaptation_rate = S(0.01);
  Index num_adaptation_steps = 0;
  /// Inner-results path of the per-chain log acceptance ratio (or an
  /// acceptance-statistic analog, as NUTS emits).
  std::string log_accept_ratio_path = "log_accept_ratio";
};

template <typename S>
class SimpleStepSizeAdaptation : public TransitionKernel<S> {
 public:
  using StepSizeFactory = std::function<KernelPtr<S>(const std::vector<Array<S>>&)>;

  SimpleStepSizeAdaptation(StepSizeFactory factory, std::vector<Array<S>> initial_step_size,
                           StepSizeAdaptationConfig<S> config)
      : factory_(std::move(factory)),
        initial_step_size_(std::move(initial_step_size)),
        config_(std::move(config)) {
    if (!factory_) throw ArgumentError("step size adaptation: missing kernel factory");
    if (initial_step_size_.empty()) {
      throw ArgumentError("step size adaptation: empty initial step size");
    }
    if (!(config_.target_accept_prob > S(0) && config_.target_accept_prob < S(1))) {
      throw ArgumentError("step size adaptation: target_accept_prob must lie in (0, 1)");
    }
    if (config_.num_adaptation_steps < 0) {
      throw ArgumentError("step size adaptation: negative num_adaptation_steps");
    }
    probe_ = factory_(initial_step_size_);
    if (!probe_) throw ArgumentError("step size adaptation: factory returned null");
  }

  bool is_calibrated() const override { return probe_->is_calibrated(); }

  Results<S> bootstrap_results(const ChainState<S>& state) const override {
    return Results<S>::record({
        {"inner_results", probe_->bootstrap_results(state)},
        {"step_size", Results<S>::leaf_list(initial_step_size_)},
        {"num_steps", Results<S>::leaf(Array<std::int64_t>(Shape{}, 0))},
    });
  }

  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                const Results<S>& results,
                                                const RngKey& key) const override {
    std::vector<Array<S>> step_size;
    for (const auto& item : results.at("step_size").items()) {
      step_size.push_back(item.template leaf_as<S>());
    }
    const KernelPtr<S> kernel = factory_(step_size);
    auto [next_state, inner_next] = kernel->one_step(state, results.at("inner_results"), key);

    const std::int64_t step = results.template leaf_at<std::int64_t>("num_steps")[0];
    if (step < config_.num_adaptation_steps) {
      const Array<S>& log_accept =
          inner_next.template leaf_at<S>(config_.log_accept_ratio_path);
      // Mean per-chain acceptance probability; NaN chains (stuck at -inf
      // targets) count as zero.
      const Array<S> prob = select(isnan_mask(log_accept),
                                   Array<S>(log_accept.shape()),
                                   exp(minimum(log_accept, S(0))));
      const S mean_accept = mean_all(prob);
      const S factor = mean_accept > config_.target_accept_prob
                           ? std::exp(config_.adaptation_rate)
                           : std::exp(-config_.adaptation_rate);
      for (auto& eps : step_size) eps = eps * factor;
    }

    Results<S> out = Results<S>::record({
        {"inner_results", std::move(inner_next)},
        {"step_size", Results<S>::leaf_list(step_size)},
        {"num_steps", Results<S>::leaf(Array<std::int64_t>(Shape{}, step + 1))},
    });
    return {std::move(next_state), std::move(out)};
  }

 private:
  StepSizeFactory factory_;
  std::vector<Array<S>> initial_step_size_;
  StepSizeAdaptationConfig<S> config_;
  KernelPtr<S> probe_;  // kernel at the initial step size (bootstrap, calibration)
};

template <typename S>
KernelPtr<S> step_size_adaptation_kernel(
    typename SimpleStepSizeAdaptation<S>::StepSizeFactory factory, S initial_step_size,
    StepSizeAdaptationConfig<S> config) {
  return std::make_shared<SimpleStepSizeAdaptation<S>>(
      std::move(factory), std::vector<Array<S>>{Array<S>::scalar(initial_step_size)},
      std::move(config));
}

}  // namespace batchmc
