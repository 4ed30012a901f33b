// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared test fixtures: trivial kernels, call-counting wrappers, and the
// generic contract suite every shipped kernel must pass.

#pragma once

#include <doctest.h>

#include <atomic>
#include <memory>
#include <utility>

#include "batchmc/kernel.hpp"

namespace batchmc::testing {

/// Kernel that never moves: bootstrap yields an empty record.
template <typename S>
class IdentityKernel : public TransitionKernel<S> {
 public:
  bool is_calibrated() const override { return true; }
  Results<S> bootstrap_results(const ChainState<S>&) const override {
    return Results<S>::record({});
  }
  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state, const Results<S>&,
                                                const RngKey&) const override {
    return {state, Results<S>::record({})};
  }
};

/// Adds 1.0 to every element each step; results carry a step counter.
template <typename S>
class CountingKernel : public TransitionKernel<S> {
 public:
  bool is_calibrated() const override { return true; }
  Results<S> bootstrap_results(const ChainState<S>&) const override {
    return Results<S>::record(
        {{"steps", Results<S>::leaf(Array<std::int64_t>(Shape{}, 0))}});
  }
  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                const Results<S>& results,
                                                const RngKey&) const override {
    ChainState<S> next = state;
    for (auto& part : next.parts) part = part + S(1);
    const auto steps = results.template leaf_at<std::int64_t>("steps")[0];
    return {std::move(next),
            Results<S>::record(
                {{"steps", Results<S>::leaf(Array<std::int64_t>(Shape{}, steps + 1))}})};
  }
};

/// Forwards to an inner kernel while counting invocations.
template <typename S>
class InstrumentedKernel : public TransitionKernel<S> {
 public:
  explicit InstrumentedKernel(KernelPtr<S> inner) : inner_(std::move(inner)) {}
  bool is_calibrated() const override { return inner_->is_calibrated(); }
  Results<S> bootstrap_results(const ChainState<S>& state) const override {
    ++bootstrap_calls;
    return inner_->bootstrap_results(state);
  }
  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                const Results<S>& results,
                                                const RngKey& key) const override {
    ++one_step_calls;
    return inner_->one_step(state, results, key);
  }
  mutable std::atomic<int> bootstrap_calls{0};
  mutable std::atomic<int> one_step_calls{0};

 private:
  KernelPtr<S> inner_;
};

/// Wraps a target so every TLP (and gradient) evaluation is counted.
template <typename S>
struct CountedTarget {
  explicit CountedTarget(Target<S> base) : calls(std::make_shared<std::atomic<long>>(0)) {
    auto counter = calls;
    if (base.log_prob) {
      auto fn = base.log_prob;
      target.log_prob = [counter, fn](const ChainState<S>& s) {
        ++*counter;
        return fn(s);
      };
    }
    if (base.log_prob_with_grads) {
      auto fn = base.log_prob_with_grads;
      target.log_prob_with_grads = [counter, fn](const ChainState<S>& s) {
        ++*counter;
        return fn(s);
      };
    }
  }
  Target<S> target;
  std::shared_ptr<std::atomic<long>> calls;
};

/// Generic contract checks every shipped kernel and wrapper nesting must
/// satisfy: bootstrap/one_step structural match, purity, shape and
/// chain-extent preservation.
template <typename S>
void check_kernel_contract(const TransitionKernel<S>& kernel, const ChainState<S>& state,
                           const RngKey& key, int steps = 3) {
  const Results<S> boot = kernel.bootstrap_results(state);

  // Structure/dtype match between bootstrap_results and one_step output.
  auto [state1, results1] = kernel.one_step(state, boot, key);
  const auto mismatch = structure_mismatch(boot, results1);
  CHECK_MESSAGE(!mismatch.has_value(), "structure mismatch: ", mismatch.value_or(""));

  // Purity: identical (state, results, key) gives bitwise-identical output.
  auto [state1b, results1b] = kernel.one_step(state, boot, key);
  CHECK(states_bitwise_equal(state1, state1b));
  CHECK(results_bitwise_equal(results1, results1b));

  // Bootstrap is pure as well.
  CHECK(results_bitwise_equal(boot, kernel.bootstrap_results(state)));

  // Shape and chain-extent preservation across several chained steps.
  ChainState<S> current = state;
  Results<S> results = boot;
  RngKey step_key = key;
  for (int i = 0; i < steps; ++i) {
    step_key = fold_in(step_key, static_cast<std::uint64_t>(i) + 1);
    auto [next_state, next_results] = kernel.one_step(current, results, step_key);
    REQUIRE(next_state.parts.size() == current.parts.size());
    for (std::size_t p = 0; p < next_state.parts.size(); ++p) {
      CHECK(next_state.parts[p].shape() == current.parts[p].shape());
    }
    CHECK(next_state.num_chains() == state.num_chains());
    const auto step_mismatch = structure_mismatch(results, next_results);
    CHECK_MESSAGE(!step_mismatch.has_value(), "structure drift: ", step_mismatch.value_or(""));
    current = std::move(next_state);
    results = std::move(next_results);
  }
}

}  // namespace batchmc::testing
