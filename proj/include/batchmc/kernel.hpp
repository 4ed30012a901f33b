// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// The transition-kernel contract. Kernels are immutable values; all mutable
// state rides in the (chain state, kernel results) pair threaded through
// one_step. bootstrap_results and one_step must produce structurally
// identical results trees, and one_step is a pure function of
// (state, results, key). Composition happens by nesting kernels.

#pragma once

#include <memory>
#include <utility>

#include "batchmc/random.hpp"
#include "batchmc/results.hpp"
#include "batchmc/state.hpp"

namespace batchmc {

template <typename S>
class TransitionKernel {
 public:
  virtual ~TransitionKernel() = default;

  /// True iff the kernel's stationary distribution is the target TLP.
  /// Uncalibrated kernels must be wrapped (e.g. by MetropolisHastings)
  /// before use in a driver.
  virtual bool is_calibrated() const = 0;

  /// Kernel-specific side state for `state` (cached TLP, gradients, ...).
  /// Calling one_step with this output is always valid.
  virtual Results<S> bootstrap_results(const ChainState<S>& state) const = 0;

  /// Advances every chain by one transition. The new state preserves part
  /// count, shapes, and the chain extent; the new results tree is
  /// structurally identical to the input tree.
  virtual std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                        const Results<S>& results,
                                                        const RngKey& key) const = 0;
};

template <typename S>
using KernelPtr = std::shared_ptr<const TransitionKernel<S>>;

}  // namespace batchmc
