// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// The sample_chain driver: bootstrap once, run burnin without storing,
// then run the sampling phase storing every state (and optional trace) into
// preallocated buffers. Per-iteration keys are fold_in(key, global step
// index), so a run can be split at any point and resumed bitwise by
// carrying (final state, final kernel results, next step index) forward.

#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "batchmc/kernel.hpp"

namespace batchmc {

template <typename S>
using TraceFn = std::function<Results<S>(const ChainState<S>&, const Results<S>&)>;

template <typename S>
struct SampleChainOptions {
  KernelPtr<S> kernel;
  ChainState<S> current_state;
  Index num_results = 0;
  Index num_burnin_steps = 0;
  TraceFn<S> trace_fn;  // optional; receives the post-step (state, results)
  RngKey key;
  /// Continuation support: kernel results to resume from (skips bootstrap)
  /// and the global index of the first step taken by this call.
  std::optional<Results<S>> initial_kernel_results;
  Index first_step_index = 0;
};

template <typename S>
struct SampleChainResult {
  /// Per state part: [num_results, C, ...event], draws stacked on a new
  /// leading axis.
  std::vector<Array<S>> samples;
  /// Tree mirroring trace_fn output, each leaf stacked to [num_results, ...].
  Results<S> trace;
  Results<S> final_kernel_results;
  ChainState<S> final_state;
  /// Pass as first_step_index (with final state/results) to continue the run.
  Index next_step_index = 0;
};

namespace detail {

template <typename S>
Results<S> preallocate_trace(const Results<S>& first, Index num_results) {
  switch (first.kind()) {
    case Results<S>::Kind::record: {
      std::vector<std::pair<std::string, Results<S>>> fields;
      for (const auto& [name, child] : first.fields()) {
        fields.emplace_back(name, preallocate_trace(child, num_results));
      }
      return Results<S>::record(std::move(fields));
    }
    case Results<S>::Kind::list: {
      std::vector<Results<S>> items;
      for (const auto& child : first.items()) {
        items.push_back(preallocate_trace(child, num_results));
      }
      return Results<S>::list(std::move(items));
    }
    case Results<S>::Kind::leaf:
      return std::visit(
          [&](const auto& leaf) {
            using LeafArray = std::decay_t<decltype(leaf)>;
            Shape shape{num_results};
            shape.insert(shape.end(), leaf.shape().begin(), leaf.shape().end());
            return Results<S>::leaf(LeafArray(shape));
          },
          first.value());
  }
  throw ContractError("preallocate_trace: unreachable");
}

template <typename S>
void store_trace(Results<S>& storage, const Results<S>& value, Index index) {
  switch (storage.kind()) {
    case Results<S>::Kind::record:
      for (std::size_t i = 0; i < storage.fields().size(); ++i) {
        store_trace(storage.mutable_fields()[i].second, value.fields()[i].second, index);
      }
      return;
    case Results<S>::Kind::list:
      for (std::size_t i = 0; i < storage.items().size(); ++i) {
        store_trace(storage.items()[i], value.items()[i], index);
      }
      return;
    case Results<S>::Kind::leaf:
      std::visit(
          [&](auto& dst) {
            using LeafArray = std::decay_t<decltype(dst)>;
            copy_into_leading_slice(dst, index, std::get<LeafArray>(value.value()));
          },
          storage.value());
      return;
  }
}

}  // namespace detail

template <typename S>
SampleChainResult<S> sample_chain(const SampleChainOptions<S>& options) {
  if (!options.kernel) throw ArgumentError("sample_chain: missing kernel");
  if (!options.kernel->is_calibrated()) {
    throw ArgumentError(
        "sample_chain: kernel is not calibrated; wrap it (e.g. in MetropolisHastings) first");
  }
  if (options.num_results < 0 || options.num_burnin_steps < 0) {
    throw ArgumentError("sample_chain: negative step counts");
  }
  validate_chain_state(options.current_state);

  ChainState<S> state = options.current_state;
  Results<S> results = options.initial_kernel_results
                           ? *options.initial_kernel_results
                           : options.kernel->bootstrap_results(state);

  SampleChainResult<S> out;
  out.samples.reserve(state.parts.size());
  for (const auto& part : state.parts) {
    Shape shape{options.num_results};
    shape.insert(shape.end(), part.shape().begin(), part.shape().end());
    out.samples.push_back(Array<S>(shape));
  }

  bool trace_initialized = false;
  Index step_index = options.first_step_index;
  const Index total_steps = options.num_burnin_steps + options.num_results;
  for (Index step = 0; step < total_steps; ++step, ++step_index) {
    const RngKey step_key = fold_in(options.key, static_cast<std::uint64_t>(step_index));
    auto [next_state, next_results] = options.kernel->one_step(state, results, step_key);
    state = std::move(next_state);
    results = std::move(next_results);

    const Index draw = step - options.num_burnin_steps;
    if (draw < 0) continue;
    for (std::size_t p = 0; p < state.parts.size(); ++p) {
      copy_into_leading_slice(out.samples[p], draw, state.parts[p]);
    }
    if (options.trace_fn) {
      Results<S> traced = options.trace_fn(state, results);
      if (!trace_initialized) {
        out.trace = detail::preallocate_trace(traced, options.num_results);
        trace_initialized = true;
      } else if (auto mismatch = structure_mismatch(out.trace, traced)) {
        throw ContractError("sample_chain: trace_fn output structure changed at " + *mismatch);
      }
      detail::store_trace(out.trace, traced, draw);
    }
  }

  out.final_kernel_results = std::move(results);
  out.final_state = std::move(state);
  out.next_step_index = step_index;
  return out;
}

}  // namespace batchmc
