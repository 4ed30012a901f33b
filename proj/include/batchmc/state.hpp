// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Chain state and the target-log-prob contract. A ChainState is an ordered
// list of parts, each [C, ...event] with a shared leading chain axis C. A
// Target wraps a batched TLP callable returning exactly [C]; gradients are
// analytic when supplied and central finite differences otherwise.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "batchmc/array.hpp"
#include "batchmc/errors.hpp"
#include "batchmc/random.hpp"

namespace batchmc {

template <typename S>
struct ChainState {
  std::vector<Array<S>> parts;

  ChainState() = default;
  explicit ChainState(std::vector<Array<S>> p) : parts(std::move(p)) {}
  static ChainState single(Array<S> part) { return ChainState({std::move(part)}); }

  Index num_parts() const { return static_cast<Index>(parts.size()); }
  Index num_chains() const { return parts.empty() ? 0 : parts.front().shape()[0]; }
};

template <typename S>
void validate_chain_state(const ChainState<S>& state) {
  if (state.parts.empty()) throw ArgumentError("chain state has no parts");
  for (const auto& part : state.parts) {
    if (part.rank() < 1) {
      throw ShapeError("chain state part must have a leading chain axis, got rank 0");
    }
  }
  const Index chains = state.num_chains();
  if (chains < 1) throw ArgumentError("chain state must carry at least one chain");
  for (const auto& part : state.parts) {
    if (part.shape()[0] != chains) {
      throw ShapeError("chain state parts disagree on chain extent: " +
                       std::to_string(part.shape()[0]) + " vs " + std::to_string(chains));
    }
  }
}

template <typename S>
void check_no_nan(const ChainState<S>& state) {
  for (const auto& part : state.parts) {
    if (any(isnan_mask(part))) throw ArgumentError("NaN in chain state");
  }
}

template <typename S>
Shape event_shape(const Array<S>& part) {
  return Shape(part.shape().begin() + 1, part.shape().end());
}

template <typename S>
bool states_bitwise_equal(const ChainState<S>& a, const ChainState<S>& b) {
  if (a.parts.size() != b.parts.size()) return false;
  for (std::size_t i = 0; i < a.parts.size(); ++i) {
    if (!bitwise_equal(a.parts[i], b.parts[i])) return false;
  }
  return true;
}

/// Per-part elementwise select with a [C] mask padded to each part's rank.
template <typename S>
std::vector<Array<S>> select_parts(const Mask& take, const std::vector<Array<S>>& on_true,
                                   const std::vector<Array<S>>& on_false) {
  std::vector<Array<S>> out;
  out.reserve(on_true.size());
  for (std::size_t p = 0; p < on_true.size(); ++p) {
    const Mask padded = left_justified_expand_dims_to_rank(take, on_true[p].rank());
    out.push_back(select(padded, on_true[p], on_false[p]));
  }
  return out;
}

template <typename S>
ChainState<S> select_state(const Mask& take, const ChainState<S>& on_true,
                           const ChainState<S>& on_false) {
  return ChainState<S>(select_parts(take, on_true.parts, on_false.parts));
}

/// Standard-normal draws matching the part shapes of `prototype`.
///
/// Key schedule (fixed, relied on by tests): part p of P uses
/// split(key, P)[p]; chain c of C uses split(part_key, C)[c]; row c is then
/// sample_standard_normal(chain_key, event_shape). Advancing one extracted
/// chain with its own substream therefore reproduces row c bitwise.
template <typename S>
std::vector<Array<S>> sample_state_standard_normal(const ChainState<S>& prototype,
                                                   const RngKey& key) {
  const Index num_parts = prototype.num_parts();
  const Index chains = prototype.num_chains();
  const std::vector<RngKey> part_keys = split(key, num_parts);
  std::vector<Array<S>> out;
  out.reserve(prototype.parts.size());
  for (Index p = 0; p < num_parts; ++p) {
    const auto& part = prototype.parts[static_cast<std::size_t>(p)];
    const Shape ev = event_shape(part);
    const std::vector<RngKey> chain_keys = split(part_keys[static_cast<std::size_t>(p)], chains);
    Array<S> draw(part.shape());
    for (Index c = 0; c < chains; ++c) {
      copy_into_leading_slice(
          draw, c, sample_standard_normal<S>(chain_keys[static_cast<std::size_t>(c)], ev));
    }
    out.push_back(std::move(draw));
  }
  return out;
}

template <typename S>
struct TlpAndGrads {
  Array<S> tlp;                  // [C]
  std::vector<Array<S>> grads;   // one per part, matching part shapes
};

/// The only model interface the library requires: a batched callable from
/// chain state to per-chain unnormalized log probability, plus an optional
/// fused TLP+gradient callable.
template <typename S>
struct Target {
  std::function<Array<S>(const ChainState<S>&)> log_prob;
  std::function<TlpAndGrads<S>(const ChainState<S>&)> log_prob_with_grads;  // optional
};

/// Evaluates the TLP and enforces batch semantics: output shape must be
/// exactly [C].
template <typename S>
Array<S> eval_tlp(const Target<S>& target, const ChainState<S>& state) {
  Array<S> tlp = target.log_prob(state);
  const Shape expected{state.num_chains()};
  if (tlp.shape() != expected) {
    throw ShapeError("target log prob returned shape " + shape_str(tlp.shape()) +
                     ", expected " + shape_str(expected) + " (batch semantics violation)");
  }
  return tlp;
}

namespace detail {

template <typename S>
TlpAndGrads<S> finite_difference_tlp_grads(const Target<S>& target, const ChainState<S>& state) {
  TlpAndGrads<S> out;
  out.tlp = eval_tlp(target, state);
  const S h0 = static_cast<S>(std::cbrt(static_cast<double>(std::numeric_limits<S>::epsilon())));
  for (std::size_t p = 0; p < state.parts.size(); ++p) {
    const auto& part = state.parts[p];
    const Index chains = part.shape()[0];
    const Index ev = chains == 0 ? 0 : part.size() / chains;
    Array<S> grad(part.shape());
    for (Index e = 0; e < ev; ++e) {
      ChainState<S> hi = state;
      ChainState<S> lo = state;
      Array<S> step(Shape{chains});
      for (Index c = 0; c < chains; ++c) {
        const S x = part[c * ev + e];
        const S mag = std::abs(x);
        const S h = h0 * (mag > S(1) ? mag : S(1));
        step[c] = h;
        hi.parts[p][c * ev + e] = x + h;
        lo.parts[p][c * ev + e] = x - h;
      }
      const Array<S> f_hi = eval_tlp(target, hi);
      const Array<S> f_lo = eval_tlp(target, lo);
      for (Index c = 0; c < chains; ++c) {
        grad[c * ev + e] = (f_hi[c] - f_lo[c]) / (S(2) * step[c]);
      }
    }
    out.grads.push_back(std::move(grad));
  }
  return out;
}

}  // namespace detail

/// TLP with gradients: analytic when the target provides them, otherwise
/// central finite differences with h = cbrt(eps) * max(1, |x|).
template <typename S>
TlpAndGrads<S> eval_tlp_with_grads(const Target<S>& target, const ChainState<S>& state) {
  if (target.log_prob_with_grads) {
    TlpAndGrads<S> out = target.log_prob_with_grads(state);
    const Shape expected{state.num_chains()};
    if (out.tlp.shape() != expected) {
      throw ShapeError("target log prob (grad path) returned shape " + shape_str(out.tlp.shape()) +
                       ", expected " + shape_str(expected));
    }
    if (out.grads.size() != state.parts.size()) {
      throw ShapeError("gradient part count " + std::to_string(out.grads.size()) +
                       " vs state part count " + std::to_string(state.parts.size()));
    }
    for (std::size_t p = 0; p < out.grads.size(); ++p) {
      if (out.grads[p].shape() != state.parts[p].shape()) {
        throw ShapeError("gradient shape " + shape_str(out.grads[p].shape()) +
                         " vs part shape " + shape_str(state.parts[p].shape()));
      }
    }
    return out;
  }
  return detail::finite_difference_tlp_grads(target, state);
}

}  // namespace batchmc
