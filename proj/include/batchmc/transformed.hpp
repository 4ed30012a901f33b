// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// TransformedTransitionKernel: runs an inner kernel in an unconstrained
// space y while reporting the constrained state x = forward(y). The inner
// kernel targets the pullback density
//   f(y) = tlp(forward(y)) + forward_log_det_jacobian(y),
// whose Jacobian term is what keeps the pushed-forward samples distributed
// as the original target.

#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "batchmc/bijectors.hpp"
#include "batchmc/kernel.hpp"

namespace batchmc {

/// The pullback target f(y) = tlp(forward(y)) + sum_p fldj_p(y_p), with
/// analytic gradients via the chain rule whenever the base target has them.
/// `include_jacobian` exists so tests can verify the term is load-bearing.
template <typename S>
Target<S> pullback_target(const Target<S>& base, std::vector<BijectorPtr<S>> bijectors,
                          bool include_jacobian = true) {
  for (const auto& b : bijectors) {
    if (!b) throw ArgumentError("pullback_target: null bijector");
  }
  auto forward_state = [bijectors](const ChainState<S>& y) {
    ChainState<S> x;
    for (std::size_t p = 0; p < y.parts.size(); ++p) {
      x.parts.push_back(bijectors.at(p)->forward(y.parts[p]));
    }
    return x;
  };
  Target<S> out;
  out.log_prob = [base, bijectors, forward_state, include_jacobian](const ChainState<S>& y) {
    Array<S> f = eval_tlp(base, forward_state(y));
    if (include_jacobian) {
      for (std::size_t p = 0; p < y.parts.size(); ++p) {
        f = f + forward_log_det_jacobian(*bijectors[p], y.parts[p]);
      }
    }
    return f;
  };
  out.log_prob_with_grads = [base, bijectors, forward_state,
                             include_jacobian](const ChainState<S>& y) {
    TlpAndGrads<S> base_tg = eval_tlp_with_grads(base, forward_state(y));
    TlpAndGrads<S> out_tg;
    out_tg.tlp = std::move(base_tg.tlp);
    for (std::size_t p = 0; p < y.parts.size(); ++p) {
      const auto& bij = *bijectors[p];
      Array<S> grad = base_tg.grads[p] * bij.forward_deriv(y.parts[p]);
      if (include_jacobian) {
        out_tg.tlp = out_tg.tlp + forward_log_det_jacobian(bij, y.parts[p]);
        grad = grad + bij.log_deriv_grad(y.parts[p]);
      }
      out_tg.grads.push_back(std::move(grad));
    }
    return out_tg;
  };
  return out;
}

template <typename S>
class TransformedTransitionKernel : public TransitionKernel<S> {
 public:
  /// `inner_factory` builds the inner kernel over the pullback target.
  /// A single bijector is shared by every state part.
  TransformedTransitionKernel(
      Target<S> target, std::vector<BijectorPtr<S>> bijectors,
      std::function<KernelPtr<S>(const Target<S>&)> inner_factory)
      : bijectors_(std::move(bijectors)) {
    if (bijectors_.empty()) throw ArgumentError("transformed kernel: no bijectors");
    for (const auto& b : bijectors_) {
      if (!b) throw ArgumentError("transformed kernel: null bijector");
    }
    if (!inner_factory) throw ArgumentError("transformed kernel: missing inner factory");
    inner_ = inner_factory(pullback_target(target, bijectors_));
    if (!inner_) throw ArgumentError("transformed kernel: inner factory returned null");
  }

  bool is_calibrated() const override { return inner_->is_calibrated(); }

  Results<S> bootstrap_results(const ChainState<S>& state) const override {
    validate_chain_state(state);
    check_no_nan(state);
    ChainState<S> unconstrained;
    for (std::size_t p = 0; p < state.parts.size(); ++p) {
      Array<S> y = bijector_for(p).inverse(state.parts[p]);
      if (any(isnan_mask(y))) {
        throw ArgumentError("transformed kernel: initial state outside the bijector range");
      }
      unconstrained.parts.push_back(std::move(y));
    }
    Results<S> inner_results = inner_->bootstrap_results(unconstrained);
    return Results<S>::record({
        {"transformed_state", Results<S>::leaf_list(unconstrained.parts)},
        {"inner_results", std::move(inner_results)},
    });
  }

  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                const Results<S>& results,
                                                const RngKey& key) const override {
    (void)state;  // authoritative position is the cached unconstrained state
    ChainState<S> unconstrained;
    for (const auto& item : results.at("transformed_state").items()) {
      unconstrained.parts.push_back(item.template leaf_as<S>());
    }
    auto [next_y, inner_next] = inner_->one_step(unconstrained, results.at("inner_results"), key);
    ChainState<S> constrained;
    for (std::size_t p = 0; p < next_y.parts.size(); ++p) {
      constrained.parts.push_back(bijector_for(p).forward(next_y.parts[p]));
    }
    Results<S> out = Results<S>::record({
        {"transformed_state", Results<S>::leaf_list(next_y.parts)},
        {"inner_results", std::move(inner_next)},
    });
    return {std::move(constrained), std::move(out)};
  }

 private:
  const Bijector<S>& bijector_for(std::size_t part) const {
    return *bijectors_[bijectors_.size() == 1 ? 0 : part];
  }

  std::vector<BijectorPtr<S>> bijectors_;
  KernelPtr<S> inner_;
};

template <typename S>
KernelPtr<S> transformed_kernel(Target<S> target, BijectorPtr<S> bijector,
                                std::function<KernelPtr<S>(const Target<S>&)> inner_factory) {
  return std::make_shared<TransformedTransitionKernel<S>>(
      std::move(target), std::vector<BijectorPtr<S>>{std::move(bijector)},
      std::move(inner_factory));
}

}  // namespace batchmc
