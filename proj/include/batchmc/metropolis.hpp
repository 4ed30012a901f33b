// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// The Metropolis-Hastings wrapper kernel and the uncalibrated random-walk
// proposal kernel. Inner kernels propose and must emit results carrying
// `target_log_prob` [C] at the proposed state and `log_acceptance_correction`
// [C] (the Hastings term: kinetic-energy difference for HMC, zero for
// symmetric proposals). The wrapper draws one uniform per chain and selects
// state and results elementwise, so no chain ever branches.

#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "batchmc/kernel.hpp"

namespace batchmc {

inline constexpr const char* kTargetLogProb = "target_log_prob";
inline constexpr const char* kLogAcceptanceCorrection = "log_acceptance_correction";

/// Fixed key schedule of the MH wrapper: site 0 drives the inner proposal,
/// site 1 the accept uniforms (one per chain via split(accept, C)).
struct MhSiteKeys {
  RngKey inner;
  RngKey accept;
};

inline MhSiteKeys mh_site_keys(const RngKey& key) {
  const auto sites = split(key, 2);
  return {sites[0], sites[1]};
}

template <typename S>
class MetropolisHastings : public TransitionKernel<S> {
 public:
  explicit MetropolisHastings(KernelPtr<S> inner) : inner_(std::move(inner)) {
    if (!inner_) throw ArgumentError("MetropolisHastings: null inner kernel");
  }

  bool is_calibrated() const override { return true; }

  const KernelPtr<S>& inner() const { return inner_; }

  Results<S> bootstrap_results(const ChainState<S>& state) const override {
    validate_chain_state(state);
    check_no_nan(state);
    Results<S> inner_results = inner_->bootstrap_results(state);
    require_uncalibrated_leaves(inner_results);
    const Index chains = state.num_chains();
    return Results<S>::record({
        {"log_accept_ratio", Results<S>::leaf(Array<S>(Shape{chains}))},
        {"is_accepted", Results<S>::leaf(Mask(Shape{chains}))},
        {"is_nan_proposal", Results<S>::leaf(Mask(Shape{chains}))},
        {"proposed_state", Results<S>::leaf_list(state.parts)},
        {"proposed_results", inner_results},
        {"accepted_results", inner_results},
    });
  }

  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                const Results<S>& results,
                                                const RngKey& key) const override {
    const auto [inner_key, accept_key] = mh_site_keys(key);
    const Results<S>& current = results.at("accepted_results");
    require_uncalibrated_leaves(current);

    auto [proposed_state, proposed_results] = inner_->one_step(state, current, inner_key);
    require_uncalibrated_leaves(proposed_results);

    const Array<S>& current_tlp = current.template leaf_at<S>(kTargetLogProb);
    const Array<S>& proposed_tlp_raw = proposed_results.template leaf_at<S>(kTargetLogProb);
    const Array<S>& correction = proposed_results.template leaf_at<S>(kLogAcceptanceCorrection);

    constexpr S kNegInf = -std::numeric_limits<S>::infinity();
    const Mask nan_proposal = isnan_mask(proposed_tlp_raw);
    const Array<S> proposed_tlp =
        select(nan_proposal, Array<S>(proposed_tlp_raw.shape(), kNegInf), proposed_tlp_raw);

    Array<S> log_accept_ratio = proposed_tlp - current_tlp + correction;
    // -inf minus -inf etc. yields NaN; NaN ratios reject deterministically.
    log_accept_ratio = select(isnan_mask(log_accept_ratio),
                              Array<S>(log_accept_ratio.shape(), kNegInf), log_accept_ratio);

    const Index chains = state.num_chains();
    const Array<S> u = per_chain_uniform<S>(accept_key, chains);
    const Mask accepted = less(log(u), minimum(log_accept_ratio, S(0)));

    ChainState<S> new_state = select_state(accepted, proposed_state, state);
    Results<S> accepted_results = select_results(accepted, proposed_results, current);

    Results<S> new_results = Results<S>::record({
        {"log_accept_ratio", Results<S>::leaf(std::move(log_accept_ratio))},
        {"is_accepted", Results<S>::leaf(accepted)},
        {"is_nan_proposal", Results<S>::leaf(nan_proposal)},
        {"proposed_state", Results<S>::leaf_list(proposed_state.parts)},
        {"proposed_results", std::move(proposed_results)},
        {"accepted_results", std::move(accepted_results)},
    });
    return {std::move(new_state), std::move(new_results)};
  }

 private:
  static void require_uncalibrated_leaves(const Results<S>& inner_results) {
    if (!inner_results.is_record() || !inner_results.has_field(kTargetLogProb) ||
        !inner_results.has_field(kLogAcceptanceCorrection)) {
      throw ContractError(
          "MetropolisHastings: inner results must carry 'target_log_prob' and "
          "'log_acceptance_correction' leaves");
    }
  }

  KernelPtr<S> inner_;
};

/// Proposal hook: (state, key) -> (proposed state, per-chain Hastings
/// correction [C]).
template <typename S>
using ProposalFn =
    std::function<std::pair<ChainState<S>, Array<S>>(const ChainState<S>&, const RngKey&)>;

/// Gaussian random-walk proposal: x' = x + scale * eps with one standard
/// normal block per chain (schedule of sample_state_standard_normal), plus
/// the TLP evaluated at x' in a single batched call. Symmetric, so the
/// correction is zero.
template <typename S>
std::pair<ChainState<S>, Results<S>> random_walk_propose(const Target<S>& target,
                                                         const ChainState<S>& state,
                                                         const std::vector<Array<S>>& scale,
                                                         const RngKey& key) {
  const std::vector<Array<S>> noise = sample_state_standard_normal(state, key);
  ChainState<S> proposed = state;
  for (std::size_t p = 0; p < state.parts.size(); ++p) {
    const Array<S>& part_scale = scale.size() == 1 ? scale[0] : scale.at(p);
    proposed.parts[p] = state.parts[p] + part_scale * noise[p];
  }
  Array<S> tlp = eval_tlp(target, proposed);
  Results<S> results = Results<S>::record({
      {kTargetLogProb, Results<S>::leaf(std::move(tlp))},
      {kLogAcceptanceCorrection, Results<S>::leaf(Array<S>(Shape{state.num_chains()}))},
  });
  return {std::move(proposed), std::move(results)};
}

template <typename S>
class UncalibratedRandomWalk : public TransitionKernel<S> {
 public:
  UncalibratedRandomWalk(Target<S> target, std::vector<Array<S>> scale)
      : target_(std::move(target)), scale_(std::move(scale)) {
    if (scale_.empty()) throw ArgumentError("UncalibratedRandomWalk: empty scale");
    for (const auto& s : scale_) {
      if (!all(greater(s, S(0)))) {
        throw ArgumentError("UncalibratedRandomWalk: scale must be positive elementwise");
      }
    }
  }

  UncalibratedRandomWalk(Target<S> target, S scale)
      : UncalibratedRandomWalk(std::move(target), {Array<S>::scalar(scale)}) {}

  /// Custom proposal hook replacing the Gaussian walk.
  UncalibratedRandomWalk(Target<S> target, ProposalFn<S> proposal)
      : target_(std::move(target)), proposal_(std::move(proposal)) {
    if (!proposal_) throw ArgumentError("UncalibratedRandomWalk: null proposal fn");
  }

  bool is_calibrated() const override { return false; }

  Results<S> bootstrap_results(const ChainState<S>& state) const override {
    validate_chain_state(state);
    check_no_nan(state);
    Array<S> tlp = eval_tlp(target_, state);
    return Results<S>::record({
        {kTargetLogProb, Results<S>::leaf(std::move(tlp))},
        {kLogAcceptanceCorrection, Results<S>::leaf(Array<S>(Shape{state.num_chains()}))},
    });
  }

  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                const Results<S>& results,
                                                const RngKey& key) const override {
    (void)results;
    if (proposal_) {
      auto [proposed, correction] = proposal_(state, key);
      Array<S> tlp = eval_tlp(target_, proposed);
      Results<S> out = Results<S>::record({
          {kTargetLogProb, Results<S>::leaf(std::move(tlp))},
          {kLogAcceptanceCorrection, Results<S>::leaf(std::move(correction))},
      });
      return {std::move(proposed), std::move(out)};
    }
    return random_walk_propose(target_, state, scale_, key);
  }

 private:
  Target<S> target_;
  std::vector<Array<S>> scale_;
  ProposalFn<S> proposal_;
};

/// Calibrated random-walk Metropolis: MH wrapped around the Gaussian walk.
template <typename S>
KernelPtr<S> random_walk_metropolis_kernel(Target<S> target, std::vector<Array<S>> scale) {
  return std::make_shared<MetropolisHastings<S>>(
      std::make_shared<UncalibratedRandomWalk<S>>(std::move(target), std::move(scale)));
}

template <typename S>
KernelPtr<S> random_walk_metropolis_kernel(Target<S> target, S scale) {
  return random_walk_metropolis_kernel(std::move(target),
                                       std::vector<Array<S>>{Array<S>::scalar(scale)});
}

}  // namespace batchmc
