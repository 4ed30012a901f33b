// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Leapfrog symplectic integration and Hamiltonian Monte Carlo, fully batched
// across chains. The uncalibrated core samples a momentum per state element
// per chain, integrates a fixed number of leapfrog steps (one batched
// TLP+gradient call per step), and emits the kinetic-energy Hastings
// correction; wrapping it in MetropolisHastings yields the calibrated
// kernel. Non-finite trajectories flag per-chain divergence and reject via
// a -inf correction instead of poisoning the batch.

#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "batchmc/kernel.hpp"
#include "batchmc/metropolis.hpp"

namespace batchmc {

template <typename S>
struct HmcConfig {
  /// One entry per state part, or a single entry broadcast to every part.
  /// Each entry must broadcast against its part's [C, ...event] shape.
  std::vector<Array<S>> step_size;
  Index num_leapfrog_steps = 1;
};

template <typename S>
HmcConfig<S> hmc_config(S step_size, Index num_leapfrog_steps) {
  return HmcConfig<S>{{Array<S>::scalar(step_size)}, num_leapfrog_steps};
}

template <typename S>
void validate_hmc_config(const HmcConfig<S>& config, Index num_parts) {
  if (config.num_leapfrog_steps < 1) {
    throw ArgumentError("hmc: num_leapfrog_steps must be >= 1");
  }
  if (config.step_size.empty() ||
      (config.step_size.size() != 1 &&
       config.step_size.size() != static_cast<std::size_t>(num_parts))) {
    throw ArgumentError("hmc: step_size needs one entry or one per state part");
  }
  for (const auto& eps : config.step_size) {
    if (!all(greater(eps, S(0)))) {
      throw ArgumentError("hmc: step_size must be positive elementwise");
    }
  }
}

template <typename S>
const Array<S>& step_size_for_part(const std::vector<Array<S>>& step_size, std::size_t part) {
  return step_size.size() == 1 ? step_size[0] : step_size.at(part);
}

/// One i.i.d. standard normal per state element per chain, matching the
/// state part shapes. Chain c of part p draws from
/// split(split(key, P)[p], C)[c].
template <typename S>
std::vector<Array<S>> sample_momentum(const ChainState<S>& state, const RngKey& key) {
  return sample_state_standard_normal(state, key);
}

/// 0.5 * sum_over_event_dims(p^2), accumulated across parts: [C].
template <typename S>
Array<S> kinetic_energy(const std::vector<Array<S>>& momentum) {
  Array<S> total = dot_over_event_dims(momentum.at(0), momentum.at(0));
  for (std::size_t p = 1; p < momentum.size(); ++p) {
    total = total + dot_over_event_dims(momentum[p], momentum[p]);
  }
  return total * S(0.5);
}

template <typename S>
Mask nonfinite_per_chain(const Array<S>& tlp, const std::vector<Array<S>>& grads) {
  Mask bad = mask_not(isfinite_mask(tlp));
  for (const auto& g : grads) {
    bad = bad | any_over_event_dims(mask_not(isfinite_mask(g)));
  }
  return bad;
}

template <typename S>
struct LeapfrogStepResult {
  ChainState<S> state;
  std::vector<Array<S>> momentum;
  Array<S> tlp;
  std::vector<Array<S>> grads;
};

/// A single self-contained kick-drift-kick leapfrog step. `signed_steps`
/// holds one (possibly per-chain) step array per part; negative entries
/// integrate backward in time. Exactly one batched TLP+gradient call.
template <typename S>
LeapfrogStepResult<S> leapfrog_step(const Target<S>& target, const ChainState<S>& state,
                                    const std::vector<Array<S>>& momentum,
                                    const std::vector<Array<S>>& grads,
                                    const std::vector<Array<S>>& signed_steps) {
  const std::size_t parts = state.parts.size();
  LeapfrogStepResult<S> out;
  out.momentum.resize(parts);
  out.state.parts.resize(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    const Array<S>& eps = step_size_for_part(signed_steps, p);
    const Array<S> half_kicked = momentum[p] + eps * grads[p] * S(0.5);
    out.state.parts[p] = state.parts[p] + eps * half_kicked;
    out.momentum[p] = half_kicked;
  }
  TlpAndGrads<S> tg = eval_tlp_with_grads(target, out.state);
  for (std::size_t p = 0; p < parts; ++p) {
    const Array<S>& eps = step_size_for_part(signed_steps, p);
    out.momentum[p] = out.momentum[p] + eps * tg.grads[p] * S(0.5);
  }
  out.tlp = std::move(tg.tlp);
  out.grads = std::move(tg.grads);
  return out;
}

template <typename S>
struct LeapfrogResult {
  ChainState<S> state;
  std::vector<Array<S>> momentum;
  Array<S> tlp;
  std::vector<Array<S>> grads;
  Mask divergent;  // [C]: non-finite TLP or gradient anywhere along the path
};

/// Standard fused leapfrog over num_steps:
///   p += (eps/2) grad; repeat { x += eps p; p += eps grad (except last) };
///   p += (eps/2) grad.
/// One batched TLP+gradient call per step when `initial` carries the cached
/// TLP/gradients at `state`.
template <typename S>
LeapfrogResult<S> leapfrog(const Target<S>& target, const ChainState<S>& state,
                           const std::vector<Array<S>>& momentum, const HmcConfig<S>& config,
                           std::optional<TlpAndGrads<S>> initial = std::nullopt) {
  validate_hmc_config(config, state.num_parts());
  TlpAndGrads<S> tg = initial ? std::move(*initial) : eval_tlp_with_grads(target, state);

  LeapfrogResult<S> out;
  out.state = state;
  out.momentum = momentum;
  out.divergent = nonfinite_per_chain(tg.tlp, tg.grads);

  const std::size_t parts = state.parts.size();
  const Index num_steps = config.num_leapfrog_steps;
  for (std::size_t p = 0; p < parts; ++p) {
    const Array<S>& eps = step_size_for_part(config.step_size, p);
    out.momentum[p] = out.momentum[p] + eps * tg.grads[p] * S(0.5);
  }
  for (Index step = 0; step < num_steps; ++step) {
    for (std::size_t p = 0; p < parts; ++p) {
      const Array<S>& eps = step_size_for_part(config.step_size, p);
      out.state.parts[p] = out.state.parts[p] + eps * out.momentum[p];
    }
    tg = eval_tlp_with_grads(target, out.state);
    out.divergent = out.divergent | nonfinite_per_chain(tg.tlp, tg.grads);
    const S factor = step + 1 < num_steps ? S(1) : S(0.5);
    for (std::size_t p = 0; p < parts; ++p) {
      const Array<S>& eps = step_size_for_part(config.step_size, p);
      out.momentum[p] = out.momentum[p] + eps * tg.grads[p] * factor;
    }
  }
  out.tlp = std::move(tg.tlp);
  out.grads = std::move(tg.grads);
  return out;
}

/// Uncalibrated HMC: proposes the endpoint of a leapfrog trajectory started
/// from freshly sampled momenta. Must be wrapped in MetropolisHastings.
template <typename S>
class UncalibratedHmc : public TransitionKernel<S> {
 public:
  UncalibratedHmc(Target<S> target, HmcConfig<S> config)
      : target_(std::move(target)), config_(std::move(config)) {
    if (config_.num_leapfrog_steps < 1) {
      throw ArgumentError("hmc: num_leapfrog_steps must be >= 1");
    }
    for (const auto& eps : config_.step_size) {
      if (!all(greater(eps, S(0)))) {
        throw ArgumentError("hmc: step_size must be positive elementwise");
      }
    }
  }

  bool is_calibrated() const override { return false; }

  const HmcConfig<S>& config() const { return config_; }

  Results<S> bootstrap_results(const ChainState<S>& state) const override {
    validate_chain_state(state);
    check_no_nan(state);
    validate_hmc_config(config_, state.num_parts());
    TlpAndGrads<S> tg = eval_tlp_with_grads(target_, state);
    return Results<S>::record({
        {kTargetLogProb, Results<S>::leaf(std::move(tg.tlp))},
        {"grads", Results<S>::leaf_list(tg.grads)},
        {kLogAcceptanceCorrection, Results<S>::leaf(Array<S>(Shape{state.num_chains()}))},
        {"step_size", Results<S>::leaf_list(config_.step_size)},
    });
  }

  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                const Results<S>& results,
                                                const RngKey& key) const override {
    TlpAndGrads<S> cached;
    cached.tlp = results.template leaf_at<S>(kTargetLogProb);
    const Results<S>& grads_node = results.at("grads");
    for (const auto& item : grads_node.items()) {
      cached.grads.push_back(item.template leaf_as<S>());
    }
    if (cached.grads.size() != state.parts.size()) {
      throw ContractError("hmc: results 'grads' arity does not match state parts");
    }

    const std::vector<Array<S>> momentum = sample_momentum(state, key);
    LeapfrogResult<S> lf =
        leapfrog(target_, state, momentum, config_,
                 std::optional<TlpAndGrads<S>>(std::move(cached)));

    Array<S> correction = kinetic_energy(momentum) - kinetic_energy(lf.momentum);
    constexpr S kNegInf = -std::numeric_limits<S>::infinity();
    correction = select(lf.divergent, Array<S>(correction.shape(), kNegInf), correction);

    Results<S> out = Results<S>::record({
        {kTargetLogProb, Results<S>::leaf(std::move(lf.tlp))},
        {"grads", Results<S>::leaf_list(lf.grads)},
        {kLogAcceptanceCorrection, Results<S>::leaf(std::move(correction))},
        {"step_size", Results<S>::leaf_list(config_.step_size)},
    });
    return {std::move(lf.state), std::move(out)};
  }

 private:
  Target<S> target_;
  HmcConfig<S> config_;
};

/// The calibrated HMC kernel: MetropolisHastings over UncalibratedHmc.
template <typename S>
KernelPtr<S> hmc_kernel(Target<S> target, HmcConfig<S> config) {
  return std::make_shared<MetropolisHastings<S>>(
      std::make_shared<UncalibratedHmc<S>>(std::move(target), std::move(config)));
}

template <typename S>
KernelPtr<S> hmc_kernel(Target<S> target, S step_size, Index num_leapfrog_steps) {
  return hmc_kernel(std::move(target), hmc_config(step_size, num_leapfrog_steps));
}

}  // namespace batchmc
