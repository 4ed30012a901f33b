// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Iterative (unrolled) No-U-Turn sampler with multinomial candidate
// selection, bounded tree depth, and O(max_tree_depth) checkpoint memory.
//
// Instead of recursing over tree doublings, each depth-d expansion runs
// 2^d leapfrog steps in a single loop shared by every chain, with per-chain
// masks freezing chains whose trajectory has terminated. The U-turn checks
// a recursive builder would make while unwinding are replayed from a
// fixed-size checkpoint buffer: state i (1-indexed inside the expansion) is
// written to slot d when i == 1 and slot countr_zero(i-1) when i is odd;
// when i is even it is checked against slots holding states
// j = i - 2^k + 1 for k = 1..countr_zero(i), smallest span first. That is
// exactly the set of subtree (first, last) boundary pairs whose span ends
// at i, so the iterative and recursive builders agree check for check.
//
// Candidate selection is progressive multinomial: within an expansion,
// state i replaces the subtree candidate with probability w_i / sum_{j<=i}
// w_j (weights exp(-dH) combined in log space); a completed subtree then
// replaces the trajectory candidate with probability w_subtree / w_total.
// A subtree containing a divergence (|dH| > max_energy_diff against the
// initial energy) or an internal U-turn is rejected wholesale and
// terminates that chain's expansion.

#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "batchmc/hmc.hpp"
#include "batchmc/kernel.hpp"

namespace batchmc {

template <typename S>
struct NutsConfig {
  std::vector<Array<S>> step_size;  // as HmcConfig: one entry or one per part
  Index max_tree_depth = 10;
  S max_energy_diff = S(1000);
};

template <typename S>
NutsConfig<S> nuts_config(S step_size, Index max_tree_depth = 10,
                          S max_energy_diff = S(1000)) {
  return NutsConfig<S>{{Array<S>::scalar(step_size)}, max_tree_depth, max_energy_diff};
}

template <typename S>
void validate_nuts_config(const NutsConfig<S>& config, Index num_parts) {
  if (config.max_tree_depth < 1) throw ArgumentError("nuts: max_tree_depth must be >= 1");
  if (!(config.max_energy_diff > S(0))) {
    throw ArgumentError("nuts: max_energy_diff must be positive");
  }
  if (config.step_size.empty() ||
      (config.step_size.size() != 1 &&
       config.step_size.size() != static_cast<std::size_t>(num_parts))) {
    throw ArgumentError("nuts: step_size needs one entry or one per state part");
  }
  for (const auto& eps : config.step_size) {
    if (!all(greater(eps, S(0)))) {
      throw ArgumentError("nuts: step_size must be positive elementwise");
    }
  }
}

enum class NutsStopReason : std::int64_t {
  depth_cap = 0,
  uturn = 1,
  divergence = 2,
};

/// Hoffman-Gelman termination criterion per chain, endpoints in time order:
/// dot(x+ - x-, p-) < 0 or dot(x+ - x-, p+) < 0, dots over all event dims
/// of all parts.
template <typename S>
Mask has_u_turn(const std::vector<Array<S>>& x_plus, const std::vector<Array<S>>& p_plus,
                const std::vector<Array<S>>& x_minus, const std::vector<Array<S>>& p_minus) {
  Array<S> dot_minus(Shape{x_plus.at(0).shape()[0]});
  Array<S> dot_plus(Shape{x_plus.at(0).shape()[0]});
  for (std::size_t p = 0; p < x_plus.size(); ++p) {
    const Array<S> delta = x_plus[p] - x_minus[p];
    dot_minus = dot_minus + dot_over_event_dims(delta, p_minus[p]);
    dot_plus = dot_plus + dot_over_event_dims(delta, p_plus[p]);
  }
  return less(dot_minus, S(0)) | less(dot_plus, S(0));
}

/// H(x, p) = -tlp(x) + 0.5 |p|^2, per chain.
template <typename S>
Array<S> hamiltonian_energy(const Array<S>& tlp, const std::vector<Array<S>>& momentum) {
  return -tlp + kinetic_energy(momentum);
}

/// Divergence test shared by the iterative builder and the recursive test
/// oracle: non-finite energy/gradients or |dH| above the threshold.
template <typename S>
Mask nuts_state_divergent(const Array<S>& energy_change, const Array<S>& tlp,
                          const std::vector<Array<S>>& grads, S max_energy_diff) {
  return mask_not(isfinite_mask(energy_change)) | nonfinite_per_chain(tlp, grads) |
         greater(abs(energy_change), max_energy_diff);
}

/// Test/diagnostic hooks into the trajectory builder. All methods default
/// to no-ops; production runs pass no observer.
template <typename S>
class NutsObserver {
 public:
  virtual ~NutsObserver() = default;
  virtual void on_directions(Index /*depth*/, const Mask& /*active*/, const Mask& /*forward*/) {}
  virtual void on_state_generated(Index /*depth*/, Index /*step*/, const ChainState<S>& /*position*/,
                                  const std::vector<Array<S>>& /*momentum*/,
                                  const Array<S>& /*energy_change*/, const Mask& /*integrating*/,
                                  const Mask& /*divergent*/) {}
  virtual void on_uturn_check(Index /*depth*/, Index /*step*/, Index /*span_start*/,
                              const Mask& /*checked*/, const Mask& /*uturn*/) {}
  virtual void on_subtree_complete(Index /*depth*/, const Mask& /*active*/, const Mask& /*failed*/,
                                   const Mask& /*failed_divergence*/,
                                   const Array<S>& /*subtree_log_weight*/) {}
  virtual void on_trajectory_uturn_check(Index /*depth*/, const Mask& /*completed*/,
                                         const Mask& /*uturn*/) {}
  virtual void on_finish(const Array<std::int64_t>& /*depth_reached*/,
                         const Array<std::int64_t>& /*stop_reason*/,
                         Index /*checkpoint_pairs_peak*/) {}
};

template <typename S>
struct NutsControls {
  NutsObserver<S>* observer = nullptr;
  /// Overrides the per-depth direction draw (true = forward). Used by the
  /// oracle-equivalence tests to feed both builders identical inputs.
  std::function<Mask(Index depth)> direction_override;
};

template <typename S>
struct NutsTrajectory {
  ChainState<S> state;
  Array<S> tlp;
  std::vector<Array<S>> grads;
  Array<S> energy_change;            // dH of the selected candidate
  Array<S> log_accept_ratio;         // log mean Metropolis statistic
  Array<std::int64_t> depth_reached; // completed doublings
  Array<std::int64_t> leapfrogs_taken;
  Mask is_divergent;
  Array<std::int64_t> stop_reason;   // NutsStopReason per chain
};

namespace detail {

inline Index trailing_zeros(Index i) {
  return static_cast<Index>(std::countr_zero(static_cast<std::uint64_t>(i)));
}

/// Checkpoint slot for the odd in-subtree state index i at expansion depth d.
inline Index checkpoint_slot(Index i, Index depth) {
  return i == 1 ? depth : trailing_zeros(i - 1);
}

}  // namespace detail

/// Builds one NUTS trajectory for every chain in lockstep and returns the
/// multinomial-selected candidate states. `momentum` and the cached
/// TLP/gradients at `state` are supplied by the caller (the kernel samples
/// momenta; tests inject them).
///
/// Key schedule: split(key, 2) yields (direction site, swap site). Depth d
/// draws directions from split(dirs, max_tree_depth)[d] split per chain;
/// in-subtree step i draws its candidate-swap uniforms from
/// fold_in(split(swaps, max_tree_depth)[d], i) split per chain, and the
/// cross-subtree swap from fold_in(..., 0).
template <typename S>
NutsTrajectory<S> build_nuts_trajectory(const Target<S>& target, const ChainState<S>& state,
                                        const std::vector<Array<S>>& momentum,
                                        const TlpAndGrads<S>& initial, const NutsConfig<S>& config,
                                        const RngKey& key,
                                        const NutsControls<S>* controls = nullptr) {
  validate_chain_state(state);
  validate_nuts_config(config, state.num_parts());
  const Index chains = state.num_chains();
  const Index mtd = config.max_tree_depth;
  NutsObserver<S>* observer = controls ? controls->observer : nullptr;
  constexpr S kNegInf = -std::numeric_limits<S>::infinity();

  const auto sites = split(key, 2);
  const auto dir_keys = split(sites[0], mtd);
  const auto swap_keys = split(sites[1], mtd);

  const Array<S> h0 = hamiltonian_energy(initial.tlp, momentum);

  // Trajectory endpoints in time order, updated in place per chain.
  std::vector<Array<S>> x_minus = state.parts, x_plus = state.parts;
  std::vector<Array<S>> p_minus = momentum, p_plus = momentum;
  std::vector<Array<S>> g_minus = initial.grads, g_plus = initial.grads;

  // Selected candidate (starts at the initial state, log weight 0).
  std::vector<Array<S>> cand_x = state.parts;
  Array<S> cand_tlp = initial.tlp;
  std::vector<Array<S>> cand_g = initial.grads;
  Array<S> cand_dh(Shape{chains});
  Array<S> log_w_total(Shape{chains});

  Mask terminated(Shape{chains});
  Mask is_divergent(Shape{chains});
  Array<std::int64_t> depth_reached(Shape{chains});
  Array<std::int64_t> leapfrogs(Shape{chains});
  Array<std::int64_t> stop_reason(Shape{chains},
                                  static_cast<std::int64_t>(NutsStopReason::depth_cap));
  Array<S> acc_sum(Shape{chains});
  Array<S> acc_count(Shape{chains});

  // Fixed-size in-situ checkpoint buffer: max_tree_depth (state, momentum)
  // slots plus the two endpoint pairs is all the trajectory storage.
  struct Checkpoint {
    std::vector<Array<S>> x, p;
  };
  std::vector<Checkpoint> checkpoints(static_cast<std::size_t>(mtd));
  std::vector<bool> slot_written(static_cast<std::size_t>(mtd), false);

  const Array<S> plus_one(Shape{chains}, S(1));
  const Array<S> minus_one(Shape{chains}, S(-1));

  for (Index depth = 0; depth < mtd; ++depth) {
    const Mask active = mask_not(terminated);
    if (!any(active)) break;

    Mask forward = controls && controls->direction_override
                       ? controls->direction_override(depth)
                       : less(per_chain_uniform<S>(dir_keys[static_cast<std::size_t>(depth)],
                                                   chains),
                              S(0.5));
    if (observer) observer->on_directions(depth, active, forward);
    const Array<S> sign = select(forward, plus_one, minus_one);
    std::vector<Array<S>> signed_steps;
    for (std::size_t p = 0; p < state.parts.size(); ++p) {
      const Array<S>& eps = step_size_for_part(config.step_size, p);
      const Index pad_rank = std::max(state.parts[p].rank(), eps.rank());
      signed_steps.push_back(eps * left_justified_expand_dims_to_rank(sign, pad_rank));
    }

    Mask sub_failed(Shape{chains});
    Mask sub_div(Shape{chains});
    Array<S> sub_log_w(Shape{chains}, kNegInf);
    std::vector<Array<S>> sub_cand_x = cand_x;
    Array<S> sub_cand_tlp = cand_tlp;
    std::vector<Array<S>> sub_cand_g = cand_g;
    Array<S> sub_cand_dh = cand_dh;

    const RngKey& depth_swap_key = swap_keys[static_cast<std::size_t>(depth)];
    const Index subtree_size = Index(1) << depth;

    for (Index i = 1; i <= subtree_size; ++i) {
      const Mask integrating = active & mask_not(sub_failed);
      if (!any(integrating)) break;

      const ChainState<S> cur_x(select_parts(forward, x_plus, x_minus));
      const std::vector<Array<S>> cur_p = select_parts(forward, p_plus, p_minus);
      const std::vector<Array<S>> cur_g = select_parts(forward, g_plus, g_minus);
      const LeapfrogStepResult<S> lf =
          leapfrog_step(target, cur_x, cur_p, cur_g, signed_steps);
      const Array<S> dh = hamiltonian_energy(lf.tlp, lf.momentum) - h0;
      const Mask divergent = nuts_state_divergent(dh, lf.tlp, lf.grads, config.max_energy_diff);

      leapfrogs = leapfrogs + cast<std::int64_t>(integrating);

      const Mask advance_fwd = integrating & forward;
      const Mask advance_bwd = integrating & mask_not(forward);
      x_plus = select_parts(advance_fwd, lf.state.parts, x_plus);
      p_plus = select_parts(advance_fwd, lf.momentum, p_plus);
      g_plus = select_parts(advance_fwd, lf.grads, g_plus);
      x_minus = select_parts(advance_bwd, lf.state.parts, x_minus);
      p_minus = select_parts(advance_bwd, lf.momentum, p_minus);
      g_minus = select_parts(advance_bwd, lf.grads, g_minus);

      if (observer) {
        observer->on_state_generated(depth, i, lf.state, lf.momentum, dh, integrating,
                                     integrating & divergent);
      }
      is_divergent = is_divergent | (integrating & divergent);
      sub_div = sub_div | (integrating & divergent);
      sub_failed = sub_failed | (integrating & divergent);

      // Metropolis statistic over every state generated for an active chain.
      const Array<S> raw_accept = minimum(exp(-dh), S(1));
      const Array<S> accept_stat =
          select(isnan_mask(raw_accept), Array<S>(Shape{chains}), raw_accept);
      acc_sum = acc_sum + select(integrating, accept_stat, Array<S>(Shape{chains}));
      acc_count = acc_count + cast<S>(integrating);

      // Progressive within-subtree multinomial candidate swap.
      const Mask eligible = integrating & mask_not(divergent);
      const Array<S> log_w_state = -dh;
      const Array<S> grown = log_add_exp(sub_log_w, log_w_state);
      const Array<S> take_prob = exp(log_w_state - grown);
      const Array<S> u_swap = per_chain_uniform<S>(
          fold_in(depth_swap_key, static_cast<std::uint64_t>(i)), chains);
      const Mask take = eligible & less(u_swap, take_prob);
      sub_cand_x = select_parts(take, lf.state.parts, sub_cand_x);
      sub_cand_tlp = select(take, lf.tlp, sub_cand_tlp);
      sub_cand_g = select_parts(take, lf.grads, sub_cand_g);
      sub_cand_dh = select(take, dh, sub_cand_dh);
      sub_log_w = select(eligible, grown, sub_log_w);

      if (i % 2 == 1) {
        const Index slot = detail::checkpoint_slot(i, depth);
        checkpoints[static_cast<std::size_t>(slot)] = {lf.state.parts, lf.momentum};
        slot_written[static_cast<std::size_t>(slot)] = true;
      } else {
        // Replay the boundary checks of every subtree span ending at i.
        std::vector<Array<S>> signed_p_i;
        for (std::size_t p = 0; p < lf.momentum.size(); ++p) {
          signed_p_i.push_back(lf.momentum[p] *
                               left_justified_expand_dims_to_rank(sign, lf.momentum[p].rank()));
        }
        const Index max_span = detail::trailing_zeros(i);
        for (Index k = 1; k <= max_span; ++k) {
          const Index span_start = i - (Index(1) << k) + 1;
          const Checkpoint& ckpt =
              checkpoints[static_cast<std::size_t>(detail::checkpoint_slot(span_start, depth))];
          std::vector<Array<S>> signed_p_j;
          for (std::size_t p = 0; p < ckpt.p.size(); ++p) {
            signed_p_j.push_back(ckpt.p[p] *
                                 left_justified_expand_dims_to_rank(sign, ckpt.p[p].rank()));
          }
          const Mask uturn = has_u_turn(lf.state.parts, signed_p_i, ckpt.x, signed_p_j);
          const Mask checked = integrating & mask_not(divergent);
          if (observer) observer->on_uturn_check(depth, i, span_start, checked, uturn);
          sub_failed = sub_failed | (checked & uturn);
        }
      }
    }

    const Mask completed = active & mask_not(sub_failed);
    if (observer) observer->on_subtree_complete(depth, active, sub_failed, sub_div, sub_log_w);

    // Cross-subtree progressive multinomial swap.
    const Array<S> new_total = log_add_exp(log_w_total, sub_log_w);
    const Array<S> cross_prob = exp(sub_log_w - new_total);
    const Array<S> u_cross = per_chain_uniform<S>(fold_in(depth_swap_key, 0), chains);
    const Mask take_sub = completed & less(u_cross, cross_prob);
    cand_x = select_parts(take_sub, sub_cand_x, cand_x);
    cand_tlp = select(take_sub, sub_cand_tlp, cand_tlp);
    cand_g = select_parts(take_sub, sub_cand_g, cand_g);
    cand_dh = select(take_sub, sub_cand_dh, cand_dh);
    log_w_total = select(completed, new_total, log_w_total);

    depth_reached = depth_reached + cast<std::int64_t>(completed);

    const Mask traj_uturn = has_u_turn(x_plus, p_plus, x_minus, p_minus);
    if (observer) observer->on_trajectory_uturn_check(depth, completed, traj_uturn);

    const Mask newly_failed = active & sub_failed;
    const Array<std::int64_t> fail_reason =
        select(sub_div,
               Array<std::int64_t>(Shape{chains},
                                   static_cast<std::int64_t>(NutsStopReason::divergence)),
               Array<std::int64_t>(Shape{chains},
                                   static_cast<std::int64_t>(NutsStopReason::uturn)));
    stop_reason = select(newly_failed, fail_reason, stop_reason);
    terminated = terminated | newly_failed;

    const Mask newly_uturned = completed & traj_uturn;
    stop_reason = select(newly_uturned,
                         Array<std::int64_t>(Shape{chains},
                                             static_cast<std::int64_t>(NutsStopReason::uturn)),
                         stop_reason);
    terminated = terminated | newly_uturned;
  }

  Index slots_used = 0;
  for (bool written : slot_written) slots_used += written ? 1 : 0;
  if (observer) observer->on_finish(depth_reached, stop_reason, slots_used + 2);

  NutsTrajectory<S> out;
  out.state = ChainState<S>(std::move(cand_x));
  out.tlp = std::move(cand_tlp);
  out.grads = std::move(cand_g);
  out.energy_change = std::move(cand_dh);
  out.log_accept_ratio = log(acc_sum / maximum(acc_count, S(1)));
  out.depth_reached = std::move(depth_reached);
  out.leapfrogs_taken = std::move(leapfrogs);
  out.is_divergent = std::move(is_divergent);
  out.stop_reason = std::move(stop_reason);
  return out;
}

/// The calibrated No-U-Turn kernel. One step: sample momenta, build the
/// doubling trajectory, emit the multinomial candidate. Key schedule:
/// split(key, 2) = (momentum site, trajectory site).
template <typename S>
class NoUTurnSampler : public TransitionKernel<S> {
 public:
  NoUTurnSampler(Target<S> target, NutsConfig<S> config,
                 std::shared_ptr<const NutsControls<S>> controls = nullptr)
      : target_(std::move(target)), config_(std::move(config)), controls_(std::move(controls)) {
    if (config_.max_tree_depth < 1) throw ArgumentError("nuts: max_tree_depth must be >= 1");
    if (!(config_.max_energy_diff > S(0))) {
      throw ArgumentError("nuts: max_energy_diff must be positive");
    }
  }

  bool is_calibrated() const override { return true; }

  const NutsConfig<S>& config() const { return config_; }

  Results<S> bootstrap_results(const ChainState<S>& state) const override {
    validate_chain_state(state);
    check_no_nan(state);
    validate_nuts_config(config_, state.num_parts());
    TlpAndGrads<S> tg = eval_tlp_with_grads(target_, state);
    const Index chains = state.num_chains();
    return Results<S>::record({
        {kTargetLogProb, Results<S>::leaf(std::move(tg.tlp))},
        {"grads", Results<S>::leaf_list(tg.grads)},
        {"log_accept_ratio", Results<S>::leaf(Array<S>(Shape{chains}))},
        {"leapfrogs_taken", Results<S>::leaf(Array<std::int64_t>(Shape{chains}))},
        {"depth_reached", Results<S>::leaf(Array<std::int64_t>(Shape{chains}))},
        {"is_divergent", Results<S>::leaf(Mask(Shape{chains}))},
        {"energy_change", Results<S>::leaf(Array<S>(Shape{chains}))},
    });
  }

  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                const Results<S>& results,
                                                const RngKey& key) const override {
    TlpAndGrads<S> cached;
    cached.tlp = results.template leaf_at<S>(kTargetLogProb);
    for (const auto& item : results.at("grads").items()) {
      cached.grads.push_back(item.template leaf_as<S>());
    }
    if (cached.grads.size() != state.parts.size()) {
      throw ContractError("nuts: results 'grads' arity does not match state parts");
    }
    const auto sites = split(key, 2);
    const std::vector<Array<S>> momentum = sample_momentum(state, sites[0]);
    NutsTrajectory<S> traj = build_nuts_trajectory(target_, state, momentum, cached, config_,
                                                   sites[1], controls_.get());
    Results<S> out = Results<S>::record({
        {kTargetLogProb, Results<S>::leaf(std::move(traj.tlp))},
        {"grads", Results<S>::leaf_list(traj.grads)},
        {"log_accept_ratio", Results<S>::leaf(std::move(traj.log_accept_ratio))},
        {"leapfrogs_taken", Results<S>::leaf(std::move(traj.leapfrogs_taken))},
        {"depth_reached", Results<S>::leaf(std::move(traj.depth_reached))},
        {"is_divergent", Results<S>::leaf(std::move(traj.is_divergent))},
        {"energy_change", Results<S>::leaf(std::move(traj.energy_change))},
    });
    return {std::move(traj.state), std::move(out)};
  }

 private:
  Target<S> target_;
  NutsConfig<S> config_;
  std::shared_ptr<const NutsControls<S>> controls_;
};

template <typename S>
KernelPtr<S> nuts_kernel(Target<S> target, NutsConfig<S> config) {
  return std::make_shared<NoUTurnSampler<S>>(std::move(target), std::move(config));
}

}  // namespace batchmc
