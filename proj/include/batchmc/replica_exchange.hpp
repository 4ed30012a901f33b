// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Replica Exchange MC (parallel tempering). A leading replica axis of K
// inverse temperatures 1 = beta_0 > ... > beta_{K-1} > 0 is added on top of
// the chain axis; all K*C tempered chains advance through one batched inner
// kernel over the temperature-scaled TLP (one batched TLP evaluation
// services every replica and chain), then adjacent replicas propose state
// swaps under an alternating even-odd scheme. The beta = 1 replica is the
// reported chain state.

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "batchmc/kernel.hpp"
#include "batchmc/metropolis.hpp"

namespace batchmc {

template <typename S>
void validate_inverse_temperatures(const Array<S>& betas) {
  if (betas.rank() != 1 || betas.size() < 1) {
    throw ConfigError("remc: inverse_temperatures must be a non-empty vector");
  }
  if (std::abs(static_cast<double>(betas[0]) - 1.0) > 1e-12) {
    throw ConfigError("remc: inverse_temperatures must start at 1");
  }
  for (Index k = 0; k < betas.size(); ++k) {
    if (!(betas[k] > S(0))) throw ConfigError("remc: inverse temperatures must be positive");
    if (k > 0 && !(betas[k] < betas[k - 1])) {
      throw ConfigError("remc: inverse temperatures must be strictly descending");
    }
  }
}

/// Temperature-scaled TLP over states whose parts carry leading [K, C]
/// axes: evaluates the base TLP on the flattened [K*C] batch and scales by
/// the inverse temperatures, padded on the right so they broadcast along
/// the replica axis. Returns shape [K, C].
template <typename S>
std::function<Array<S>(const ChainState<S>&)> make_replica_tlp(const Target<S>& base,
                                                               Array<S> inverse_temperatures) {
  validate_inverse_temperatures(inverse_temperatures);
  const Index num_replicas = inverse_temperatures.size();
  auto base_log_prob = base.log_prob;
  return [base_log_prob, betas = std::move(inverse_temperatures),
          num_replicas](const ChainState<S>& state) {
    ChainState<S> flat;
    Index chains = -1;
    for (const auto& part : state.parts) {
      if (part.rank() < 2 || part.shape()[0] != num_replicas) {
        throw ShapeError("replica tlp: parts need leading [K, C] axes with K = " +
                         std::to_string(num_replicas) + ", got " + shape_str(part.shape()));
      }
      chains = part.shape()[1];
      Shape flat_shape{num_replicas * chains};
      flat_shape.insert(flat_shape.end(), part.shape().begin() + 2, part.shape().end());
      flat.parts.push_back(reshape(part, std::move(flat_shape)));
    }
    Target<S> wrapped;
    wrapped.log_prob = base_log_prob;
    const Array<S> tlp = reshape(eval_tlp(wrapped, flat), Shape{num_replicas, chains});
    return left_justified_expand_dims_like(betas, tlp) * tlp;
  };
}

/// Proper Target over the flattened [K*C] batch, used by the inner kernel.
/// Gradients scale linearly with beta.
template <typename S>
Target<S> make_flat_replica_target(const Target<S>& base, Array<S> inverse_temperatures) {
  validate_inverse_temperatures(inverse_temperatures);
  const Index num_replicas = inverse_temperatures.size();
  auto beta_flat_for = [betas = inverse_temperatures, num_replicas](Index total) {
    const Index chains = total / num_replicas;
    return reshape(broadcast_to(left_justified_expand_dims_to_rank(betas, 2),
                                Shape{num_replicas, chains}),
                   Shape{total});
  };
  Target<S> out;
  out.log_prob = [base, beta_flat_for](const ChainState<S>& state) {
    return beta_flat_for(state.num_chains()) * eval_tlp(base, state);
  };
  out.log_prob_with_grads = [base, beta_flat_for](const ChainState<S>& state) {
    TlpAndGrads<S> tg = eval_tlp_with_grads(base, state);
    const Array<S> beta_flat = beta_flat_for(state.num_chains());
    TlpAndGrads<S> scaled;
    scaled.tlp = beta_flat * tg.tlp;
    for (std::size_t p = 0; p < tg.grads.size(); ++p) {
      scaled.grads.push_back(
          tg.grads[p] * left_justified_expand_dims_to_rank(beta_flat, tg.grads[p].rank()));
    }
    return scaled;
  };
  return out;
}

template <typename S>
struct RemcConfig {
  Array<S> inverse_temperatures;  // [K], beta_0 == 1, strictly descending
  std::function<KernelPtr<S>(const Target<S>&)> inner_kernel_factory;
  /// Inner-results leaf caching the scaled TLP of the current state; it is
  /// rescaled after swaps so the inner kernel never re-evaluates.
  std::string tlp_cache_path = "accepted_results/target_log_prob";
  /// Inner-results list caching gradients of the scaled TLP, rescaled by
  /// the beta ratio on swap when present. Empty string disables.
  std::string grad_cache_path = "accepted_results/grads";
};

struct RemcSiteKeys {
  RngKey inner;
  RngKey swaps;
};

inline RemcSiteKeys remc_site_keys(const RngKey& key) {
  const auto sites = split(key, 2);
  return {sites[0], sites[1]};
}

template <typename S>
class ReplicaExchange : public TransitionKernel<S> {
 public:
  ReplicaExchange(Target<S> base_target, RemcConfig<S> config)
      : config_(std::move(config)) {
    validate_inverse_temperatures(config_.inverse_temperatures);
    if (!config_.inner_kernel_factory) throw ConfigError("remc: missing inner kernel factory");
    flat_target_ = make_flat_replica_target(base_target, config_.inverse_temperatures);
    inner_ = config_.inner_kernel_factory(flat_target_);
    if (!inner_) throw ConfigError("remc: inner kernel factory returned null");
    if (!inner_->is_calibrated()) {
      throw ConfigError("remc: inner kernel must be calibrated (wrap it in MetropolisHastings)");
    }
  }

  bool is_calibrated() const override { return true; }

  Index num_replicas() const { return config_.inverse_temperatures.size(); }

  Results<S> bootstrap_results(const ChainState<S>& state) const override {
    validate_chain_state(state);
    check_no_nan(state);
    const Index replicas = num_replicas();
    const Index chains = state.num_chains();

    std::vector<Array<S>> replica_parts;
    for (const auto& part : state.parts) replica_parts.push_back(tile_leading(part, replicas));
    Results<S> inner_boot = inner_->bootstrap_results(flatten_state(replica_parts));
    const Array<S> unscaled = unscaled_tlp_from_cache(inner_boot, chains);

    return Results<S>::record({
        {"replica_states", Results<S>::leaf_list(replica_parts)},
        {"inner_results", std::move(inner_boot)},
        {"unscaled_tlp", Results<S>::leaf(unscaled)},
        {"is_swap_proposed", Results<S>::leaf(Mask(Shape{replicas - 1, chains}))},
        {"is_swap_accepted", Results<S>::leaf(Mask(Shape{replicas - 1, chains}))},
        {"swap_log_accept_ratio", Results<S>::leaf(Array<S>(Shape{replicas - 1, chains}))},
        {"num_steps", Results<S>::leaf(Array<std::int64_t>(Shape{}, 0))},
    });
  }

  std::pair<ChainState<S>, Results<S>> one_step(const ChainState<S>& state,
                                                const Results<S>& results,
                                                const RngKey& key) const override {
    const Index replicas = num_replicas();
    const Index chains = state.num_chains();
    const auto [inner_key, swap_key] = remc_site_keys(key);
    const Array<S>& betas = config_.inverse_temperatures;
    constexpr S kNegInf = -std::numeric_limits<S>::infinity();

    // (1) Advance all replicas with one batched inner step.
    std::vector<Array<S>> replica_parts;
    for (const auto& item : results.at("replica_states").items()) {
      replica_parts.push_back(item.template leaf_as<S>());
    }
    auto [flat_next, inner_next] =
        inner_->one_step(flatten_state(replica_parts), results.at("inner_results"), inner_key);
    std::vector<Array<S>> next_parts;
    for (std::size_t p = 0; p < replica_parts.size(); ++p) {
      next_parts.push_back(reshape(flat_next.parts[p], replica_parts[p].shape()));
    }
    Array<S> unscaled = unscaled_tlp_from_cache(inner_next, chains);

    // (2) Propose swaps between adjacent pairs under the even-odd scheme.
    const std::int64_t step = results.template leaf_at<std::int64_t>("num_steps")[0];
    const Index parity = static_cast<Index>(step % 2);
    Mask proposed(Shape{replicas - 1, chains});
    for (Index k = parity; k < replicas - 1; k += 2) {
      for (Index c = 0; c < chains; ++c) proposed[k * chains + c] = 1;
    }

    // log alpha = (beta_k - beta_{k+1}) * (unscaled_{k+1} - unscaled_k).
    const Array<S> beta_diff =
        slice_leading(betas, 0, replicas - 1) - slice_leading(betas, 1, replicas);
    const Array<S> tlp_diff =
        slice_leading(unscaled, 1, replicas) - slice_leading(unscaled, 0, replicas - 1);
    Array<S> log_alpha =
        left_justified_expand_dims_to_rank(beta_diff, 2) * tlp_diff;
    log_alpha =
        select(isnan_mask(log_alpha), Array<S>(log_alpha.shape(), kNegInf), log_alpha);

    const Array<S> u = sample_uniform<S>(swap_key, Shape{replicas - 1, chains});
    const Mask accepted = proposed & less(log(u), minimum(log_alpha, S(0)));

    // (3) Exchange swapped rows via elementwise select.
    const Mask with_next = embed_pair_rows(accepted, replicas, 0);
    const Mask with_prev = embed_pair_rows(accepted, replicas, 1);
    for (auto& part : next_parts) part = exchange_rows(part, with_next, with_prev);
    unscaled = exchange_rows(unscaled, with_next, with_prev);

    // Rescale the cached scaled TLP from the stored base TLP.
    const Array<S> beta_pad = left_justified_expand_dims_to_rank(betas, 2);
    write_leaf(inner_next, config_.tlp_cache_path,
               reshape(beta_pad * unscaled, Shape{replicas * chains}));
    // Cached gradients of beta*tlp rescale by the beta ratio of the swap.
    if (!config_.grad_cache_path.empty() && has_path(inner_next, config_.grad_cache_path)) {
      const Array<S> ratio = swap_beta_ratio(with_next, with_prev);
      Results<S>& grads_node = inner_next.at(config_.grad_cache_path);
      for (auto& item : grads_node.items()) {
        const Array<S>& flat = std::get<Array<S>>(item.value());
        Shape kc_shape{replicas, chains};
        kc_shape.insert(kc_shape.end(), flat.shape().begin() + 1, flat.shape().end());
        Array<S> grid = reshape(flat, kc_shape);
        grid = exchange_rows(grid, with_next, with_prev);
        grid = grid * left_justified_expand_dims_to_rank(ratio, grid.rank());
        item.value() = reshape(grid, flat.shape());
      }
    }

    // (4) The beta = 1 replica is the reported chain state.
    std::vector<Array<S>> emitted;
    for (const auto& part : next_parts) emitted.push_back(take_leading(part, 0));

    Results<S> out = Results<S>::record({
        {"replica_states", Results<S>::leaf_list(next_parts)},
        {"inner_results", std::move(inner_next)},
        {"unscaled_tlp", Results<S>::leaf(std::move(unscaled))},
        {"is_swap_proposed", Results<S>::leaf(std::move(proposed))},
        {"is_swap_accepted", Results<S>::leaf(accepted)},
        {"swap_log_accept_ratio", Results<S>::leaf(std::move(log_alpha))},
        {"num_steps", Results<S>::leaf(Array<std::int64_t>(Shape{}, step + 1))},
    });
    return {ChainState<S>(std::move(emitted)), std::move(out)};
  }

 private:
  ChainState<S> flatten_state(const std::vector<Array<S>>& replica_parts) const {
    const Index replicas = num_replicas();
    ChainState<S> flat;
    for (const auto& part : replica_parts) {
      Shape shape{replicas * part.shape()[1]};
      shape.insert(shape.end(), part.shape().begin() + 2, part.shape().end());
      flat.parts.push_back(reshape(part, std::move(shape)));
    }
    return flat;
  }

  Array<S> unscaled_tlp_from_cache(const Results<S>& inner_results, Index chains) const {
    const Index replicas = num_replicas();
    const Array<S>& scaled = inner_results.template leaf_at<S>(config_.tlp_cache_path);
    if (scaled.shape() != Shape{replicas * chains}) {
      throw ContractError("remc: cached TLP at '" + config_.tlp_cache_path + "' has shape " +
                          shape_str(scaled.shape()) + ", expected [" +
                          std::to_string(replicas * chains) + "]");
    }
    const Array<S> grid = reshape(scaled, Shape{replicas, chains});
    return grid / left_justified_expand_dims_to_rank(config_.inverse_temperatures, 2);
  }

  static bool has_path(const Results<S>& node, const std::string& path) {
    try {
      (void)node.at(path);
      return true;
    } catch (const ContractError&) {
      return false;
    }
  }

  static void write_leaf(Results<S>& node, const std::string& path, Array<S> value) {
    node.at(path).value() = typename Results<S>::Leaf(std::move(value));
  }

  /// Lifts accepted [K-1, C] pair decisions onto [K, C] row masks:
  /// offset 0 marks rows swapping with the next replica, offset 1 rows
  /// swapping with the previous one.
  Mask embed_pair_rows(const Mask& accepted, Index replicas, Index offset) const {
    const Index chains = accepted.rank() == 2 ? accepted.shape()[1] : 0;
    Mask out(Shape{replicas, chains});
    for (Index k = 0; k + 1 < replicas; ++k) {
      for (Index c = 0; c < chains; ++c) {
        out[(k + offset) * chains + c] = accepted[k * chains + c];
      }
    }
    return out;
  }

  template <typename T>
  Array<T> exchange_rows(const Array<T>& grid, const Mask& with_next,
                         const Mask& with_prev) const {
    const Array<T> from_next = shift_leading(grid, +1);
    const Array<T> from_prev = shift_leading(grid, -1);
    const Mask next_pad = left_justified_expand_dims_to_rank(with_next, grid.rank());
    const Mask prev_pad = left_justified_expand_dims_to_rank(with_prev, grid.rank());
    return select(next_pad, from_next, select(prev_pad, from_prev, grid));
  }

  Array<S> swap_beta_ratio(const Mask& with_next, const Mask& with_prev) const {
    const Array<S>& betas = config_.inverse_temperatures;
    const Array<S> beta_next = shift_leading(betas, +1);
    const Array<S> beta_prev = shift_leading(betas, -1);
    const Array<S> ratio_next = betas / beta_next;  // row k keeps state from k+1
    const Array<S> ratio_prev = betas / beta_prev;
    const Index chains = with_next.shape()[1];
    const Shape grid_shape{betas.size(), chains};
    const Array<S> ones(grid_shape, S(1));
    return select(with_next,
                  broadcast_to(left_justified_expand_dims_to_rank(ratio_next, 2), grid_shape),
                  select(with_prev,
                         broadcast_to(left_justified_expand_dims_to_rank(ratio_prev, 2),
                                      grid_shape),
                         ones));
  }

  RemcConfig<S> config_;
  Target<S> flat_target_;
  KernelPtr<S> inner_;
};

template <typename S>
KernelPtr<S> replica_exchange_kernel(Target<S> base_target, RemcConfig<S> config) {
  return std::make_shared<ReplicaExchange<S>>(std::move(base_target), std::move(config));
}

}  // namespace batchmc
