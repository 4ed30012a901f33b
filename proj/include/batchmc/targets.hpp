// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Built-in analytic targets. Every target is a single-part batched TLP with
// an analytic gradient and, where known, closed-form per-element moments.
// Dimension 1 uses a scalar event (part shape [C]); d > 1 uses part shape
// [C, d].

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "batchmc/array.hpp"
#include "batchmc/errors.hpp"
#include "batchmc/state.hpp"

namespace batchmc {

template <typename S>
struct BuiltinTarget {
  std::string name;
  Target<S> target;
  std::vector<Shape> event_shapes;              // one entry per part
  std::vector<Array<double>> analytic_mean;     // per part; empty if unknown
  std::vector<Array<double>> analytic_variance; // per part; empty if unknown
  S default_init{};                             // initial fill value for chains
};

namespace detail {

inline Shape event_shape_for_dim(Index d) {
  return d == 1 ? Shape{} : Shape{d};
}

/// Sum over event dims when the part is [C, d]; identity when [C].
template <typename S>
Array<S> reduce_event(const Array<S>& per_element) {
  return per_element.rank() <= 1 ? per_element : sum_over_event_dims(per_element);
}

}  // namespace detail

/// Isotropic standard normal: tlp(x) = -0.5 * sum(x^2).
template <typename S>
BuiltinTarget<S> make_std_normal(Index d) {
  if (d < 1) throw ConfigError("std_normal: dimension must be >= 1");
  BuiltinTarget<S> t;
  t.name = "std_normal";
  t.event_shapes = {detail::event_shape_for_dim(d)};
  t.target.log_prob = [](const ChainState<S>& state) {
    const auto& x = state.parts.at(0);
    return detail::reduce_event(x * x) * S(-0.5);
  };
  t.target.log_prob_with_grads = [](const ChainState<S>& state) {
    const auto& x = state.parts.at(0);
    TlpAndGrads<S> out;
    out.tlp = detail::reduce_event(x * x) * S(-0.5);
    out.grads = {-x};
    return out;
  };
  t.analytic_mean = {Array<double>(detail::event_shape_for_dim(d), 0.0)};
  t.analytic_variance = {Array<double>(detail::event_shape_for_dim(d), 1.0)};
  t.default_init = S(0);
  return t;
}

/// Diagonal normal with per-dimension loc and scale.
template <typename S>
BuiltinTarget<S> make_mvn_diag(std::vector<S> loc, std::vector<S> scale) {
  if (loc.size() != scale.size() || loc.empty()) {
    throw ConfigError("mvn_diag: loc and scale must be non-empty and equally sized");
  }
  for (S s : scale) {
    if (!(s > S(0))) throw ConfigError("mvn_diag: scale must be positive");
  }
  const Index d = static_cast<Index>(loc.size());
  const Shape ev = detail::event_shape_for_dim(d);
  Array<S> loc_arr = d == 1 ? Array<S>::scalar(loc[0]) : Array<S>::from_vector(loc);
  Array<S> scale_arr = d == 1 ? Array<S>::scalar(scale[0]) : Array<S>::from_vector(scale);
  BuiltinTarget<S> t;
  t.name = "mvn_diag";
  t.event_shapes = {ev};
  const Array<S> inv_var = Array<S>::scalar(S(1)) / (scale_arr * scale_arr);
  t.target.log_prob = [loc_arr, inv_var](const ChainState<S>& state) {
    const auto& x = state.parts.at(0);
    const auto z = x - loc_arr;
    return detail::reduce_event(z * z * inv_var) * S(-0.5);
  };
  t.target.log_prob_with_grads = [loc_arr, inv_var](const ChainState<S>& state) {
    const auto& x = state.parts.at(0);
    const auto z = x - loc_arr;
    TlpAndGrads<S> out;
    out.tlp = detail::reduce_event(z * z * inv_var) * S(-0.5);
    out.grads = {-(z * inv_var)};
    return out;
  };
  Array<double> mean(ev), var(ev);
  for (Index i = 0; i < d; ++i) {
    mean[i] = static_cast<double>(loc[static_cast<std::size_t>(i)]);
    var[i] = static_cast<double>(scale[static_cast<std::size_t>(i)]) *
             static_cast<double>(scale[static_cast<std::size_t>(i)]);
  }
  t.analytic_mean = {mean};
  t.analytic_variance = {var};
  t.default_init = S(0);
  return t;
}

/// 2-D zero-mean Gaussian with unit variances and correlation rho.
template <typename S>
BuiltinTarget<S> make_correlated_gaussian(S rho) {
  if (!(std::abs(static_cast<double>(rho)) < 1.0)) {
    throw ConfigError("correlated_gaussian: |rho| must be < 1");
  }
  BuiltinTarget<S> t;
  t.name = "correlated_gaussian";
  t.event_shapes = {Shape{2}};
  const S inv = S(1) / (S(1) - rho * rho);
  t.target.log_prob_with_grads = [rho, inv](const ChainState<S>& state) {
    const auto& x = state.parts.at(0);
    const Index chains = x.shape()[0];
    TlpAndGrads<S> out;
    out.tlp = Array<S>(Shape{chains});
    Array<S> grad(x.shape());
    for (Index c = 0; c < chains; ++c) {
      const S a = x[c * 2 + 0];
      const S b = x[c * 2 + 1];
      out.tlp[c] = S(-0.5) * inv * (a * a - S(2) * rho * a * b + b * b);
      grad[c * 2 + 0] = -inv * (a - rho * b);
      grad[c * 2 + 1] = -inv * (b - rho * a);
    }
    out.grads = {std::move(grad)};
    return out;
  };
  auto with_grads = t.target.log_prob_with_grads;
  t.target.log_prob = [with_grads](const ChainState<S>& state) { return with_grads(state).tlp; };
  t.analytic_mean = {Array<double>(Shape{2}, 0.0)};
  t.analytic_variance = {Array<double>(Shape{2}, 1.0)};
  t.default_init = S(0);
  return t;
}

/// Diagonal Gaussian whose variances span [1, kappa] geometrically.
template <typename S>
BuiltinTarget<S> make_ill_conditioned_gaussian(S kappa, Index d) {
  if (!(kappa >= S(1))) throw ConfigError("ill_conditioned_gaussian: kappa must be >= 1");
  if (d < 2) throw ConfigError("ill_conditioned_gaussian: dimension must be >= 2");
  std::vector<S> loc(static_cast<std::size_t>(d), S(0));
  std::vector<S> scale(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(d - 1);
    scale[static_cast<std::size_t>(i)] =
        static_cast<S>(std::sqrt(std::pow(static_cast<double>(kappa), frac)));
  }
  BuiltinTarget<S> t = make_mvn_diag<S>(std::move(loc), std::move(scale));
  t.name = "ill_conditioned_gaussian";
  return t;
}

/// Even mixture 0.5 N(-sep/2, 1) + 0.5 N(+sep/2, 1), independently per
/// dimension. Per-element mean 0 and variance 1 + (sep/2)^2.
template <typename S>
BuiltinTarget<S> make_bimodal_mixture(S sep, Index d) {
  if (!(sep > S(0))) throw ConfigError("bimodal_mixture: separation must be positive");
  if (d < 1) throw ConfigError("bimodal_mixture: dimension must be >= 1");
  const S m = sep / S(2);
  BuiltinTarget<S> t;
  t.name = "bimodal_mixture";
  t.event_shapes = {detail::event_shape_for_dim(d)};
  t.target.log_prob_with_grads = [m](const ChainState<S>& state) {
    const auto& x = state.parts.at(0);
    const Index chains = x.shape()[0];
    const Index ev = chains == 0 ? 0 : x.size() / chains;
    TlpAndGrads<S> out;
    out.tlp = Array<S>(Shape{chains});
    Array<S> grad(x.shape());
    for (Index c = 0; c < chains; ++c) {
      S acc{};
      for (Index e = 0; e < ev; ++e) {
        const S v = x[c * ev + e];
        const S a_plus = S(-0.5) * (v - m) * (v - m);
        const S a_minus = S(-0.5) * (v + m) * (v + m);
        const S hi = a_plus > a_minus ? a_plus : a_minus;
        acc += hi + std::log(std::exp(a_plus - hi) + std::exp(a_minus - hi));
        // responsibility of the +m component
        const S w_plus = S(1) / (S(1) + std::exp(a_minus - a_plus));
        grad[c * ev + e] = w_plus * (m - v) + (S(1) - w_plus) * (-m - v);
      }
      out.tlp[c] = acc;
    }
    out.grads = {std::move(grad)};
    return out;
  };
  auto with_grads = t.target.log_prob_with_grads;
  t.target.log_prob = [with_grads](const ChainState<S>& state) { return with_grads(state).tlp; };
  const Shape ev = detail::event_shape_for_dim(d);
  t.analytic_mean = {Array<double>(ev, 0.0)};
  t.analytic_variance = {
      Array<double>(ev, 1.0 + static_cast<double>(m) * static_cast<double>(m))};
  t.default_init = S(0);
  return t;
}

/// Posterior of the coin bias p under a uniform prior and h heads out of n
/// flips: the Beta(h+1, n-h+1) kernel, tlp(p) = h ln p + (n-h) ln(1-p) on
/// (0,1) and -inf outside.
template <typename S>
BuiltinTarget<S> make_coin_flip_posterior(Index heads, Index flips) {
  if (flips < 1 || heads < 0 || heads > flips) {
    throw ConfigError("coin_flip_posterior: need 0 <= heads <= flips, flips >= 1");
  }
  const S h = static_cast<S>(heads);
  const S tails = static_cast<S>(flips - heads);
  BuiltinTarget<S> t;
  t.name = "coin_flip_posterior";
  t.event_shapes = {Shape{}};
  t.target.log_prob_with_grads = [h, tails](const ChainState<S>& state) {
    const auto& p = state.parts.at(0);
    const Index chains = p.shape()[0];
    TlpAndGrads<S> out;
    out.tlp = Array<S>(Shape{chains});
    Array<S> grad(p.shape());
    const S neg_inf = -std::numeric_limits<S>::infinity();
    for (Index c = 0; c < chains; ++c) {
      const S v = p[c];
      if (v > S(0) && v < S(1)) {
        out.tlp[c] = h * std::log(v) + tails * std::log(S(1) - v);
        grad[c] = h / v - tails / (S(1) - v);
      } else {
        out.tlp[c] = neg_inf;
        grad[c] = S(0);
      }
    }
    out.grads = {std::move(grad)};
    return out;
  };
  auto with_grads = t.target.log_prob_with_grads;
  t.target.log_prob = [with_grads](const ChainState<S>& state) { return with_grads(state).tlp; };
  const double alpha = static_cast<double>(heads + 1);
  const double beta = static_cast<double>(flips - heads + 1);
  t.analytic_mean = {Array<double>::scalar(alpha / (alpha + beta))};
  t.analytic_variance = {Array<double>::scalar(
      alpha * beta / ((alpha + beta) * (alpha + beta) * (alpha + beta + 1.0)))};
  t.default_init = S(0.5);
  return t;
}

/// Zero-filled (or fill-valued) initial state with C chains for a target.
template <typename S>
ChainState<S> initial_state(const BuiltinTarget<S>& target, Index num_chains,
                            std::optional<S> fill = std::nullopt) {
  const S v = fill.value_or(target.default_init);
  std::vector<Array<S>> parts;
  for (const Shape& ev : target.event_shapes) {
    Shape shape{num_chains};
    shape.insert(shape.end(), ev.begin(), ev.end());
    parts.push_back(Array<S>(shape, v));
  }
  return ChainState<S>(std::move(parts));
}

}  // namespace batchmc
