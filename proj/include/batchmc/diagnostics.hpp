// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Convergence diagnostics over multi-chain sample arrays of shape
// [N draws, C chains, ...event], computed independently per event element.
//
// potential_scale_reduction: split R-hat. Each chain is halved (dropping
// the last draw when N is odd) into M = 2C sequences of length n; with W
// the mean within-sequence variance and B = n var(sequence means),
// r_hat = sqrt(((n-1)/n W + B/n) / W).
//
// effective_sample_size: ess = N C / (1 + 2 sum_t rho_t) with the
// cross-chain variogram estimate rho_t = 1 - V_t / (2 var_plus) over the
// same split sequences, truncated by Geyer's initial monotone positive
// sequence rule: stop at the first negative adjacent-pair sum and enforce
// non-increasing pair sums. Antithetic chains can push the truncated sum
// to zero or below; the denominator is floored at a tiny positive value so
// such chains report a huge ESS and raise the super-efficiency flag
// instead of a nonsensical negative count.

#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "batchmc/array.hpp"

namespace batchmc {

struct PsrfResult {
  Array<double> r_hat;  // event-shaped
  Mask degenerate;      // zero within-chain variance
};

struct EssResult {
  Array<double> ess;     // event-shaped
  Mask degenerate;       // constant samples: ess reported as 0
  Mask super_efficient;  // ess > 1.25 * N * C
};

struct PooledMoments {
  Array<double> mean;
  Array<double> variance;  // unbiased over all draws and chains
};

namespace detail {

struct SplitStats {
  Index sequences = 0;      // M = 2C
  Index length = 0;         // n = floor(N/2)
  double within = 0.0;      // W
  double between = 0.0;     // B
  double var_plus = 0.0;    // (n-1)/n W + B/n
};

/// Accessor for one event element: value(draw, chain).
template <typename S>
struct EventSeries {
  const Array<S>* samples;
  Index chains;
  Index event_size;
  Index element;
  double operator()(Index draw, Index chain) const {
    return static_cast<double>(
        (*samples)[(draw * chains + chain) * event_size + element]);
  }
};

template <typename S>
SplitStats split_chain_stats(const EventSeries<S>& x, Index draws, Index chains) {
  SplitStats stats;
  stats.length = draws / 2;
  stats.sequences = 2 * chains;
  const Index n = stats.length;
  if (n < 2 || stats.sequences < 2) return stats;

  std::vector<double> means(static_cast<std::size_t>(stats.sequences));
  std::vector<double> vars(static_cast<std::size_t>(stats.sequences));
  for (Index m = 0; m < stats.sequences; ++m) {
    const Index chain = m % chains;
    const Index offset = (m / chains) * n;
    double mean = 0.0;
    for (Index i = 0; i < n; ++i) mean += x(offset + i, chain);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double d = x(offset + i, chain) - mean;
      ss += d * d;
    }
    means[static_cast<std::size_t>(m)] = mean;
    vars[static_cast<std::size_t>(m)] = ss / static_cast<double>(n - 1);
  }
  double w = 0.0;
  for (double v : vars) w += v;
  w /= static_cast<double>(stats.sequences);
  double grand = 0.0;
  for (double m : means) grand += m;
  grand /= static_cast<double>(stats.sequences);
  double bss = 0.0;
  for (double m : means) bss += (m - grand) * (m - grand);
  const double b =
      static_cast<double>(n) * bss / static_cast<double>(stats.sequences - 1);
  stats.within = w;
  stats.between = b;
  stats.var_plus = (static_cast<double>(n - 1) / static_cast<double>(n)) * w +
                   b / static_cast<double>(n);
  return stats;
}

/// Variogram estimate of the lag-t autocorrelation over split sequences.
template <typename S>
double variogram_rho(const EventSeries<S>& x, const SplitStats& stats, Index chains, Index t) {
  const Index n = stats.length;
  double v = 0.0;
  for (Index m = 0; m < stats.sequences; ++m) {
    const Index chain = m % chains;
    const Index offset = (m / chains) * n;
    for (Index i = t; i < n; ++i) {
      const double d = x(offset + i, chain) - x(offset + i - t, chain);
      v += d * d;
    }
  }
  v /= static_cast<double>(stats.sequences) * static_cast<double>(n - t);
  return 1.0 - v / (2.0 * stats.var_plus);
}

}  // namespace detail

template <typename S>
void validate_sample_batch(const Array<S>& samples, Index min_draws) {
  if (samples.rank() < 2) {
    throw ShapeError("diagnostics: samples must be [draws, chains, ...event], got " +
                     shape_str(samples.shape()));
  }
  if (samples.shape()[0] < min_draws) {
    throw ArgumentError("diagnostics: need at least " + std::to_string(min_draws) +
                        " draws, got " + std::to_string(samples.shape()[0]));
  }
  if (samples.shape()[1] < 1) throw ArgumentError("diagnostics: need at least one chain");
}

template <typename S>
PsrfResult potential_scale_reduction(const Array<S>& samples) {
  validate_sample_batch(samples, 4);
  const Index draws = samples.shape()[0];
  const Index chains = samples.shape()[1];
  const Shape event(samples.shape().begin() + 2, samples.shape().end());
  const Index event_size = shape_size(event);

  PsrfResult out{Array<double>(event), Mask(event)};
  for (Index e = 0; e < event_size; ++e) {
    const detail::EventSeries<S> x{&samples, chains, event_size, e};
    const auto stats = detail::split_chain_stats(x, draws, chains);
    if (stats.within == 0.0) {
      out.r_hat[e] = std::numeric_limits<double>::infinity();
      out.degenerate[e] = 1;
    } else {
      out.r_hat[e] = std::sqrt(stats.var_plus / stats.within);
    }
  }
  return out;
}

template <typename S>
EssResult effective_sample_size(const Array<S>& samples) {
  validate_sample_batch(samples, 4);
  const Index draws = samples.shape()[0];
  const Index chains = samples.shape()[1];
  const Shape event(samples.shape().begin() + 2, samples.shape().end());
  const Index event_size = shape_size(event);
  const double total = static_cast<double>(draws) * static_cast<double>(chains);

  EssResult out{Array<double>(event), Mask(event), Mask(event)};
  for (Index e = 0; e < event_size; ++e) {
    const detail::EventSeries<S> x{&samples, chains, event_size, e};
    const auto stats = detail::split_chain_stats(x, draws, chains);
    if (!(stats.var_plus > 0.0)) {
      out.ess[e] = 0.0;
      out.degenerate[e] = 1;
      continue;
    }
    const Index n = stats.length;
    // Adjacent pair sums of rho_t starting at (rho_0 = 1) + rho_1; stop at
    // the first negative sum, enforcing a non-increasing sequence.
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (Index k = 0; 2 * k + 1 < n; ++k) {
      const double rho_even =
          k == 0 ? 1.0 : detail::variogram_rho(x, stats, chains, 2 * k);
      const double rho_odd = detail::variogram_rho(x, stats, chains, 2 * k + 1);
      double pair = rho_even + rho_odd;
      if (pair < 0.0) break;
      if (pair > prev_pair) pair = prev_pair;
      prev_pair = pair;
      tau += 2.0 * pair;
    }
    const double floored_tau = tau > 1e-12 ? tau : 1e-12;
    const double ess = static_cast<double>(stats.sequences) *
                       static_cast<double>(stats.length) / floored_tau;
    out.ess[e] = ess;
    out.super_efficient[e] = ess > 1.25 * total ? 1 : 0;
  }
  return out;
}

template <typename S>
PooledMoments pooled_moments(const Array<S>& samples) {
  validate_sample_batch(samples, 2);
  const Index draws = samples.shape()[0];
  const Index chains = samples.shape()[1];
  const Shape event(samples.shape().begin() + 2, samples.shape().end());
  const Index event_size = shape_size(event);
  const double total = static_cast<double>(draws) * static_cast<double>(chains);

  PooledMoments out{Array<double>(event), Array<double>(event)};
  for (Index e = 0; e < event_size; ++e) {
    const detail::EventSeries<S> x{&samples, chains, event_size, e};
    double mean = 0.0;
    for (Index i = 0; i < draws; ++i) {
      for (Index c = 0; c < chains; ++c) mean += x(i, c);
    }
    mean /= total;
    double ss = 0.0;
    for (Index i = 0; i < draws; ++i) {
      for (Index c = 0; c < chains; ++c) {
        const double d = x(i, c) - mean;
        ss += d * d;
      }
    }
    out.mean[e] = mean;
    out.variance[e] = total > 1.0 ? ss / (total - 1.0) : 0.0;
  }
  return out;
}

}  // namespace batchmc
