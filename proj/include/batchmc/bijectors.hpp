// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Elementwise bijectors: smooth invertible maps with tractable log
// determinant Jacobians, used to reparameterize constrained or badly
// conditioned state spaces. All built-ins act elementwise, so the Jacobian
// is diagonal and the per-chain log determinant is the sum of elementwise
// log derivatives over the event dims. Domain violations produce NaN/inf
// elements rather than throwing; downstream accept/reject treats the
// resulting non-finite TLP as an auto-reject.

#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "batchmc/array.hpp"

namespace batchmc {

template <typename S>
class Bijector {
 public:
  virtual ~Bijector() = default;

  /// y (unconstrained) -> x (constrained), elementwise.
  virtual Array<S> forward(const Array<S>& y) const = 0;
  /// x -> y, elementwise.
  virtual Array<S> inverse(const Array<S>& x) const = 0;
  /// dx/dy elementwise (signed), for chain-rule gradients.
  virtual Array<S> forward_deriv(const Array<S>& y) const = 0;
  /// log |dx/dy| elementwise (reduce over event dims for the per-chain term).
  virtual Array<S> log_deriv(const Array<S>& y) const = 0;
  /// log |dy/dx| elementwise; equals -log_deriv(inverse(x)).
  virtual Array<S> inverse_log_deriv(const Array<S>& x) const = 0;
  /// d/dy of log_deriv, elementwise (for analytic pullback gradients).
  virtual Array<S> log_deriv_grad(const Array<S>& y) const = 0;
};

template <typename S>
using BijectorPtr = std::shared_ptr<const Bijector<S>>;

/// Per-chain forward log det Jacobian: sum of elementwise log derivatives
/// over event dims. y has shape [C, ...event]; the result is [C].
template <typename S>
Array<S> forward_log_det_jacobian(const Bijector<S>& bijector, const Array<S>& y) {
  return sum_over_event_dims(bijector.log_deriv(y));
}

template <typename S>
Array<S> inverse_log_det_jacobian(const Bijector<S>& bijector, const Array<S>& x) {
  return sum_over_event_dims(bijector.inverse_log_deriv(x));
}

namespace detail {

template <typename S>
class IdentityBijector final : public Bijector<S> {
 public:
  Array<S> forward(const Array<S>& y) const override { return y; }
  Array<S> inverse(const Array<S>& x) const override { return x; }
  Array<S> forward_deriv(const Array<S>& y) const override { return Array<S>(y.shape(), S(1)); }
  Array<S> log_deriv(const Array<S>& y) const override { return Array<S>(y.shape()); }
  Array<S> inverse_log_deriv(const Array<S>& x) const override { return Array<S>(x.shape()); }
  Array<S> log_deriv_grad(const Array<S>& y) const override { return Array<S>(y.shape()); }
};

template <typename S>
class ExpBijector final : public Bijector<S> {
 public:
  Array<S> forward(const Array<S>& y) const override { return exp(y); }
  Array<S> inverse(const Array<S>& x) const override { return log(x); }
  Array<S> forward_deriv(const Array<S>& y) const override { return exp(y); }
  Array<S> log_deriv(const Array<S>& y) const override { return y; }
  Array<S> inverse_log_deriv(const Array<S>& x) const override { return -log(x); }
  Array<S> log_deriv_grad(const Array<S>& y) const override {
    return Array<S>(y.shape(), S(1));
  }
};

template <typename S>
class AffineBijector final : public Bijector<S> {
 public:
  AffineBijector(S shift, S scale) : shift_(shift), scale_(scale) {
    if (scale == S(0)) throw ArgumentError("affine bijector: scale must be nonzero");
  }
  Array<S> forward(const Array<S>& y) const override { return y * scale_ + shift_; }
  Array<S> inverse(const Array<S>& x) const override { return (x - shift_) / scale_; }
  Array<S> forward_deriv(const Array<S>& y) const override {
    return Array<S>(y.shape(), scale_);
  }
  Array<S> log_deriv(const Array<S>& y) const override {
    return Array<S>(y.shape(), std::log(std::abs(scale_)));
  }
  Array<S> inverse_log_deriv(const Array<S>& x) const override {
    return Array<S>(x.shape(), -std::log(std::abs(scale_)));
  }
  Array<S> log_deriv_grad(const Array<S>& y) const override { return Array<S>(y.shape()); }

 private:
  S shift_;
  S scale_;
};

template <typename S>
class SoftplusBijector final : public Bijector<S> {
 public:
  Array<S> forward(const Array<S>& y) const override {
    // max(y, 0) + log1p(exp(-|y|)) is overflow-safe.
    return detail::apply_unary<S>(y, [](S v) {
      const S hi = v > S(0) ? v : S(0);
      return hi + std::log1p(std::exp(-std::abs(v)));
    });
  }
  Array<S> inverse(const Array<S>& x) const override {
    // y = x + log(1 - exp(-x)) for x > 0; NaN outside the range.
    return detail::apply_unary<S>(x, [](S v) {
      return v + std::log1p(-std::exp(-v));
    });
  }
  Array<S> forward_deriv(const Array<S>& y) const override {
    // sigmoid(y)
    return detail::apply_unary<S>(y, [](S v) { return S(1) / (S(1) + std::exp(-v)); });
  }
  Array<S> log_deriv(const Array<S>& y) const override {
    // log sigmoid(y) = -softplus(-y)
    return detail::apply_unary<S>(y, [](S v) {
      const S hi = -v > S(0) ? -v : S(0);
      return -(hi + std::log1p(std::exp(-std::abs(v))));
    });
  }
  Array<S> inverse_log_deriv(const Array<S>& x) const override {
    return -log_deriv(inverse(x));
  }
  Array<S> log_deriv_grad(const Array<S>& y) const override {
    // d/dy log sigmoid(y) = sigmoid(-y)
    return detail::apply_unary<S>(y, [](S v) { return S(1) / (S(1) + std::exp(v)); });
  }
};

}  // namespace detail

template <typename S>
BijectorPtr<S> identity_bijector() {
  return std::make_shared<detail::IdentityBijector<S>>();
}

template <typename S>
BijectorPtr<S> exp_bijector() {
  return std::make_shared<detail::ExpBijector<S>>();
}

template <typename S>
BijectorPtr<S> affine_bijector(S shift, S scale) {
  return std::make_shared<detail::AffineBijector<S>>(shift, scale);
}

template <typename S>
BijectorPtr<S> softplus_bijector() {
  return std::make_shared<detail::SoftplusBijector<S>>();
}

}  // namespace batchmc
