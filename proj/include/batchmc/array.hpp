// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense n-dimensional arrays with right-aligned (NumPy-style) broadcasting.
// An Array is the value type every sampler in this library advances: the
// leading axis indexes independent chains, trailing axes are event
// dimensions. Identically shaped arithmetic runs through Eigen maps;
// transcendentals and reductions use fixed left-to-right loops so that
// results never depend on memory layout, alignment, or batch extent.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "batchmc/errors.hpp"

namespace batchmc {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index extent : shape) n *= extent;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
class Array {
 public:
  /// Rank-0 scalar holding T{}.
  Array() : data_(1, T{}) {}

  explicit Array(Shape shape, T fill = T{}) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(static_cast<std::size_t>(shape_size(shape_)), fill);
  }

  static Array scalar(T value) {
    Array a;
    a.data_[0] = value;
    return a;
  }

  static Array from_vector(std::vector<T> values) {
    Array a;
    a.shape_ = {static_cast<Index>(values.size())};
    a.data_ = std::move(values);
    return a;
  }

  static Array from_data(Shape shape, std::vector<T> values) {
    check_extents(shape);
    if (shape_size(shape) != static_cast<Index>(values.size())) {
      throw ShapeError("from_data: shape " + shape_str(shape) + " expects " +
                       std::to_string(shape_size(shape)) + " elements, got " +
                       std::to_string(values.size()));
    }
    Array a;
    a.shape_ = std::move(shape);
    a.data_ = std::move(values);
    return a;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return static_cast<Index>(data_.size()); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return {data_.data(), data_.size()}; }
  std::span<const T> values() const { return {data_.data(), data_.size()}; }

  T& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Multi-index access (row-major), mostly for tests and small fixtures.
  T& at(std::initializer_list<Index> idx) { return data_[offset_of(idx)]; }
  const T& at(std::initializer_list<Index> idx) const { return data_[offset_of(idx)]; }

  /// Flat Eigen view of the storage. Used for identically shaped arithmetic.
  auto vec() {
    return Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>(data_.data(),
                                                          static_cast<Eigen::Index>(data_.size()));
  }
  auto vec() const {
    return Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(
        data_.data(), static_cast<Eigen::Index>(data_.size()));
  }

  friend bool operator==(const Array& a, const Array& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static void check_extents(const Shape& shape) {
    for (Index extent : shape) {
      if (extent < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    }
  }

  std::size_t offset_of(std::initializer_list<Index> idx) const {
    if (static_cast<Index>(idx.size()) != rank()) {
      throw ShapeError("index rank " + std::to_string(idx.size()) + " vs array rank " +
                       std::to_string(rank()));
    }
    Index off = 0;
    Index axis = 0;
    for (Index i : idx) {
      if (i < 0 || i >= shape_[axis]) {
        throw ShapeError("index out of range on axis " + std::to_string(axis));
      }
      off = off * shape_[axis] + i;
      ++axis;
    }
    return static_cast<std::size_t>(off);
  }

  Shape shape_;
  std::vector<T> data_;
};

/// Boolean arrays store 0/1 in bytes.
using Mask = Array<std::uint8_t>;

// --------------------------------------------------------------------------
// Broadcasting
// --------------------------------------------------------------------------

/// Right-aligned broadcast of two shapes; throws ShapeError if incompatible.
inline Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const Index ra = static_cast<Index>(a.size());
  const Index rb = static_cast<Index>(b.size());
  const Index r = std::max(ra, rb);
  Shape out(static_cast<std::size_t>(r), 1);
  for (Index i = 0; i < r; ++i) {
    const Index ea = i < ra ? a[ra - 1 - i] : 1;
    const Index eb = i < rb ? b[rb - 1 - i] : 1;
    Index e;
    if (ea == eb) {
      e = ea;
    } else if (ea == 1) {
      e = eb;
    } else if (eb == 1) {
      e = ea;
    } else {
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[r - 1 - i] = e;
  }
  return out;
}

namespace detail {

inline std::vector<Index> row_major_strides(const Shape& shape) {
  std::vector<Index> strides(shape.size(), 0);
  Index stride = 1;
  for (Index i = static_cast<Index>(shape.size()) - 1; i >= 0; --i) {
    strides[i] = stride;
    stride *= shape[i];
  }
  return strides;
}

/// Strides of `in` aligned to broadcast target `out`; 0 on broadcast axes.
inline std::vector<Index> broadcast_strides(const Shape& in, const Shape& out) {
  const Index rin = static_cast<Index>(in.size());
  const Index rout = static_cast<Index>(out.size());
  std::vector<Index> in_strides = row_major_strides(in);
  std::vector<Index> strides(static_cast<std::size_t>(rout), 0);
  for (Index i = 0; i < rin; ++i) {
    const Index out_axis = rout - 1 - i;
    const Index in_axis = rin - 1 - i;
    if (in[in_axis] == out[out_axis]) {
      strides[out_axis] = in[in_axis] == 1 ? 0 : in_strides[in_axis];
    } else if (in[in_axis] == 1) {
      strides[out_axis] = 0;
    } else {
      throw ShapeError("cannot broadcast " + shape_str(in) + " to " + shape_str(out));
    }
  }
  return strides;
}

/// Row-major iteration over `out`, maintaining one flat offset per operand.
/// body(flat_output_index, offsets_span) is invoked once per element.
template <typename F>
void for_each_broadcast(const Shape& out, std::span<const std::vector<Index>> strides, F&& body) {
  const Index n = shape_size(out);
  if (n == 0) return;
  const Index rank = static_cast<Index>(out.size());
  std::vector<Index> counters(static_cast<std::size_t>(rank), 0);
  std::vector<Index> offsets(strides.size(), 0);
  for (Index linear = 0;;) {
    body(linear, std::span<const Index>(offsets));
    if (++linear == n) break;
    for (Index axis = rank - 1; axis >= 0; --axis) {
      ++counters[axis];
      for (std::size_t op = 0; op < strides.size(); ++op) offsets[op] += strides[op][axis];
      if (counters[axis] < out[axis]) break;
      for (std::size_t op = 0; op < strides.size(); ++op) {
        offsets[op] -= strides[op][axis] * out[axis];
      }
      counters[axis] = 0;
    }
  }
}

template <typename R, typename A, typename F>
Array<R> apply_unary(const Array<A>& a, F&& f) {
  Array<R> out(a.shape());
  const A* pa = a.data();
  R* po = out.data();
  const Index n = a.size();
  for (Index i = 0; i < n; ++i) po[i] = f(pa[i]);
  return out;
}

template <typename R, typename A, typename B, typename F>
Array<R> apply_binary(const Array<A>& a, const Array<B>& b, F&& f) {
  if (a.shape() == b.shape()) {
    Array<R> out(a.shape());
    const A* pa = a.data();
    const B* pb = b.data();
    R* po = out.data();
    const Index n = a.size();
    for (Index i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  const Shape shape = broadcast_shapes(a.shape(), b.shape());
  Array<R> out(shape);
  const std::vector<Index> strides[2] = {broadcast_strides(a.shape(), shape),
                                         broadcast_strides(b.shape(), shape)};
  const A* pa = a.data();
  const B* pb = b.data();
  R* po = out.data();
  for_each_broadcast(shape, strides, [&](Index i, std::span<const Index> off) {
    po[i] = f(pa[off[0]], pb[off[1]]);
  });
  return out;
}

template <typename R, typename A, typename B, typename C, typename F>
Array<R> apply_ternary(const Array<A>& a, const Array<B>& b, const Array<C>& c, F&& f) {
  if (a.shape() == b.shape() && b.shape() == c.shape()) {
    Array<R> out(a.shape());
    R* po = out.data();
    const Index n = a.size();
    for (Index i = 0; i < n; ++i) po[i] = f(a[i], b[i], c[i]);
    return out;
  }
  Shape shape = broadcast_shapes(broadcast_shapes(a.shape(), b.shape()), c.shape());
  Array<R> out(shape);
  const std::vector<Index> strides[3] = {broadcast_strides(a.shape(), shape),
                                         broadcast_strides(b.shape(), shape),
                                         broadcast_strides(c.shape(), shape)};
  const A* pa = a.data();
  const B* pb = b.data();
  const C* pc = c.data();
  R* po = out.data();
  for_each_broadcast(shape, strides, [&](Index i, std::span<const Index> off) {
    po[i] = f(pa[off[0]], pb[off[1]], pc[off[2]]);
  });
  return out;
}

}  // namespace detail

// --------------------------------------------------------------------------
// Elementwise arithmetic (broadcasting). Same-shape +,-,*,/ go through Eigen.
// --------------------------------------------------------------------------

#define BATCHMC_DEFINE_ARITH(op, eig)                                              \
  template <typename T>                                                            \
  Array<T> operator op(const Array<T>& a, const Array<T>& b) {                     \
    if (a.shape() == b.shape()) {                                                  \
      Array<T> out(a.shape());                                                     \
      out.vec() = a.vec() eig b.vec();                                             \
      return out;                                                                  \
    }                                                                              \
    return detail::apply_binary<T>(a, b, [](T x, T y) { return x op y; });         \
  }                                                                                \
  template <typename T>                                                            \
  Array<T> operator op(const Array<T>& a, T s) {                                   \
    Array<T> out(a.shape());                                                       \
    out.vec() = a.vec() eig s;                                                     \
    return out;                                                                    \
  }                                                                                \
  template <typename T>                                                            \
  Array<T> operator op(T s, const Array<T>& a) {                                   \
    return detail::apply_unary<T>(a, [s](T x) { return s op x; });                 \
  }

BATCHMC_DEFINE_ARITH(+, +)
BATCHMC_DEFINE_ARITH(-, -)
BATCHMC_DEFINE_ARITH(*, *)
BATCHMC_DEFINE_ARITH(/, /)
#undef BATCHMC_DEFINE_ARITH

template <typename T>
Array<T> operator-(const Array<T>& a) {
  return detail::apply_unary<T>(a, [](T x) { return -x; });
}

template <typename T>
Array<T> exp(const Array<T>& a) {
  return detail::apply_unary<T>(a, [](T x) { return std::exp(x); });
}

template <typename T>
Array<T> log(const Array<T>& a) {
  return detail::apply_unary<T>(a, [](T x) { return std::log(x); });
}

template <typename T>
Array<T> log1p(const Array<T>& a) {
  return detail::apply_unary<T>(a, [](T x) { return std::log1p(x); });
}

template <typename T>
Array<T> sqrt(const Array<T>& a) {
  return detail::apply_unary<T>(a, [](T x) { return std::sqrt(x); });
}

template <typename T>
Array<T> abs(const Array<T>& a) {
  return detail::apply_unary<T>(a, [](T x) { return std::abs(x); });
}

template <typename T>
Array<T> floor(const Array<T>& a) {
  return detail::apply_unary<T>(a, [](T x) { return std::floor(x); });
}

/// Elementwise x < y ? x : y. NaN operands resolve to y (compare is false);
/// sanitize NaN before calling where the distinction matters.
template <typename T>
Array<T> minimum(const Array<T>& a, const Array<T>& b) {
  return detail::apply_binary<T>(a, b, [](T x, T y) { return x < y ? x : y; });
}

template <typename T>
Array<T> minimum(const Array<T>& a, T s) {
  return detail::apply_unary<T>(a, [s](T x) { return x < s ? x : s; });
}

template <typename T>
Array<T> maximum(const Array<T>& a, const Array<T>& b) {
  return detail::apply_binary<T>(a, b, [](T x, T y) { return x > y ? x : y; });
}

template <typename T>
Array<T> maximum(const Array<T>& a, T s) {
  return detail::apply_unary<T>(a, [s](T x) { return x > s ? x : s; });
}

/// Numerically stable elementwise log(exp(a) + exp(b)).
template <typename T>
Array<T> log_add_exp(const Array<T>& a, const Array<T>& b) {
  return detail::apply_binary<T>(a, b, [](T x, T y) {
    const T m = x > y ? x : y;
    if (m == -std::numeric_limits<T>::infinity()) return m;
    return m + std::log(std::exp(x - m) + std::exp(y - m));
  });
}

template <typename R, typename T>
Array<R> cast(const Array<T>& a) {
  return detail::apply_unary<R>(a, [](T x) { return static_cast<R>(x); });
}

// --------------------------------------------------------------------------
// Comparisons and masks
// --------------------------------------------------------------------------

#define BATCHMC_DEFINE_CMP(name, op)                                                       \
  template <typename T>                                                                    \
  Mask name(const Array<T>& a, const Array<T>& b) {                                        \
    return detail::apply_binary<std::uint8_t>(                                             \
        a, b, [](T x, T y) { return static_cast<std::uint8_t>(x op y); });                 \
  }                                                                                        \
  template <typename T>                                                                    \
  Mask name(const Array<T>& a, T s) {                                                      \
    return detail::apply_unary<std::uint8_t>(a,                                            \
                                             [s](T x) { return static_cast<std::uint8_t>(x op s); }); \
  }

BATCHMC_DEFINE_CMP(less, <)
BATCHMC_DEFINE_CMP(less_equal, <=)
BATCHMC_DEFINE_CMP(greater, >)
BATCHMC_DEFINE_CMP(greater_equal, >=)
BATCHMC_DEFINE_CMP(equal, ==)
#undef BATCHMC_DEFINE_CMP

template <typename T>
Mask isnan_mask(const Array<T>& a) {
  return detail::apply_unary<std::uint8_t>(
      a, [](T x) { return static_cast<std::uint8_t>(std::isnan(x)); });
}

template <typename T>
Mask isfinite_mask(const Array<T>& a) {
  return detail::apply_unary<std::uint8_t>(
      a, [](T x) { return static_cast<std::uint8_t>(std::isfinite(x)); });
}

inline Mask mask_and(const Mask& a, const Mask& b) {
  return detail::apply_binary<std::uint8_t>(
      a, b, [](std::uint8_t x, std::uint8_t y) { return static_cast<std::uint8_t>(x && y); });
}

inline Mask mask_or(const Mask& a, const Mask& b) {
  return detail::apply_binary<std::uint8_t>(
      a, b, [](std::uint8_t x, std::uint8_t y) { return static_cast<std::uint8_t>(x || y); });
}

inline Mask mask_not(const Mask& a) {
  return detail::apply_unary<std::uint8_t>(a,
                                           [](std::uint8_t x) { return static_cast<std::uint8_t>(!x); });
}

inline Mask operator&(const Mask& a, const Mask& b) { return mask_and(a, b); }
inline Mask operator|(const Mask& a, const Mask& b) { return mask_or(a, b); }
inline Mask operator~(const Mask& a) { return mask_not(a); }

inline bool any(const Mask& m) {
  for (std::uint8_t v : m.values()) {
    if (v) return true;
  }
  return false;
}

inline bool all(const Mask& m) {
  for (std::uint8_t v : m.values()) {
    if (!v) return false;
  }
  return true;
}

/// Elementwise mask ? on_true : on_false over the broadcast shape. Both
/// branches are always fully materialized.
template <typename T>
Array<T> select(const Mask& mask, const Array<T>& on_true, const Array<T>& on_false) {
  return detail::apply_ternary<T>(mask, on_true, on_false,
                                  [](std::uint8_t m, T x, T y) { return m ? x : y; });
}

// --------------------------------------------------------------------------
// Reductions. All reductions run in a fixed left-to-right order; none of
// them ever touches the leading chain axis implicitly.
// --------------------------------------------------------------------------

template <typename T>
T sum_all(const Array<T>& a) {
  T acc{};
  for (const T& v : a.values()) acc += v;
  return acc;
}

template <typename T>
T mean_all(const Array<T>& a) {
  if (a.size() == 0) throw ShapeError("mean_all of empty array");
  return sum_all(a) / static_cast<T>(a.size());
}

template <typename T>
T min_all(const Array<T>& a) {
  if (a.size() == 0) throw ShapeError("min_all of empty array");
  T acc = a[0];
  for (const T& v : a.values()) acc = v < acc ? v : acc;
  return acc;
}

template <typename T>
T max_all(const Array<T>& a) {
  if (a.size() == 0) throw ShapeError("max_all of empty array");
  T acc = a[0];
  for (const T& v : a.values()) acc = v > acc ? v : acc;
  return acc;
}

/// Sum over the trailing axis: [..., n] -> [...].
template <typename T>
Array<T> sum_last_axis(const Array<T>& a) {
  if (a.rank() == 0) throw ShapeError("sum_last_axis requires rank >= 1");
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  const Index n = a.shape().back();
  Array<T> out(out_shape);
  const T* p = a.data();
  for (Index r = 0; r < out.size(); ++r) {
    T acc{};
    for (Index i = 0; i < n; ++i) acc += p[r * n + i];
    out[r] = acc;
  }
  return out;
}

/// Max over the trailing axis: [..., n] -> [...]. Requires n >= 1.
template <typename T>
Array<T> max_last_axis(const Array<T>& a) {
  if (a.rank() == 0) throw ShapeError("max_last_axis requires rank >= 1");
  const Index n = a.shape().back();
  if (n == 0) throw ShapeError("max_last_axis over empty axis");
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  Array<T> out(out_shape);
  const T* p = a.data();
  for (Index r = 0; r < out.size(); ++r) {
    T acc = p[r * n];
    for (Index i = 1; i < n; ++i) acc = p[r * n + i] > acc ? p[r * n + i] : acc;
    out[r] = acc;
  }
  return out;
}

/// Sum over every axis except the leading chain axis: [C, ...] -> [C].
template <typename T>
Array<T> sum_over_event_dims(const Array<T>& a) {
  if (a.rank() < 1) throw ShapeError("sum_over_event_dims requires rank >= 1");
  const Index chains = a.shape()[0];
  const Index ev = chains == 0 ? 0 : a.size() / chains;
  Array<T> out(Shape{chains});
  const T* p = a.data();
  for (Index c = 0; c < chains; ++c) {
    T acc{};
    for (Index i = 0; i < ev; ++i) acc += p[c * ev + i];
    out[c] = acc;
  }
  return out;
}

/// OR over every axis except the leading chain axis: [C, ...] -> [C].
inline Mask any_over_event_dims(const Mask& a) {
  if (a.rank() < 1) throw ShapeError("any_over_event_dims requires rank >= 1");
  const Index chains = a.shape()[0];
  const Index ev = chains == 0 ? 0 : a.size() / chains;
  Mask out(Shape{chains});
  const std::uint8_t* p = a.data();
  for (Index c = 0; c < chains; ++c) {
    std::uint8_t acc = 0;
    for (Index i = 0; i < ev; ++i) acc = static_cast<std::uint8_t>(acc || p[c * ev + i]);
    out[c] = acc;
  }
  return out;
}

/// Elementwise sum over event dims of a*b for identically shaped arrays:
/// [C, ...] x [C, ...] -> [C]. The accumulation order is fixed row-major.
template <typename T>
Array<T> dot_over_event_dims(const Array<T>& a, const Array<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("dot_over_event_dims: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  if (a.rank() < 1) throw ShapeError("dot_over_event_dims requires rank >= 1");
  const Index chains = a.shape()[0];
  const Index ev = chains == 0 ? 0 : a.size() / chains;
  Array<T> out(Shape{chains});
  const T* pa = a.data();
  const T* pb = b.data();
  for (Index c = 0; c < chains; ++c) {
    T acc{};
    for (Index i = 0; i < ev; ++i) acc += pa[c * ev + i] * pb[c * ev + i];
    out[c] = acc;
  }
  return out;
}

/// Numerically stable log sum exp along `axis` (negative axes allowed).
/// All-(-inf) slices reduce to -inf.
template <typename T>
Array<T> log_sum_exp(const Array<T>& a, Index axis) {
  const Index r = a.rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("log_sum_exp: axis out of range for " + shape_str(a.shape()));
  }
  Shape out_shape;
  for (Index i = 0; i < r; ++i) {
    if (i != axis) out_shape.push_back(a.shape()[i]);
  }
  const Index n = a.shape()[axis];
  Index inner = 1;
  for (Index i = axis + 1; i < r; ++i) inner *= a.shape()[i];
  Index outer = 1;
  for (Index i = 0; i < axis; ++i) outer *= a.shape()[i];
  Array<T> out(out_shape);
  const T* p = a.data();
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (Index o = 0; o < outer; ++o) {
    for (Index in = 0; in < inner; ++in) {
      T m = neg_inf;
      for (Index k = 0; k < n; ++k) {
        const T v = p[(o * n + k) * inner + in];
        if (std::isnan(v)) {
          m = v;
          break;
        }
        m = v > m ? v : m;
      }
      T result;
      if (std::isnan(m) || m == neg_inf) {
        result = m;
      } else {
        T acc{};
        for (Index k = 0; k < n; ++k) acc += std::exp(p[(o * n + k) * inner + in] - m);
        result = m + std::log(acc);
      }
      out[o * inner + in] = result;
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Shape manipulation
// --------------------------------------------------------------------------

/// Row-major reinterpretation with identical element count.
template <typename T>
Array<T> reshape(const Array<T>& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  }
  return Array<T>::from_data(std::move(shape), std::vector<T>(a.values().begin(), a.values().end()));
}

/// Pad the shape of `a` on the right with 1s until it has `rank` axes.
/// Element values and count are unchanged; the result broadcasts against
/// higher-rank arrays along the leading (left-justified) axes.
template <typename T>
Array<T> left_justified_expand_dims_to_rank(const Array<T>& a, Index rank) {
  if (a.rank() > rank) {
    throw ShapeError("left_justified_expand_dims: rank " + std::to_string(a.rank()) +
                     " exceeds target rank " + std::to_string(rank));
  }
  Shape shape = a.shape();
  shape.resize(static_cast<std::size_t>(rank), 1);
  return reshape(a, std::move(shape));
}

template <typename T, typename U>
Array<T> left_justified_expand_dims_like(const Array<T>& a, const Array<U>& reference) {
  return left_justified_expand_dims_to_rank(a, reference.rank());
}

/// Materialize `a` broadcast to `shape`.
template <typename T>
Array<T> broadcast_to(const Array<T>& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  Array<T> out(shape);
  const std::vector<Index> strides[1] = {detail::broadcast_strides(a.shape(), shape)};
  const T* pa = a.data();
  T* po = out.data();
  detail::for_each_broadcast(shape, strides,
                             [&](Index i, std::span<const Index> off) { po[i] = pa[off[0]]; });
  return out;
}

/// Slice index i of the leading axis: [K, ...] -> [...].
template <typename T>
Array<T> take_leading(const Array<T>& a, Index i) {
  if (a.rank() < 1 || i < 0 || i >= a.shape()[0]) {
    throw ShapeError("take_leading: index " + std::to_string(i) + " for " + shape_str(a.shape()));
  }
  Shape out_shape(a.shape().begin() + 1, a.shape().end());
  const Index block = shape_size(out_shape);
  std::vector<T> values(a.values().begin() + i * block, a.values().begin() + (i + 1) * block);
  return Array<T>::from_data(std::move(out_shape), std::move(values));
}

/// Rows begin..end-1 of the leading axis.
template <typename T>
Array<T> slice_leading(const Array<T>& a, Index begin, Index end) {
  if (a.rank() < 1 || begin < 0 || end < begin || end > a.shape()[0]) {
    throw ShapeError("slice_leading: [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") for " + shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[0] = end - begin;
  const Index block = a.shape()[0] == 0 ? 0 : a.size() / a.shape()[0];
  std::vector<T> values(a.values().begin() + begin * block, a.values().begin() + end * block);
  return Array<T>::from_data(std::move(out_shape), std::move(values));
}

/// Repeat `a` K times along a new leading axis: [...] -> [K, ...].
template <typename T>
Array<T> tile_leading(const Array<T>& a, Index k) {
  if (k < 0) throw ShapeError("tile_leading: negative count");
  Shape out_shape;
  out_shape.push_back(k);
  out_shape.insert(out_shape.end(), a.shape().begin(), a.shape().end());
  Array<T> out(out_shape);
  const Index block = a.size();
  for (Index r = 0; r < k; ++r) {
    std::copy_n(a.data(), block, out.data() + r * block);
  }
  return out;
}

/// Shift along the leading axis with edge clamping: out[k] = a[clamp(k+offset)].
template <typename T>
Array<T> shift_leading(const Array<T>& a, Index offset) {
  if (a.rank() < 1) throw ShapeError("shift_leading requires rank >= 1");
  const Index k = a.shape()[0];
  const Index block = k == 0 ? 0 : a.size() / k;
  Array<T> out(a.shape());
  for (Index r = 0; r < k; ++r) {
    Index src = std::clamp<Index>(r + offset, 0, k - 1);
    std::copy_n(a.data() + src * block, block, out.data() + r * block);
  }
  return out;
}

/// dst[i, ...] = src, where dst is [N, ...] and src is [...].
template <typename T>
void copy_into_leading_slice(Array<T>& dst, Index i, const Array<T>& src) {
  if (dst.rank() < 1 || i < 0 || i >= dst.shape()[0]) {
    throw ShapeError("copy_into_leading_slice: index " + std::to_string(i) + " for " +
                     shape_str(dst.shape()));
  }
  Shape expect(dst.shape().begin() + 1, dst.shape().end());
  if (src.shape() != expect) {
    throw ShapeError("copy_into_leading_slice: slice shape " + shape_str(src.shape()) +
                     " vs expected " + shape_str(expect));
  }
  std::copy_n(src.data(), src.size(), dst.data() + i * src.size());
}

/// Exact (bitwise) equality of shape and payload, distinguishing -0.0 and NaN.
template <typename T>
bool bitwise_equal(const Array<T>& a, const Array<T>& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(T) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace batchmc
