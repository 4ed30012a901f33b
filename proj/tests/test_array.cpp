// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "batchmc/array.hpp"
#include "batchmc/random.hpp"

using namespace batchmc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Scalar reference for broadcasting: resolves one output index against an
// input shape by right-aligned rules.
double broadcast_ref_at(const Array<double>& a, const Shape& out, Index flat) {
  std::vector<Index> idx(out.size());
  for (Index ax = static_cast<Index>(out.size()) - 1; ax >= 0; --ax) {
    idx[ax] = flat % out[ax];
    flat /= out[ax];
  }
  Index off = 0;
  const Index ra = a.rank();
  const Index ro = static_cast<Index>(out.size());
  for (Index i = 0; i < ra; ++i) {
    const Index extent = a.shape()[i];
    const Index oi = idx[ro - ra + i];
    off = off * extent + (extent == 1 ? 0 : oi);
  }
  return a[off];
}

// All shapes with rank <= 3, extents in {1,2,3,4}.
std::vector<Shape> small_shapes() {
  std::vector<Shape> shapes;
  shapes.push_back({});
  for (Index a = 1; a <= 4; ++a) {
    shapes.push_back({a});
    for (Index b = 1; b <= 4; ++b) {
      shapes.push_back({a, b});
      for (Index c = 1; c <= 4; ++c) shapes.push_back({a, b, c});
    }
  }
  return shapes;
}

Array<double> iota(const Shape& shape, double start) {
  Array<double> a(shape);
  for (Index i = 0; i < a.size(); ++i) a[i] = start + static_cast<double>(i);
  return a;
}

}  // namespace

TEST_SUITE("array") {

TEST_CASE("broadcasting agrees with index-by-index scalar reference on all small shape pairs") {
  const auto shapes = small_shapes();
  Index checked = 0;
  for (const auto& sa : shapes) {
    for (const auto& sb : shapes) {
      Shape out;
      bool compatible = true;
      try {
        out = broadcast_shapes(sa, sb);
      } catch (const ShapeError&) {
        compatible = false;
      }
      const Array<double> a = iota(sa, 1.0);
      const Array<double> b = iota(sb, 0.5);
      if (!compatible) {
        CHECK_THROWS_AS((void)(a + b), ShapeError);
        continue;
      }
      const Array<double> sum = a + b;
      REQUIRE(sum.shape() == out);
      for (Index i = 0; i < sum.size(); ++i) {
        const double expect = broadcast_ref_at(a, out, i) + broadcast_ref_at(b, out, i);
        REQUIRE(sum[i] == expect);
      }
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("select basics") {
  const Mask m = Mask::from_data({2}, {1, 0});
  const auto a = Array<double>::from_vector({1, 2});
  const auto b = Array<double>::from_vector({9, 9});
  const auto r = select(m, a, b);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 9.0);

  const Mask all_true(Shape{2}, 1);
  CHECK(bitwise_equal(select(all_true, a, b), a));
}

TEST_CASE("select broadcasts a [2,1] mask row-wise against [2,3] values") {
  const Mask m = Mask::from_data({2, 1}, {1, 0});
  const auto a = iota({2, 3}, 0.0);
  const auto b = iota({2, 3}, 100.0);
  const auto r = select(m, a, b);
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 3; ++j) {
      const double expect = i == 0 ? a.at({i, j}) : b.at({i, j});
      CHECK(r.at({i, j}) == expect);
    }
  }
}

TEST_CASE("select(m, a, b) == select(!m, b, a) for random inputs") {
  const RngKey key = make_key(7);
  const auto keys = split(key, 3);
  const auto a = sample_standard_normal<double>(keys[0], {4, 3});
  const auto b = sample_standard_normal<double>(keys[1], {4, 3});
  const auto u = sample_uniform<double>(keys[2], {4, 3});
  const Mask m = less(u, 0.5);
  CHECK(bitwise_equal(select(m, a, b), select(mask_not(m), b, a)));
}

TEST_CASE("left_justified_expand_dims_like pads on the right") {
  const auto a = Array<double>::from_vector({1.0, 0.5});
  const Array<double> ref({4, 5, 6});
  const auto padded = left_justified_expand_dims_like(a, ref);
  CHECK(padded.shape() == Shape{2, 1, 1});
  CHECK(padded[0] == 1.0);
  CHECK(padded[1] == 0.5);

  // Same rank: identical array.
  const auto same = left_justified_expand_dims_like(ref, ref);
  CHECK(bitwise_equal(same, ref));

  // Rank-0 scalar against rank 2.
  const auto s = Array<double>::scalar(3.5);
  const auto padded_scalar = left_justified_expand_dims_to_rank(s, 2);
  CHECK(padded_scalar.shape() == Shape{1, 1});
  CHECK(padded_scalar[0] == 3.5);

  CHECK_THROWS_AS((void)left_justified_expand_dims_to_rank(ref, 1), ShapeError);
}

TEST_CASE("left_justified padding broadcasts against the reference along leading axes") {
  const auto betas = Array<double>::from_vector({1.0, 0.5});
  const auto tlp = iota({2, 3}, 1.0);
  const auto padded = left_justified_expand_dims_like(betas, tlp);
  const auto scaled = padded * tlp;
  for (Index k = 0; k < 2; ++k) {
    for (Index c = 0; c < 3; ++c) {
      CHECK(scaled.at({k, c}) == betas[k] * tlp.at({k, c}));
    }
  }
}

TEST_CASE("log_sum_exp analytic and stability cases") {
  const auto a = Array<double>::from_vector({0.0, 0.0});
  CHECK(log_sum_exp(a, 0)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  const auto big = Array<double>::from_vector({1000.0, 1000.0});
  const double v = log_sum_exp(big, 0)[0];
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));

  const auto ninf = Array<double>::from_vector({-kInf, -kInf});
  CHECK(log_sum_exp(ninf, 0)[0] == -kInf);

  CHECK_THROWS_AS((void)log_sum_exp(a, 1), ShapeError);
  CHECK_THROWS_AS((void)log_sum_exp(a, -2), ShapeError);
}

TEST_CASE("log_sum_exp matches long-double direct summation on random vectors") {
  const RngKey key = make_key(42);
  const auto keys = split(key, 20);
  for (std::size_t t = 0; t < keys.size(); ++t) {
    auto v = sample_standard_normal<double>(keys[t], {37});
    // widen the spread to stress the shift
    v = v * 40.0;
    long double acc = 0.0L;
    for (Index i = 0; i < v.size(); ++i) acc += std::exp(static_cast<long double>(v[i]));
    const double expect = static_cast<double>(std::log(acc));
    const double got = log_sum_exp(v, 0)[0];
    CHECK(std::abs(got - expect) / std::abs(expect) < 1e-12);
  }
}

TEST_CASE("log_sum_exp reduces the requested axis only") {
  const auto a = iota({2, 3}, 0.0);
  const auto r = log_sum_exp(a, -1);
  REQUIRE(r.shape() == Shape{2});
  for (Index c = 0; c < 2; ++c) {
    long double acc = 0.0L;
    for (Index j = 0; j < 3; ++j) acc += std::exp(static_cast<long double>(a.at({c, j})));
    CHECK(r[c] == doctest::Approx(static_cast<double>(std::log(acc))).epsilon(1e-13));
  }
  const auto r0 = log_sum_exp(a, 0);
  REQUIRE(r0.shape() == Shape{3});
}

TEST_CASE("trailing-axis reductions never touch the leading chain axis") {
  const auto a = iota({3, 4}, 1.0);
  const auto s = sum_last_axis(a);
  REQUIRE(s.shape() == Shape{3});
  for (Index c = 0; c < 3; ++c) {
    double acc = 0;
    for (Index j = 0; j < 4; ++j) acc += a.at({c, j});
    CHECK(s[c] == acc);
  }
  const auto m = max_last_axis(a);
  REQUIRE(m.shape() == Shape{3});
  CHECK(m[0] == 4.0);
  CHECK(m[2] == 12.0);

  const auto ev = sum_over_event_dims(iota({2, 3, 2}, 0.0));
  REQUIRE(ev.shape() == Shape{2});
  CHECK(ev[0] == 0 + 1 + 2 + 3 + 4 + 5);
  CHECK(ev[1] == 6 + 7 + 8 + 9 + 10 + 11);

  // [C] input: zero event dims, identity.
  const auto flat = Array<double>::from_vector({2.0, 3.0});
  CHECK(bitwise_equal(sum_over_event_dims(flat), flat));
}

TEST_CASE("dot_over_event_dims matches a scalar loop") {
  const auto a = iota({2, 3}, 1.0);
  const auto b = iota({2, 3}, 0.25);
  const auto d = dot_over_event_dims(a, b);
  for (Index c = 0; c < 2; ++c) {
    double acc = 0;
    for (Index j = 0; j < 3; ++j) acc += a.at({c, j}) * b.at({c, j});
    CHECK(d[c] == acc);
  }
}

TEST_CASE("shape utilities") {
  const auto a = iota({2, 3}, 0.0);
  const auto r = reshape(a, {3, 2});
  CHECK(r.shape() == Shape{3, 2});
  CHECK(r.at({2, 1}) == a.at({1, 2}));
  CHECK_THROWS_AS((void)reshape(a, {4}), ShapeError);

  const auto t = take_leading(a, 1);
  CHECK(t.shape() == Shape{3});
  CHECK(t[0] == 3.0);

  const auto tiled = tile_leading(t, 2);
  CHECK(tiled.shape() == Shape{2, 3});
  CHECK(tiled.at({1, 2}) == t[2]);

  const auto up = shift_leading(a, 1);
  CHECK(up.at({0, 0}) == a.at({1, 0}));
  CHECK(up.at({1, 0}) == a.at({1, 0}));  // clamped edge
  const auto down = shift_leading(a, -1);
  CHECK(down.at({1, 0}) == a.at({0, 0}));
  CHECK(down.at({0, 0}) == a.at({0, 0}));

  const auto sl = slice_leading(a, 0, 1);
  CHECK(sl.shape() == Shape{1, 3});

  Array<double> dst({3, 2});
  copy_into_leading_slice(dst, 2, Array<double>::from_vector({7.0, 8.0}));
  CHECK(dst.at({2, 1}) == 8.0);
}

TEST_CASE("zero-extent arrays are usable") {
  Array<double> empty(Shape{0, 3});
  CHECK(empty.size() == 0);
  const auto doubled = empty + empty;
  CHECK(doubled.shape() == Shape{0, 3});
  const auto s = sum_last_axis(empty);
  CHECK(s.shape() == Shape{0});
}

TEST_CASE("log_add_exp handles -inf identities") {
  const auto a = Array<double>::from_vector({-kInf, 0.0, 500.0});
  const auto b = Array<double>::from_vector({-kInf, 0.0, 500.0});
  const auto r = log_add_exp(a, b);
  CHECK(r[0] == -kInf);
  CHECK(r[1] == doctest::Approx(std::log(2.0)));
  CHECK(r[2] == doctest::Approx(500.0 + std::log(2.0)));
}

TEST_CASE("minimum against scalar clamps as documented") {
  const auto a = Array<double>::from_vector({-1.0, 2.0, -kInf});
  const auto m = minimum(a, 0.0);
  CHECK(m[0] == -1.0);
  CHECK(m[1] == 0.0);
  CHECK(m[2] == -kInf);
}

TEST_CASE("float32 arithmetic instantiates and broadcasts") {
  const auto a = Array<float>::from_vector({1.0f, 2.0f});
  const auto b = Array<float>::from_data({2, 2}, {1.f, 2.f, 3.f, 4.f});
  const auto r = a * b;
  CHECK(r.shape() == Shape{2, 2});
  CHECK(r.at({1, 1}) == 8.0f);
}

}  // TEST_SUITE
