// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "batchmc/array.hpp"
#include "batchmc/random.hpp"

using namespace batchmc;

TEST_SUITE("random") {

TEST_CASE("split is deterministic and children never alias the parent") {
  const RngKey k = make_key(123456789);
  const auto once = split(k, 2);
  const auto twice = split(k, 2);
  CHECK(once[0] == twice[0]);
  CHECK(once[1] == twice[1]);
  CHECK_FALSE(once[0] == once[1]);

  const auto one = split(k, 1);
  CHECK_FALSE(one[0] == k);

  CHECK_THROWS_AS((void)split(k, 0), ArgumentError);
}

TEST_CASE("fold_in distinguishes indices and reproduces") {
  const RngKey k = make_key(9);
  CHECK(fold_in(k, 0) == fold_in(k, 0));
  CHECK_FALSE(fold_in(k, 0) == fold_in(k, 1));
  CHECK_FALSE(fold_in(k, 0) == k);
}

TEST_CASE("sampling is a pure function of key and shape") {
  const RngKey k = make_key(2024);
  const auto a = sample_standard_normal<double>(k, {17, 3});
  const auto b = sample_standard_normal<double>(k, {17, 3});
  CHECK(bitwise_equal(a, b));

  const auto u1 = sample_uniform<double>(k, {64});
  const auto u2 = sample_uniform<double>(k, {64});
  CHECK(bitwise_equal(u1, u2));

  CHECK(uniform_scalar<double>(k) == uniform_scalar<double>(k));
}

TEST_CASE("uniform outputs lie in [0,1)") {
  const RngKey k = make_key(77);
  const auto u = sample_uniform<double>(k, {100000});
  CHECK(min_all(u) >= 0.0);
  CHECK(max_all(u) < 1.0);

  const auto uf = sample_uniform<float>(split(k, 1)[0], {100000});
  CHECK(min_all(uf) >= 0.0f);
  CHECK(max_all(uf) < 1.0f);
}

TEST_CASE("normal sample mean within the CLT bound at n = 1e6") {
  const RngKey k = make_key(31337);
  const Index n = 1000000;
  const auto z = sample_standard_normal<double>(k, {n});
  const double mean = mean_all(z);
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));

  double ss = 0;
  for (Index i = 0; i < n; ++i) ss += (z[i] - mean) * (z[i] - mean);
  const double var = ss / static_cast<double>(n - 1);
  // Var of the variance estimate is ~2/n for normal data.
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("substreams from split pass a chi-square independence check") {
  // Bin (u_a[i], u_b[i]) pairs on a 10x10 grid; under independence the cell
  // counts are multinomial with equal probabilities. chi^2 df=99, the 0.99
  // quantile is 134.642: p > 0.01 requires the statistic to stay below it.
  const RngKey k = make_key(5150);
  const auto kids = split(k, 2);
  const Index n = 100000;
  const auto ua = sample_uniform<double>(kids[0], {n});
  const auto ub = sample_uniform<double>(kids[1], {n});
  std::vector<double> counts(100, 0.0);
  for (Index i = 0; i < n; ++i) {
    const int ca = std::min(9, static_cast<int>(ua[i] * 10.0));
    const int cb = std::min(9, static_cast<int>(ub[i] * 10.0));
    counts[static_cast<std::size_t>(ca * 10 + cb)] += 1.0;
  }
  const double expected = static_cast<double>(n) / 100.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 134.642);
}

TEST_CASE("growing a split extends it without perturbing earlier children") {
  // Child i of split(k, n) depends only on (k, i), so adding chains never
  // changes the streams of existing chains.
  const RngKey k = make_key(606);
  const auto small = split(k, 3);
  const auto big = split(k, 8);
  for (std::size_t i = 0; i < small.size(); ++i) {
    CHECK(small[i] == big[i]);
  }
}

TEST_CASE("distinct keys give distinct streams") {
  const RngKey k = make_key(1);
  const auto kids = split(k, 2);
  const auto a = sample_uniform<double>(kids[0], {16});
  const auto b = sample_uniform<double>(kids[1], {16});
  CHECK_FALSE(bitwise_equal(a, b));
}

TEST_CASE("float32 streams are deterministic too") {
  const RngKey k = make_key(8);
  const auto a = sample_standard_normal<float>(k, {1001});
  const auto b = sample_standard_normal<float>(k, {1001});
  CHECK(bitwise_equal(a, b));
  const double mean = mean_all(cast<double>(a));
  CHECK(std::abs(mean) < 0.15);
}

}  // TEST_SUITE
