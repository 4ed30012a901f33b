// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
//
// Splittable deterministic randomness built on the Philox-4x32-10 counter
// block cipher (Salmon et al., SC 2011). A key is 64 bits of cipher key;
// there is no mutable stream state. Drawing n values encrypts counters
// 0..n-1 under the key, and splitting derives child keys from counters in a
// separate domain, so every sampler output is a pure function of
// (key, arguments) and substreams never alias.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "batchmc/array.hpp"
#include "batchmc/errors.hpp"

namespace batchmc {

struct RngKey {
  std::uint32_t word0 = 0;
  std::uint32_t word1 = 0;

  friend bool operator==(const RngKey&, const RngKey&) = default;
};

inline RngKey make_key(std::uint64_t seed) {
  return RngKey{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

inline std::string key_str(const RngKey& key) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%08x%08x", key.word1, key.word0);
  return buf;
}

namespace detail {

// Counter domains keep split/fold-derived keys out of the draw stream.
inline constexpr std::uint32_t kDrawDomain = 0;
inline constexpr std::uint32_t kSplitDomain = 1;
inline constexpr std::uint32_t kFoldDomain = 2;

inline void philox_round(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
  constexpr std::uint64_t kMul0 = 0xD2511F53;
  constexpr std::uint64_t kMul1 = 0xCD9E8D57;
  const std::uint64_t p0 = kMul0 * ctr[0];
  const std::uint64_t p1 = kMul1 * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  key[0] += 0x9E3779B9;  // Weyl increments
  key[1] += 0xBB67AE85;
}

/// One 128-bit Philox-4x32-10 block: counter = (index, domain, 0).
inline std::array<std::uint32_t, 4> philox_block(const RngKey& key, std::uint64_t index,
                                                 std::uint32_t domain) {
  std::array<std::uint32_t, 4> ctr = {static_cast<std::uint32_t>(index),
                                      static_cast<std::uint32_t>(index >> 32), domain, 0};
  std::array<std::uint32_t, 2> k = {key.word0, key.word1};
  for (int round = 0; round < 10; ++round) philox_round(ctr, k);
  return ctr;
}

inline double u64_to_unit_double(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

inline double words_to_unit_double(std::uint32_t lo, std::uint32_t hi) {
  return u64_to_unit_double((static_cast<std::uint64_t>(hi) << 32) | lo);
}

}  // namespace detail

/// n distinct keys, deterministic in (key, n). Streams under different
/// children are independent of each other and of the parent's draw stream.
inline std::vector<RngKey> split(const RngKey& key, Index n) {
  if (n < 1) throw ArgumentError("split: n must be >= 1");
  std::vector<RngKey> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto block = detail::philox_block(key, static_cast<std::uint64_t>(i),
                                            detail::kSplitDomain);
    out[static_cast<std::size_t>(i)] = RngKey{block[0], block[1]};
  }
  return out;
}

/// Deterministically mixes an integer into a key (used for per-iteration
/// driver keys so runs can be resumed at any step index).
inline RngKey fold_in(const RngKey& key, std::uint64_t data) {
  const auto block = detail::philox_block(key, data, detail::kFoldDomain);
  return RngKey{block[0], block[1]};
}

/// Uniform draws on [0, 1), bitwise deterministic in (key, shape).
template <typename S>
Array<S> sample_uniform(const RngKey& key, Shape shape) {
  Array<S> out(std::move(shape));
  const Index n = out.size();
  if constexpr (sizeof(S) == 8) {
    for (Index i = 0; i < n; i += 2) {
      const auto block = detail::philox_block(key, static_cast<std::uint64_t>(i / 2),
                                              detail::kDrawDomain);
      out[i] = static_cast<S>(detail::words_to_unit_double(block[0], block[1]));
      if (i + 1 < n) out[i + 1] = static_cast<S>(detail::words_to_unit_double(block[2], block[3]));
    }
  } else {
    for (Index i = 0; i < n; i += 4) {
      const auto block = detail::philox_block(key, static_cast<std::uint64_t>(i / 4),
                                              detail::kDrawDomain);
      for (Index j = 0; j < 4 && i + j < n; ++j) {
        out[i + j] = static_cast<S>(block[j] >> 8) * S(0x1.0p-24);
      }
    }
  }
  return out;
}

/// Standard normal draws via Box-Muller on the uniform stream (no rejection,
/// so the draw count per element is fixed and reproducible).
template <typename S>
Array<S> sample_standard_normal(const RngKey& key, Shape shape) {
  Array<S> out(std::move(shape));
  const Index n = out.size();
  constexpr double kTwoPi = 2.0 * std::numbers::pi_v<double>;
  Index produced = 0;
  std::uint64_t block_index = 0;
  while (produced < n) {
    const auto block = detail::philox_block(key, block_index++, detail::kDrawDomain);
    double pairs[2][2];
    int available;
    if constexpr (sizeof(S) == 8) {
      pairs[0][0] = detail::words_to_unit_double(block[0], block[1]);
      pairs[0][1] = detail::words_to_unit_double(block[2], block[3]);
      available = 1;
    } else {
      pairs[0][0] = static_cast<double>(block[0] >> 8) * 0x1.0p-24;
      pairs[0][1] = static_cast<double>(block[1] >> 8) * 0x1.0p-24;
      pairs[1][0] = static_cast<double>(block[2] >> 8) * 0x1.0p-24;
      pairs[1][1] = static_cast<double>(block[3] >> 8) * 0x1.0p-24;
      available = 2;
    }
    for (int p = 0; p < available && produced < n; ++p) {
      const double u0 = pairs[p][0];
      const double u1 = pairs[p][1];
      const double radius = std::sqrt(-2.0 * std::log(1.0 - u0));
      out[produced++] = static_cast<S>(radius * std::cos(kTwoPi * u1));
      if (produced < n) out[produced++] = static_cast<S>(radius * std::sin(kTwoPi * u1));
    }
  }
  return out;
}

/// Single uniform scalar on [0, 1).
template <typename S>
S uniform_scalar(const RngKey& key) {
  const auto block = detail::philox_block(key, 0, detail::kDrawDomain);
  if constexpr (sizeof(S) == 8) {
    return static_cast<S>(detail::words_to_unit_double(block[0], block[1]));
  } else {
    return static_cast<S>(block[0] >> 8) * S(0x1.0p-24);
  }
}

/// One uniform per chain, row c drawn from split(key, C)[c]. This is the
/// schedule every kernel uses for chain-axis uniforms, so a single
/// extracted chain can replay its stream.
template <typename S>
Array<S> per_chain_uniform(const RngKey& key, Index chains) {
  const auto chain_keys = split(key, chains);
  Array<S> u(Shape{chains});
  for (Index c = 0; c < chains; ++c) {
    u[c] = uniform_scalar<S>(chain_keys[static_cast<std::size_t>(c)]);
  }
  return u;
}

}  // namespace batchmc
