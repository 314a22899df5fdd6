// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace fairdiff {

/// Deterministic pseudo-random stream (xoshiro256** seeded via splitmix64).
///
/// Every stochastic component in the pipeline owns an Rng derived from the
/// run seed, so results are reproducible bit-for-bit regardless of thread
/// count. Gaussian draws use an explicit Box-Muller transform rather than
/// std::normal_distribution to keep the stream contents independent of the
/// standard library implementation.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double uniform01();

  /// Uniform double in (0, 1]; never returns 0 (safe for log()).
  double uniform_open0();

  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Standard normal draw.
  double gaussian();

  /// Vector of iid standard normals.
  std::vector<double> gaussian_vec(std::size_t n);

  /// Index draw from a probability mass function (entries >= 0, sum ~ 1).
  std::size_t categorical(std::span<const double> pmf);

  /// Independent child stream addressed by index. Children of distinct
  /// (seed, index) pairs are decorrelated; derivation is order-free so
  /// workers can construct their own streams.
  Rng child(std::uint64_t index) const;

  /// Child stream addressed by a label (hashed), for purpose-scoped seeds.
  Rng child(std::string_view label) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t s_[4] = {0, 0, 0, 0};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fairdiff
