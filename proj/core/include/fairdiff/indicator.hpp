// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace fairdiff {

class Rng;

/// Prescribed target distribution over one attribute's categories.
struct DistributionSpec {
  std::string attribute;
  std::vector<double> pmf;

  std::size_t category_count() const { return pmf.size(); }
  void validate() const;
};

/// One-hot selection vector sampled from a DistributionSpec.
struct IndicatorVector {
  std::vector<double> h;
  std::size_t chosen = 0;

  void validate() const;
};

/// Uniform PMF with K >= 2 entries of exactly 1/K.
DistributionSpec uniform_pmf(const std::string& attribute, std::size_t k);

/// Draws index k with P(k = i) = pmf[i] and returns the one-hot vector.
IndicatorVector sample_indicator(const DistributionSpec& spec, Rng& rng);

}  // namespace fairdiff
