// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/indicator.hpp"

#include <cmath>

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"

namespace fairdiff {

void DistributionSpec::validate() const {
  if (pmf.size() < 2) {
    throw ConfigError("distribution for attribute '" + attribute +
                      "' needs at least 2 categories");
  }
  double sum = 0.0;
  for (double p : pmf) {
    if (p < 0.0) {
      throw ConfigError("distribution for attribute '" + attribute +
                        "' has a negative entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("distribution for attribute '" + attribute +
                      "' sums to " + std::to_string(sum) + ", expected 1");
  }
}

void IndicatorVector::validate() const {
  std::size_t ones = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i] == 1.0) {
      ++ones;
      if (i != chosen) throw ConfigError("indicator chosen index mismatch");
    } else if (h[i] != 0.0) {
      throw ConfigError("indicator vector is not one-hot");
    }
  }
  if (ones != 1) throw ConfigError("indicator vector is not one-hot");
}

DistributionSpec uniform_pmf(const std::string& attribute, std::size_t k) {
  if (k < 2) {
    throw ConfigError("uniform_pmf requires K >= 2, got " + std::to_string(k));
  }
  DistributionSpec spec;
  spec.attribute = attribute;
  spec.pmf.assign(k, 1.0 / static_cast<double>(k));
  return spec;
}

IndicatorVector sample_indicator(const DistributionSpec& spec, Rng& rng) {
  spec.validate();
  IndicatorVector ind;
  ind.chosen = rng.categorical(spec.pmf);
  ind.h.assign(spec.pmf.size(), 0.0);
  ind.h[ind.chosen] = 1.0;
  return ind;
}

}  // namespace fairdiff
