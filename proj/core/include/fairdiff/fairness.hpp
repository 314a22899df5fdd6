// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairdiff/indicator.hpp"
#include "fairdiff/tensor.hpp"
#include "fairdiff/world.hpp"

namespace fairdiff {

/// Fairness Discrepancy against a target distribution: the L2 distance
/// between the target PMF and the mean oracle posterior over samples.
/// Zero is perfectly calibrated; sqrt(2) is the L2 diameter of the simplex.
struct FDReport {
  std::string attribute;
  std::vector<double> target;
  std::vector<double> mean_posterior;
  double fd = 0.0;
  std::size_t n = 0;
  double ci_lo = 0.0;  // bootstrap 95% interval
  double ci_hi = 0.0;
};

FDReport fd_score(const std::vector<Tensor>& samples,
                  const std::string& attribute, const DistributionSpec& target,
                  const SyntheticWorld& world, int bootstrap = 1000,
                  std::uint64_t bootstrap_seed = 1);

/// Distribution-fidelity check: per-category energy distance between the
/// generated samples the oracle assigns to a category and fresh draws from
/// the matching ground-truth components. Lower is better; identical
/// distributions score 0.
struct FidelityReport {
  struct CategoryRow {
    std::string category;
    std::size_t n_generated = 0;
    double energy_distance = 0.0;
    bool undersampled = false;
  };
  std::string attribute;
  std::vector<CategoryRow> per_category;
  double overall_mean = 0.0;
};

FidelityReport fidelity_score(const std::vector<Tensor>& samples,
                              const std::string& attribute,
                              const SyntheticWorld& world,
                              std::size_t truth_n = 10000,
                              std::size_t min_per_category = 30,
                              std::uint64_t seed = 1);

/// Two-sample energy distance, V-statistic form (identical samples give
/// exactly zero). Symmetric and nonnegative.
double energy_distance(const std::vector<Tensor>& x,
                       const std::vector<Tensor>& y);

/// Gaussian-kernel maximum mean discrepancy with the given bandwidth.
double mmd_gaussian(const std::vector<Tensor>& x, const std::vector<Tensor>& y,
                    double bandwidth);

/// Median pairwise distance heuristic for the MMD bandwidth.
double median_pairwise_distance(const std::vector<Tensor>& x,
                                const std::vector<Tensor>& y);

}  // namespace fairdiff
