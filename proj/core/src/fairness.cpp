// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/fairness.hpp"

#include <algorithm>
#include <cmath>

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"

namespace fairdiff {

namespace {

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

FDReport fd_score(const std::vector<Tensor>& samples,
                  const std::string& attribute, const DistributionSpec& target,
                  const SyntheticWorld& world, int bootstrap,
                  std::uint64_t bootstrap_seed) {
  if (samples.empty()) throw ConfigError("fd_score needs at least one sample");
  target.validate();
  const auto& attr = world.attribute(attribute);
  if (target.pmf.size() != attr.category_count()) {
    throw ConfigError("target for attribute '" + attribute + "' has " +
                      std::to_string(target.pmf.size()) +
                      " categories, world has " +
                      std::to_string(attr.category_count()));
  }

  std::vector<std::vector<double>> posteriors;
  posteriors.reserve(samples.size());
  for (const auto& x : samples) {
    posteriors.push_back(bayes_posterior(world, x, attribute));
  }

  const std::size_t k = attr.category_count();
  auto mean_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<double> mean(k, 0.0);
    for (std::size_t i : idx) {
      for (std::size_t c = 0; c < k; ++c) mean[c] += posteriors[i][c];
    }
    for (double& m : mean) m /= static_cast<double>(idx.size());
    return mean;
  };

  FDReport report;
  report.attribute = attribute;
  report.target = target.pmf;
  report.n = samples.size();
  std::vector<std::size_t> all(samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  report.mean_posterior = mean_of(all);
  report.fd = l2_distance(target.pmf, report.mean_posterior);

  if (bootstrap > 0) {
    Rng rng(bootstrap_seed);
    std::vector<double> stats;
    stats.reserve(static_cast<std::size_t>(bootstrap));
    std::vector<std::size_t> resample(samples.size());
    for (int b = 0; b < bootstrap; ++b) {
      for (auto& r : resample) r = rng.uniform_int(samples.size());
      stats.push_back(l2_distance(target.pmf, mean_of(resample)));
    }
    std::sort(stats.begin(), stats.end());
    const auto lo_idx = static_cast<std::size_t>(0.025 * (stats.size() - 1));
    const auto hi_idx = static_cast<std::size_t>(
        std::ceil(0.975 * static_cast<double>(stats.size() - 1)));
    report.ci_lo = stats[lo_idx];
    report.ci_hi = stats[hi_idx];
  }
  return report;
}

double energy_distance(const std::vector<Tensor>& x,
                       const std::vector<Tensor>& y) {
  if (x.empty() || y.empty()) {
    throw ConfigError("energy_distance needs non-empty sample sets");
  }
  auto mean_cross = [](const std::vector<Tensor>& a,
                       const std::vector<Tensor>& b) {
    double acc = 0.0;
    for (const auto& u : a) {
      for (const auto& v : b) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < u.numel(); ++i) {
          const double d = u[i] - v[i];
          d2 += d * d;
        }
        acc += std::sqrt(d2);
      }
    }
    return acc / (static_cast<double>(a.size()) *
                  static_cast<double>(b.size()));
  };
  return 2.0 * mean_cross(x, y) - mean_cross(x, x) - mean_cross(y, y);
}

FidelityReport fidelity_score(const std::vector<Tensor>& samples,
                              const std::string& attribute,
                              const SyntheticWorld& world,
                              std::size_t truth_n,
                              std::size_t min_per_category,
                              std::uint64_t seed) {
  const int attr_idx = world.attribute_index(attribute);
  if (attr_idx < 0) throw VocabError("unknown attribute '" + attribute + "'");
  const auto& attr = world.attributes[static_cast<std::size_t>(attr_idx)];

  std::vector<std::vector<Tensor>> by_category(attr.category_count());
  for (const auto& x : samples) {
    by_category[bayes_classify(world, x, attribute)].push_back(x);
  }

  FidelityReport report;
  report.attribute = attribute;
  Rng rng(seed);
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < attr.category_count(); ++c) {
    FidelityReport::CategoryRow row;
    row.category = attr.categories[c];
    row.n_generated = by_category[c].size();
    row.undersampled = by_category[c].size() < min_per_category;
    if (!by_category[c].empty()) {
      std::vector<Tensor> truth;
      truth.reserve(truth_n);
      for (std::size_t i = 0; i < truth_n; ++i) {
        truth.push_back(world.draw_category(attr_idx, c, rng));
      }
      row.energy_distance = energy_distance(by_category[c], truth);
      if (!row.undersampled) {
        total += row.energy_distance;
        ++counted;
      }
    }
    report.per_category.push_back(std::move(row));
  }
  report.overall_mean = counted > 0 ? total / static_cast<double>(counted)
                                    : 0.0;
  return report;
}

double mmd_gaussian(const std::vector<Tensor>& x, const std::vector<Tensor>& y,
                    double bandwidth) {
  if (x.empty() || y.empty()) {
    throw ConfigError("mmd needs non-empty sample sets");
  }
  const double inv = -1.0 / (2.0 * bandwidth * bandwidth);
  auto mean_kernel = [inv](const std::vector<Tensor>& a,
                           const std::vector<Tensor>& b) {
    double acc = 0.0;
    for (const auto& u : a) {
      for (const auto& v : b) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < u.numel(); ++i) {
          const double d = u[i] - v[i];
          d2 += d * d;
        }
        acc += std::exp(inv * d2);
      }
    }
    return acc / (static_cast<double>(a.size()) *
                  static_cast<double>(b.size()));
  };
  const double m2 =
      mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
  return std::sqrt(std::max(0.0, m2));
}

double median_pairwise_distance(const std::vector<Tensor>& x,
                                const std::vector<Tensor>& y) {
  std::vector<double> dists;
  dists.reserve(x.size() * y.size());
  for (const auto& u : x) {
    for (const auto& v : y) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < u.numel(); ++i) {
        const double d = u[i] - v[i];
        d2 += d * d;
      }
      dists.push_back(std::sqrt(d2));
    }
  }
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                   dists.end());
  return dists[dists.size() / 2];
}

}  // namespace fairdiff
