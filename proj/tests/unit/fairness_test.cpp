// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "fairdiff/error.hpp"
#include "fairdiff/fairness.hpp"
#include "fairdiff/rng.hpp"
#include "fairdiff/world.hpp"

using namespace fairdiff;

namespace {

SyntheticWorld gender_world(std::uint64_t seed = 3) {
  WorldSpec spec;
  spec.dim = 2;
  spec.attributes = {{"gender", {"g0", "g1"}}};
  spec.group_pmfs["worker"] = {0.8, 0.2};
  return make_world(spec, seed);
}

// Point masses at component means make posteriors effectively one-hot.
std::vector<Tensor> mass_at_means(const SyntheticWorld& w, std::size_t n0,
                                  std::size_t n1) {
  std::vector<Tensor> samples;
  for (std::size_t i = 0; i < n0; ++i) samples.push_back(w.component_means[0]);
  for (std::size_t i = 0; i < n1; ++i) samples.push_back(w.component_means[1]);
  return samples;
}

}  // namespace

TEST_CASE("fd is zero when posteriors match the target") {
  const SyntheticWorld w = gender_world();
  DistributionSpec target;
  target.attribute = "gender";
  target.pmf = {0.5, 0.5};
  const auto samples = mass_at_means(w, 100, 100);
  const FDReport report = fd_score(samples, "gender", target, w, 200, 7);
  CHECK(report.fd < 1e-6);
  CHECK(report.n == 200);
}

TEST_CASE("fd of all mass on one category vs uniform is sqrt(1/2)") {
  const SyntheticWorld w = gender_world();
  DistributionSpec target = uniform_pmf("gender", 2);
  const auto samples = mass_at_means(w, 100, 0);
  const FDReport report = fd_score(samples, "gender", target, w, 0, 7);
  CHECK(report.fd == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
}

TEST_CASE("fd of an 80/20 split vs uniform reproduces 0.4243") {
  const SyntheticWorld w = gender_world();
  DistributionSpec target = uniform_pmf("gender", 2);
  const auto samples = mass_at_means(w, 800, 200);
  const FDReport report = fd_score(samples, "gender", target, w, 100, 7);
  CHECK(report.fd ==
        doctest::Approx(std::sqrt(2.0 * 0.3 * 0.3)).epsilon(1e-4));
}

TEST_CASE("fd is permutation-equivariant") {
  WorldSpec spec;
  spec.dim = 2;
  spec.attributes = {{"gender", {"g0", "g1"}}};
  spec.group_pmfs["worker"] = {0.8, 0.2};
  const SyntheticWorld w = make_world(spec, 5);

  WorldSpec flipped_spec = spec;
  flipped_spec.attributes[0].categories = {"g1", "g0"};
  SyntheticWorld flipped = make_world(flipped_spec, 5);
  // Re-pin the means so categories map to the same components, relabeled.
  flipped.component_means = {w.component_means[1], w.component_means[0]};

  DistributionSpec target;
  target.attribute = "gender";
  target.pmf = {0.3, 0.7};
  DistributionSpec flipped_target;
  flipped_target.attribute = "gender";
  flipped_target.pmf = {0.7, 0.3};

  const auto samples = mass_at_means(w, 120, 60);
  const FDReport a = fd_score(samples, "gender", target, w, 0, 7);
  const FDReport b = fd_score(samples, "gender", flipped_target, flipped, 0, 7);
  CHECK(a.fd == doctest::Approx(b.fd).epsilon(1e-12));
}

TEST_CASE("fd never exceeds sqrt(2) for random pmf pairs") {
  const SyntheticWorld w = gender_world();
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const double a = rng.uniform01();
    DistributionSpec target;
    target.attribute = "gender";
    target.pmf = {a, 1.0 - a};
    std::vector<Tensor> samples;
    const std::size_t n0 = 1 + rng.uniform_int(50);
    const std::size_t n1 = 1 + rng.uniform_int(50);
    for (auto s : mass_at_means(w, n0, n1)) samples.push_back(s);
    const FDReport r = fd_score(samples, "gender", target, w, 0, 7);
    CHECK(r.fd <= std::sqrt(2.0) + 1e-12);
  }
}

TEST_CASE("bootstrap CI brackets the estimate and shrinks with n") {
  const SyntheticWorld w = gender_world();
  DistributionSpec target = uniform_pmf("gender", 2);
  Rng rng(13);
  auto noisy_samples = [&](std::size_t n) {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t combo = rng.uniform01() < 0.7 ? 0 : 1;
      out.push_back(w.draw_component(combo, rng));
    }
    return out;
  };
  const auto small = noisy_samples(400);
  const auto large = noisy_samples(1600);
  const FDReport rs = fd_score(small, "gender", target, w, 1000, 17);
  const FDReport rl = fd_score(large, "gender", target, w, 1000, 17);
  CHECK(rs.ci_lo <= rs.fd);
  CHECK(rs.fd <= rs.ci_hi);
  const double ws = rs.ci_hi - rs.ci_lo;
  const double wl = rl.ci_hi - rl.ci_lo;
  // Width should shrink roughly like 1/sqrt(n) = factor 2; allow slack.
  CHECK(wl < 0.75 * ws);
}

TEST_CASE("fd_score rejects unknown attributes and empty input") {
  const SyntheticWorld w = gender_world();
  DistributionSpec target = uniform_pmf("gender", 2);
  const auto samples = mass_at_means(w, 10, 10);
  CHECK_THROWS_AS(fd_score(samples, "age", target, w, 0, 7), VocabError);
  CHECK_THROWS_AS(fd_score({}, "gender", target, w, 0, 7), ConfigError);
}

TEST_CASE("energy distance: identity, same-source, and wrong component") {
  const SyntheticWorld w = gender_world();
  Rng rng(19);
  std::vector<Tensor> a, b, wrong;
  for (int i = 0; i < 600; ++i) a.push_back(w.draw_component(0, rng));
  for (int i = 0; i < 600; ++i) b.push_back(w.draw_component(0, rng));
  for (int i = 0; i < 600; ++i) wrong.push_back(w.draw_component(1, rng));

  CHECK(energy_distance(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(energy_distance(a, b) < 0.05);
  CHECK(energy_distance(a, wrong) > 1.0);
  CHECK(energy_distance(a, wrong) ==
        doctest::Approx(energy_distance(wrong, a)).epsilon(1e-12));
}

TEST_CASE("fidelity_score separates matching from undersampled categories") {
  const SyntheticWorld w = gender_world();
  Rng rng(23);
  std::vector<Tensor> samples;
  for (int i = 0; i < 500; ++i) samples.push_back(w.draw_component(0, rng));
  for (int i = 0; i < 5; ++i) samples.push_back(w.draw_component(1, rng));

  const FidelityReport report = fidelity_score(samples, "gender", w, 4000, 30, 7);
  REQUIRE(report.per_category.size() == 2);
  CHECK(report.per_category[0].n_generated == 500);
  CHECK_FALSE(report.per_category[0].undersampled);
  CHECK(report.per_category[0].energy_distance < 0.05);
  CHECK(report.per_category[1].undersampled);  // flagged, not fatal
}

TEST_CASE("mmd of identical distributions is small, of distinct ones large") {
  const SyntheticWorld w = gender_world();
  Rng rng(29);
  std::vector<Tensor> a, b, c;
  for (int i = 0; i < 400; ++i) a.push_back(w.draw_component(0, rng));
  for (int i = 0; i < 400; ++i) b.push_back(w.draw_component(0, rng));
  for (int i = 0; i < 400; ++i) c.push_back(w.draw_component(1, rng));
  const double bw = median_pairwise_distance(a, b);
  CHECK(mmd_gaussian(a, b, bw) < 0.05);
  CHECK(mmd_gaussian(a, c, bw) > 0.5);
}
