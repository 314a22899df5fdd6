// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"
#include "fairdiff/world.hpp"

using namespace fairdiff;

namespace {

WorldSpec two_category_spec() {
  WorldSpec spec;
  spec.dim = 2;
  spec.attributes = {{"gender", {"g0", "g1"}}};
  spec.group_pmfs["worker"] = {0.8, 0.2};
  return spec;
}

WorldSpec two_attribute_spec() {
  WorldSpec spec;
  spec.dim = 2;
  spec.attributes = {{"gender", {"g0", "g1"}},
                     {"race", {"r0", "r1", "r2", "r3"}}};
  spec.group_pmfs["worker"] =
      product_pmf({{0.8, 0.2}, {0.7, 0.1, 0.1, 0.1}});
  return spec;
}

}  // namespace

TEST_CASE("make_world honors the separation invariant") {
  const SyntheticWorld w = make_world(two_category_spec(), 3);
  REQUIRE(w.combo_count() == 2);
  CHECK(w.min_separation() >= 6.0 * w.component_std);
}

TEST_CASE("two attributes give the product number of components") {
  const SyntheticWorld w = make_world(two_attribute_spec(), 3);
  CHECK(w.combo_count() == 8);
  CHECK(w.min_separation() >= 6.0);
}

TEST_CASE("make_world is deterministic in the seed") {
  const SyntheticWorld a = make_world(two_attribute_spec(), 17);
  const SyntheticWorld b = make_world(two_attribute_spec(), 17);
  const SyntheticWorld c = make_world(two_attribute_spec(), 18);
  REQUIRE(a.combo_count() == b.combo_count());
  for (std::size_t i = 0; i < a.combo_count(); ++i) {
    CHECK(max_abs_diff(a.component_means[i], b.component_means[i]) == 0.0);
  }
  CHECK(max_abs_diff(a.component_means[0], c.component_means[0]) > 0.0);
}

TEST_CASE("world spec validation rejects bad input") {
  WorldSpec bad = two_category_spec();
  bad.group_pmfs["worker"] = {0.8, 0.3};  // sums to 1.1
  CHECK_THROWS_AS(make_world(bad, 1), ConfigError);

  WorldSpec one_cat = two_category_spec();
  one_cat.attributes[0].categories = {"only"};
  CHECK_THROWS_AS(make_world(one_cat, 1), ConfigError);
}

TEST_CASE("sample_dataset frequencies converge to the bias pmf") {
  const SyntheticWorld w = make_world(two_category_spec(), 5);
  Rng rng(6);
  const std::size_t n = 10000;
  const LabeledDataset ds = sample_dataset(w, "worker", n, rng);
  REQUIRE(ds.size() == n);
  double cat0 = 0.0;
  for (std::size_t label : ds.combo_labels) {
    if (label == 0) cat0 += 1.0;
  }
  const double freq = cat0 / static_cast<double>(n);
  const double bound = 3.0 * std::sqrt(0.8 * 0.2 / static_cast<double>(n));
  CHECK(std::abs(freq - 0.8) <= bound);
}

TEST_CASE("sample_dataset degenerate pmf and empty request") {
  WorldSpec spec = two_category_spec();
  spec.group_pmfs["pure"] = {1.0, 0.0};
  const SyntheticWorld w = make_world(spec, 5);
  Rng rng(7);
  const LabeledDataset ds = sample_dataset(w, "pure", 200, rng);
  for (std::size_t label : ds.combo_labels) CHECK(label == 0);

  const LabeledDataset empty = sample_dataset(w, "worker", 0, rng);
  CHECK(empty.size() == 0);

  CHECK_THROWS_AS(sample_dataset(w, "nope", 5, rng), VocabError);
}

TEST_CASE("bayes posterior is confident at component means") {
  const SyntheticWorld w = make_world(two_attribute_spec(), 9);
  for (std::size_t c = 0; c < w.combo_count(); ++c) {
    const auto combo = w.combo_of_index(c);
    for (std::size_t a = 0; a < w.attributes.size(); ++a) {
      const auto post =
          bayes_posterior(w, w.component_means[c], w.attributes[a].name);
      CHECK(post[combo[a]] >= 0.99);
    }
  }
}

TEST_CASE("bayes posterior: symmetric midpoint and normalization") {
  const SyntheticWorld w = make_world(two_category_spec(), 10);
  Tensor mid({2});
  for (std::size_t i = 0; i < 2; ++i) {
    mid[i] = 0.5 * (w.component_means[0][i] + w.component_means[1][i]);
  }
  const auto post = bayes_posterior(w, mid, "gender");
  CHECK(post[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(post[1] == doctest::Approx(0.5).epsilon(1e-9));

  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Tensor x = Tensor::randn({2}, 8.0, rng);
    const auto p = bayes_posterior(w, x, "gender");
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("bayes posterior is invariant under component permutation") {
  const SyntheticWorld w = make_world(two_attribute_spec(), 12);
  // Permute storage by relabeling attribute categories consistently:
  // swap the two gender categories everywhere.
  SyntheticWorld permuted = w;
  std::swap(permuted.attributes[0].categories[0],
            permuted.attributes[0].categories[1]);
  for (std::size_t c = 0; c < w.combo_count(); ++c) {
    auto combo = w.combo_of_index(c);
    combo[0] = 1 - combo[0];
    permuted.component_means[permuted.index_of_combo(combo)] =
        w.component_means[c];
  }
  Rng rng(13);
  for (int i = 0; i < 20; ++i) {
    const Tensor x = Tensor::randn({2}, 6.0, rng);
    const auto a = bayes_posterior(w, x, "gender");
    const auto b = bayes_posterior(permuted, x, "gender");
    CHECK(a[0] == doctest::Approx(b[1]).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(b[0]).epsilon(1e-12));
  }
}

TEST_CASE("oracle classification accuracy exceeds 99.5% at 6-sigma") {
  const SyntheticWorld w = make_world(two_attribute_spec(), 14);
  Rng rng(15);
  const LabeledDataset ds = sample_dataset(w, "worker", 6000, rng);
  for (std::size_t a = 0; a < w.attributes.size(); ++a) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto truth = w.combo_of_index(ds.combo_labels[i]);
      if (bayes_classify(w, ds.samples[i], w.attributes[a].name) == truth[a]) {
        ++correct;
      }
    }
    const double acc =
        static_cast<double>(correct) / static_cast<double>(ds.size());
    CHECK(acc >= 0.995);
  }
}

TEST_CASE("vocabulary is dense, stable, and rejects unknowns") {
  const SyntheticWorld w = make_world(two_attribute_spec(), 16);
  const ConditionVocab vocab = w.vocab();
  CHECK(vocab.id("").value == 0);
  CHECK(vocab.id("worker").value == 1);
  CHECK(vocab.id("gender=g0").value == 2);
  CHECK(vocab.id("race=r3").value == 7);
  CHECK(vocab.size() == 8);
  CHECK_THROWS_AS(vocab.id("missing"), VocabError);

  const ConditionVocab restored = ConditionVocab::from_names(vocab.names());
  CHECK(restored.names() == vocab.names());
}
