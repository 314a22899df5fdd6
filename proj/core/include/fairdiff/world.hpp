// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairdiff/nn.hpp"
#include "fairdiff/tensor.hpp"

namespace fairdiff {

class Rng;

/// A discrete attribute with K >= 2 named categories.
struct AttributeSpec {
  std::string name;
  std::vector<std::string> categories;

  std::size_t category_count() const { return categories.size(); }
};

/// Declarative description of a ground-truth world. Groups are named bias
/// distributions over full category combinations.
struct WorldSpec {
  int dim = 2;
  double component_std = 1.0;
  std::vector<AttributeSpec> attributes;
  std::map<std::string, std::vector<double>> group_pmfs;

  void validate() const;
};

/// Outer product of per-attribute marginals, in combination index order.
std::vector<double> product_pmf(
    const std::vector<std::vector<double>>& marginals);

/// Dense, stable condition-token vocabulary: the empty token, one token per
/// group, and one token per (attribute, category) pair.
class ConditionVocab {
 public:
  ConditionVocab() { names_.push_back(""); }

  static ConditionVocab from_names(std::vector<std::string> names);

  ConditionId add(const std::string& name);
  ConditionId id(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  int size() const { return static_cast<int>(names_.size()); }

  static std::string category_token(const std::string& attribute,
                                    const std::string& category) {
    return attribute + "=" + category;
  }

 private:
  std::vector<std::string> names_;
};

/// Gaussian-mixture ground truth with one isotropic component per category
/// combination and an exact Bayes posterior. Immutable after construction.
class SyntheticWorld {
 public:
  int dim = 0;
  double component_std = 1.0;
  std::vector<AttributeSpec> attributes;
  std::vector<Tensor> component_means;  // indexed by combination
  std::map<std::string, std::vector<double>> group_pmfs;

  std::size_t combo_count() const { return component_means.size(); }
  std::vector<std::size_t> combo_of_index(std::size_t index) const;
  std::size_t index_of_combo(const std::vector<std::size_t>& combo) const;

  int attribute_index(const std::string& name) const;  // -1 if unknown
  const AttributeSpec& attribute(const std::string& name) const;

  /// Smallest pairwise distance between component means.
  double min_separation() const;

  /// Vocabulary covering this world's groups and categories.
  ConditionVocab vocab() const;

  /// Fresh draw from one component.
  Tensor draw_component(std::size_t combo_index, Rng& rng) const;

  /// Fresh draw from the uniform mixture of components whose combination
  /// matches category `cat` of attribute `attr`.
  Tensor draw_category(int attr, std::size_t cat, Rng& rng) const;
};

/// Places component means on a jittered lattice (deterministic from seed)
/// honoring the >= 6*std pairwise separation invariant.
SyntheticWorld make_world(const WorldSpec& spec, std::uint64_t seed);

struct LabeledDataset {
  std::vector<Tensor> samples;
  std::vector<std::size_t> combo_labels;
  std::vector<ConditionId> cond_ids;  // condition used at training time

  std::size_t size() const { return samples.size(); }
};

/// Biased group-conditional sampling: combination ~ group PMF, then a draw
/// from that component. cond_ids are filled with the group token.
LabeledDataset sample_dataset(const SyntheticWorld& world,
                              const std::string& group, std::size_t n,
                              Rng& rng);

/// Exact posterior P(category | x) for one attribute, marginalized over the
/// other attributes under a uniform prior across combinations.
std::vector<double> bayes_posterior(const SyntheticWorld& world,
                                    const Tensor& x,
                                    const std::string& attribute);

/// argmax of bayes_posterior.
std::size_t bayes_classify(const SyntheticWorld& world, const Tensor& x,
                           const std::string& attribute);

}  // namespace fairdiff
