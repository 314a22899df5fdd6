// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/world.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"

namespace fairdiff {

namespace {

void validate_pmf(const std::vector<double>& pmf, const std::string& what) {
  double sum = 0.0;
  for (double p : pmf) {
    if (p < 0.0) throw ConfigError(what + " has a negative entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError(what + " sums to " + std::to_string(sum) +
                      ", expected 1");
  }
}

}  // namespace

void WorldSpec::validate() const {
  if (dim < 1) throw ConfigError("world.dim must be >= 1");
  if (!(component_std > 0.0)) {
    throw ConfigError("world.component_std must be positive");
  }
  if (attributes.empty()) {
    throw ConfigError("world.attributes must not be empty");
  }
  std::set<std::string> seen;
  std::size_t combos = 1;
  for (const auto& attr : attributes) {
    if (attr.categories.size() < 2) {
      throw ConfigError("attribute '" + attr.name +
                        "' needs at least 2 categories");
    }
    if (!seen.insert(attr.name).second) {
      throw ConfigError("duplicate attribute name '" + attr.name + "'");
    }
    std::set<std::string> cats(attr.categories.begin(),
                               attr.categories.end());
    if (cats.size() != attr.categories.size()) {
      throw ConfigError("attribute '" + attr.name +
                        "' has duplicate categories");
    }
    combos *= attr.categories.size();
  }
  if (group_pmfs.empty()) {
    throw ConfigError("world.groups must define at least one group");
  }
  for (const auto& [name, pmf] : group_pmfs) {
    if (pmf.size() != combos) {
      throw ConfigError("group '" + name + "' pmf has " +
                        std::to_string(pmf.size()) + " entries, expected " +
                        std::to_string(combos));
    }
    validate_pmf(pmf, "group '" + name + "' pmf");
  }
}

std::vector<double> product_pmf(
    const std::vector<std::vector<double>>& marginals) {
  std::vector<double> pmf = {1.0};
  for (const auto& m : marginals) {
    std::vector<double> next;
    next.reserve(pmf.size() * m.size());
    for (double a : pmf) {
      for (double b : m) next.push_back(a * b);
    }
    pmf = std::move(next);
  }
  return pmf;
}

ConditionVocab ConditionVocab::from_names(std::vector<std::string> names) {
  if (names.empty() || !names.front().empty()) {
    throw ConfigError("vocabulary must start with the empty token");
  }
  ConditionVocab v;
  for (std::size_t i = 1; i < names.size(); ++i) v.add(names[i]);
  return v;
}

ConditionId ConditionVocab::add(const std::string& name) {
  if (name.empty()) throw ConfigError("cannot add a second empty token");
  if (contains(name)) {
    throw ConfigError("duplicate vocabulary token '" + name + "'");
  }
  names_.push_back(name);
  return ConditionId{static_cast<std::int32_t>(names_.size() - 1)};
}

ConditionId ConditionVocab::id(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return ConditionId{static_cast<std::int32_t>(i)};
  }
  throw VocabError("unknown condition token '" + name + "'");
}

bool ConditionVocab::contains(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::vector<std::size_t> SyntheticWorld::combo_of_index(
    std::size_t index) const {
  std::vector<std::size_t> combo(attributes.size());
  for (std::size_t a = attributes.size(); a-- > 0;) {
    const std::size_t k = attributes[a].category_count();
    combo[a] = index % k;
    index /= k;
  }
  return combo;
}

std::size_t SyntheticWorld::index_of_combo(
    const std::vector<std::size_t>& combo) const {
  std::size_t index = 0;
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    index = index * attributes[a].category_count() + combo[a];
  }
  return index;
}

int SyntheticWorld::attribute_index(const std::string& name) const {
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    if (attributes[a].name == name) return static_cast<int>(a);
  }
  return -1;
}

const AttributeSpec& SyntheticWorld::attribute(const std::string& name) const {
  const int idx = attribute_index(name);
  if (idx < 0) throw VocabError("unknown attribute '" + name + "'");
  return attributes[static_cast<std::size_t>(idx)];
}

double SyntheticWorld::min_separation() const {
  double best = 1e300;
  for (std::size_t i = 0; i < component_means.size(); ++i) {
    for (std::size_t j = i + 1; j < component_means.size(); ++j) {
      const Tensor diff = sub(component_means[i], component_means[j]);
      best = std::min(best, std::sqrt(squared_norm(diff)));
    }
  }
  return best;
}

ConditionVocab SyntheticWorld::vocab() const {
  ConditionVocab v;
  for (const auto& [group, pmf] : group_pmfs) v.add(group);
  for (const auto& attr : attributes) {
    for (const auto& cat : attr.categories) {
      v.add(ConditionVocab::category_token(attr.name, cat));
    }
  }
  return v;
}

Tensor SyntheticWorld::draw_component(std::size_t combo_index,
                                      Rng& rng) const {
  const Tensor& mean = component_means[combo_index];
  Tensor x = mean;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    x[i] += component_std * rng.gaussian();
  }
  return x;
}

Tensor SyntheticWorld::draw_category(int attr, std::size_t cat,
                                     Rng& rng) const {
  std::vector<std::size_t> matching;
  for (std::size_t c = 0; c < combo_count(); ++c) {
    if (combo_of_index(c)[static_cast<std::size_t>(attr)] == cat) {
      matching.push_back(c);
    }
  }
  const std::size_t pick = matching[rng.uniform_int(matching.size())];
  return draw_component(pick, rng);
}

SyntheticWorld make_world(const WorldSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticWorld world;
  world.dim = spec.dim;
  world.component_std = spec.component_std;
  world.attributes = spec.attributes;
  world.group_pmfs = spec.group_pmfs;

  std::size_t combos = 1;
  for (const auto& attr : spec.attributes) combos *= attr.categories.size();

  // Jittered lattice placement: spacing 8*std with per-coordinate jitter
  // bounded by std/sqrt(D) keeps every pair at least 6*std apart.
  const auto d = static_cast<std::size_t>(spec.dim);
  const double per_axis =
      std::ceil(std::pow(static_cast<double>(combos), 1.0 / spec.dim));
  if (per_axis > 4096.0) {
    throw ConfigError("component separation unsatisfiable: " +
                      std::to_string(combos) + " combinations in " +
                      std::to_string(spec.dim) + " dimensions");
  }
  const auto axis = static_cast<std::size_t>(per_axis);
  const double spacing = 8.0 * spec.component_std;
  const double jitter =
      spec.component_std / std::sqrt(static_cast<double>(spec.dim));

  Rng rng(seed);
  std::vector<Tensor> means;
  means.reserve(combos);
  for (std::size_t c = 0; c < combos; ++c) {
    Tensor mean({d});
    std::size_t cell = c;
    for (std::size_t k = 0; k < d; ++k) {
      const auto coord = static_cast<double>(cell % axis);
      cell /= axis;
      mean[k] = spacing * coord + jitter * (2.0 * rng.uniform01() - 1.0);
    }
    means.push_back(std::move(mean));
  }
  // Center the constellation at the origin.
  Tensor centroid({d});
  for (const auto& m : means) centroid.add_scaled(m, 1.0 / combos);
  for (auto& m : means) m.add_scaled(centroid, -1.0);
  world.component_means = std::move(means);

  const double min_sep = world.min_separation();
  if (combos > 1 && min_sep < 6.0 * spec.component_std) {
    throw ConfigError("component separation invariant violated: " +
                      std::to_string(min_sep) + " < 6*std");
  }
  return world;
}

LabeledDataset sample_dataset(const SyntheticWorld& world,
                              const std::string& group, std::size_t n,
                              Rng& rng) {
  const auto it = world.group_pmfs.find(group);
  if (it == world.group_pmfs.end()) {
    throw VocabError("unknown group '" + group + "'");
  }
  const ConditionId group_id = world.vocab().id(group);
  LabeledDataset ds;
  ds.samples.reserve(n);
  ds.combo_labels.reserve(n);
  ds.cond_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t combo = rng.categorical(it->second);
    ds.samples.push_back(world.draw_component(combo, rng));
    ds.combo_labels.push_back(combo);
    ds.cond_ids.push_back(group_id);
  }
  return ds;
}

std::vector<double> bayes_posterior(const SyntheticWorld& world,
                                    const Tensor& x,
                                    const std::string& attribute) {
  const int attr = world.attribute_index(attribute);
  if (attr < 0) throw VocabError("unknown attribute '" + attribute + "'");
  const std::size_t k =
      world.attributes[static_cast<std::size_t>(attr)].category_count();

  // Uniform prior over combinations; log-sum-exp for stability.
  const double inv_two_var =
      1.0 / (2.0 * world.component_std * world.component_std);
  std::vector<double> log_like(world.combo_count());
  double max_ll = -1e300;
  for (std::size_t c = 0; c < world.combo_count(); ++c) {
    const Tensor diff = sub(x, world.component_means[c]);
    log_like[c] = -squared_norm(diff) * inv_two_var;
    max_ll = std::max(max_ll, log_like[c]);
  }
  std::vector<double> post(k, 0.0);
  double z = 0.0;
  for (std::size_t c = 0; c < world.combo_count(); ++c) {
    const double w = std::exp(log_like[c] - max_ll);
    post[world.combo_of_index(c)[static_cast<std::size_t>(attr)]] += w;
    z += w;
  }
  for (double& p : post) p /= z;
  return post;
}

std::size_t bayes_classify(const SyntheticWorld& world, const Tensor& x,
                           const std::string& attribute) {
  const auto post = bayes_posterior(world, x, attribute);
  return static_cast<std::size_t>(
      std::max_element(post.begin(), post.end()) - post.begin());
}

}  // namespace fairdiff
