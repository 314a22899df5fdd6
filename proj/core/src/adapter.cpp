// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"

namespace fairdiff {

std::string to_string(AdapterTargets targets) {
  return targets == AdapterTargets::kCrossAttentionOnly ? "cross_attention"
                                                        : "all_matrices";
}

AdapterTargets adapter_targets_from_string(const std::string& s) {
  if (s == "cross_attention") return AdapterTargets::kCrossAttentionOnly;
  if (s == "all_matrices") return AdapterTargets::kAllMatrices;
  throw ConfigError("unknown adapter target policy '" + s +
                    "' (expected cross_attention or all_matrices)");
}

std::vector<std::string> adapter_target_names(const DenoiserModel& model,
                                              AdapterTargets targets) {
  std::vector<std::string> names;
  for (const auto& info : model.matrix_catalog()) {
    if (targets == AdapterTargets::kCrossAttentionOnly) {
      const bool is_attn = info.name.ends_with(".wq") ||
                           info.name.ends_with(".wk") ||
                           info.name.ends_with(".wv") ||
                           info.name.ends_with(".wo");
      if (!is_attn) continue;
    }
    names.push_back(info.name);
  }
  return names;
}

StackedAdapter stack(const AttributeAdapter& adapter) {
  if (adapter.pairs.empty()) {
    throw ConfigError("cannot stack adapter '" + adapter.category +
                      "' with no pairs");
  }
  std::size_t max_p = 0;
  std::size_t max_q = 0;
  for (const auto& pair : adapter.pairs) {
    if (pair.p.numel() == 0 || pair.q.numel() == 0) {
      throw ConfigError("adapter '" + adapter.category +
                        "' is missing the pair for target '" + pair.target +
                        "'");
    }
    max_p = std::max(max_p, pair.p.numel());
    max_q = std::max(max_q, pair.q.numel());
  }
  const std::size_t r = adapter.pairs.size();
  StackedAdapter s;
  s.p = Tensor({max_p, r});
  s.q = Tensor({max_q, r});
  for (std::size_t c = 0; c < r; ++c) {
    const auto& pair = adapter.pairs[c];
    for (std::size_t i = 0; i < pair.p.numel(); ++i) s.p.at(i, c) = pair.p[i];
    for (std::size_t i = 0; i < pair.q.numel(); ++i) s.q.at(i, c) = pair.q[i];
  }
  return s;
}

AttributeAdapter unstack(const StackedAdapter& stacked,
                         const AttributeAdapter& reference) {
  if (stacked.p.cols() != reference.pairs.size()) {
    throw DimensionError("stacked adapter has " +
                         std::to_string(stacked.p.cols()) +
                         " columns, reference expects " +
                         std::to_string(reference.pairs.size()));
  }
  AttributeAdapter out;
  out.category = reference.category;
  out.pairs.reserve(reference.pairs.size());
  for (std::size_t c = 0; c < reference.pairs.size(); ++c) {
    AdapterPair pair;
    pair.target = reference.pairs[c].target;
    pair.p = Tensor({reference.pairs[c].p.numel()});
    pair.q = Tensor({reference.pairs[c].q.numel()});
    for (std::size_t i = 0; i < pair.p.numel(); ++i) {
      pair.p[i] = stacked.p.at(i, c);
    }
    for (std::size_t i = 0; i < pair.q.numel(); ++i) {
      pair.q[i] = stacked.q.at(i, c);
    }
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

void AdapterBank::validate() const {
  if (adapters.size() != categories.size() || adapters.size() < 2) {
    throw ConfigError("bank '" + attribute +
                      "' needs one adapter per category (>= 2)");
  }
  for (std::size_t k = 0; k < adapters.size(); ++k) {
    if (adapters[k].category != categories[k]) {
      throw ConfigError("bank '" + attribute + "' category order mismatch");
    }
    if (adapters[k].pairs.size() != adapters[0].pairs.size()) {
      throw ConfigError("bank '" + attribute +
                        "' adapters are not structurally congruent");
    }
    for (std::size_t i = 0; i < adapters[k].pairs.size(); ++i) {
      if (adapters[k].pairs[i].target != adapters[0].pairs[i].target) {
        throw ConfigError("bank '" + attribute +
                          "' adapters target different matrices");
      }
    }
  }
}

AdapterBank make_bank(const DenoiserModel& model, const std::string& attribute,
                      const std::vector<std::string>& categories,
                      AdapterTargets targets, Rng& rng, double q_init_std) {
  if (categories.size() < 2) {
    throw ConfigError("bank '" + attribute + "' needs at least 2 categories");
  }
  const auto names = adapter_target_names(model, targets);
  AdapterBank bank;
  bank.attribute = attribute;
  bank.categories = categories;
  for (const auto& cat : categories) {
    AttributeAdapter adapter;
    adapter.category = cat;
    for (const auto& name : names) {
      const int idx = model.matrix_index(name);
      const auto& info = model.matrix_catalog()[static_cast<std::size_t>(idx)];
      AdapterPair pair;
      pair.target = name;
      pair.p = Tensor({info.rows});  // zero: bank starts as an exact no-op
      pair.q = Tensor::randn({info.cols}, q_init_std, rng);
      adapter.pairs.push_back(std::move(pair));
    }
    bank.adapters.push_back(std::move(adapter));
  }
  bank.validate();
  return bank;
}

const AttributeAdapter& select(const AdapterBank& bank,
                               const IndicatorVector& h) {
  h.validate();
  if (h.h.size() != bank.category_count()) {
    throw ConfigError("indicator of length " + std::to_string(h.h.size()) +
                      " does not match bank '" + bank.attribute + "' with " +
                      std::to_string(bank.category_count()) + " categories");
  }
  return bank.adapters[h.chosen];
}

namespace {

void append_adapter_terms(ActiveAdapters& view, const DenoiserModel& model,
                          const AttributeAdapter& adapter, double alpha_scale,
                          bool trainable) {
  for (const auto& pair : adapter.pairs) {
    const int idx = model.matrix_index(pair.target);
    if (idx < 0) {
      throw DimensionError("adapter target '" + pair.target +
                           "' does not exist in the model");
    }
    const auto& info = model.matrix_catalog()[static_cast<std::size_t>(idx)];
    if (pair.p.numel() != info.rows || pair.q.numel() != info.cols) {
      throw DimensionError("adapter pair for '" + pair.target +
                           "' has shape (" + std::to_string(pair.p.numel()) +
                           ", " + std::to_string(pair.q.numel()) +
                           "), matrix is " + std::to_string(info.rows) + "x" +
                           std::to_string(info.cols));
    }
    RankOneTerm term;
    term.p = &pair.p;
    term.q = &pair.q;
    term.alpha = alpha_scale;
    term.trainable_slot = trainable ? view.trainable_slots++ : -1;
    view.by_matrix[static_cast<std::size_t>(idx)].push_back(term);
  }
}

}  // namespace

ActiveAdapters patch_weights(const DenoiserModel& model,
                             const AttributeAdapter& adapter,
                             double alpha_scale, bool trainable) {
  ActiveAdapters view;
  view.model = &model;
  view.by_matrix.resize(model.matrix_catalog().size());
  append_adapter_terms(view, model, adapter, alpha_scale, trainable);
  return view;
}

ActiveAdapters compose_views(
    const DenoiserModel& model,
    const std::vector<std::pair<const AdapterBank*, IndicatorVector>>&
        selections,
    double alpha_scale) {
  ActiveAdapters view;
  view.model = &model;
  view.by_matrix.resize(model.matrix_catalog().size());
  // Canonical attribute order keeps the composition bitwise
  // order-independent: floating-point sums depend on evaluation order.
  std::vector<const std::pair<const AdapterBank*, IndicatorVector>*> ordered;
  for (const auto& sel : selections) ordered.push_back(&sel);
  std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
    return a->first->attribute < b->first->attribute;
  });
  std::set<std::string> seen;
  for (const auto* sel : ordered) {
    if (!seen.insert(sel->first->attribute).second) {
      throw ConfigError("attribute '" + sel->first->attribute +
                        "' appears twice in the view composition");
    }
    const AttributeAdapter& chosen = select(*sel->first, sel->second);
    append_adapter_terms(view, model, chosen, alpha_scale, false);
  }
  return view;
}

namespace {

void check_congruent(const AdapterBank& a, const AdapterBank& b) {
  const auto& ref = a.adapters[0].pairs;
  const auto& cur = b.adapters[0].pairs;
  if (ref.size() != cur.size()) {
    throw ConfigError("banks '" + a.attribute + "' and '" + b.attribute +
                      "' are not congruent (different pair counts)");
  }
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (ref[i].target != cur[i].target ||
        ref[i].p.numel() != cur[i].p.numel() ||
        ref[i].q.numel() != cur[i].q.numel()) {
      throw ConfigError("banks '" + a.attribute + "' and '" + b.attribute +
                        "' are not congruent at target '" + ref[i].target +
                        "'");
    }
  }
}

// loss += sum over column pairs of (u . w)^2 on zero-padded stacks;
// accumulates 2*(u . w)*u into the current bank's column gradients.
void accumulate_stack_penalty(const Tensor& prior, const Tensor& current,
                              double& loss, Tensor* grad_current) {
  for (std::size_t a = 0; a < prior.cols(); ++a) {
    for (std::size_t b = 0; b < current.cols(); ++b) {
      double d = 0.0;
      for (std::size_t i = 0; i < prior.rows(); ++i) {
        d += prior.at(i, a) * current.at(i, b);
      }
      loss += d * d;
      if (grad_current != nullptr) {
        for (std::size_t i = 0; i < prior.rows(); ++i) {
          grad_current->at(i, b) += 2.0 * d * prior.at(i, a);
        }
      }
    }
  }
}

}  // namespace

OrthogonalityResult orthogonality_loss(
    const std::vector<const AdapterBank*>& banks_prior,
    const AdapterBank& bank_current, bool with_gradients) {
  bank_current.validate();
  OrthogonalityResult result;
  if (with_gradients) {
    result.grad_p.resize(bank_current.adapters.size());
    result.grad_q.resize(bank_current.adapters.size());
    for (std::size_t k = 0; k < bank_current.adapters.size(); ++k) {
      for (const auto& pair : bank_current.adapters[k].pairs) {
        result.grad_p[k].push_back(Tensor({pair.p.numel()}));
        result.grad_q[k].push_back(Tensor({pair.q.numel()}));
      }
    }
  }
  if (banks_prior.empty()) return result;

  std::vector<StackedAdapter> current_stacks;
  for (const auto& adapter : bank_current.adapters) {
    current_stacks.push_back(stack(adapter));
  }

  for (const AdapterBank* prior : banks_prior) {
    prior->validate();
    check_congruent(*prior, bank_current);
    for (const auto& prior_adapter : prior->adapters) {
      const StackedAdapter ps = stack(prior_adapter);
      for (std::size_t k = 0; k < bank_current.adapters.size(); ++k) {
        Tensor gp(current_stacks[k].p.shape());
        Tensor gq(current_stacks[k].q.shape());
        accumulate_stack_penalty(ps.p, current_stacks[k].p, result.loss,
                                 with_gradients ? &gp : nullptr);
        accumulate_stack_penalty(ps.q, current_stacks[k].q, result.loss,
                                 with_gradients ? &gq : nullptr);
        if (with_gradients) {
          const auto& pairs = bank_current.adapters[k].pairs;
          for (std::size_t c = 0; c < pairs.size(); ++c) {
            for (std::size_t i = 0; i < pairs[c].p.numel(); ++i) {
              result.grad_p[k][c][i] += gp.at(i, c);
            }
            for (std::size_t i = 0; i < pairs[c].q.numel(); ++i) {
              result.grad_q[k][c][i] += gq.at(i, c);
            }
          }
        }
      }
    }
  }
  return result;
}

double orthogonality_random_baseline(
    const std::vector<const AdapterBank*>& banks_prior,
    const AdapterBank& bank_current, Rng& rng, int repeats) {
  if (banks_prior.empty() || repeats < 1) return 0.0;
  double total = 0.0;
  for (int rep = 0; rep < repeats; ++rep) {
    AdapterBank randomized = bank_current;
    for (auto& adapter : randomized.adapters) {
      for (auto& pair : adapter.pairs) {
        for (Tensor* vec : {&pair.p, &pair.q}) {
          const double norm = std::sqrt(squared_norm(*vec));
          if (norm == 0.0) continue;
          Tensor fresh = Tensor::randn({vec->numel()}, 1.0, rng);
          const double fresh_norm = std::sqrt(squared_norm(fresh));
          for (std::size_t i = 0; i < vec->numel(); ++i) {
            (*vec)[i] = fresh[i] * norm / fresh_norm;
          }
        }
      }
    }
    total += orthogonality_loss(banks_prior, randomized, false).loss;
  }
  return total / repeats;
}

}  // namespace fairdiff
