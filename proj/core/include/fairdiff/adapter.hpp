// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "fairdiff/indicator.hpp"
#include "fairdiff/nn.hpp"
#include "fairdiff/tensor.hpp"

namespace fairdiff {

class Rng;

/// Which of a model's matrices receive adapters.
enum class AdapterTargets {
  kCrossAttentionOnly,  // w_q, w_k, w_v, w_out of every attention block
  kAllMatrices,         // every matrix in the catalog, trunk included
};

std::string to_string(AdapterTargets targets);
AdapterTargets adapter_targets_from_string(const std::string& s);

/// Catalog names of the matrices selected by a target policy.
std::vector<std::string> adapter_target_names(const DenoiserModel& model,
                                              AdapterTargets targets);

/// Rank-1 patch of one named matrix: W acts as W + p q^T once applied.
struct AdapterPair {
  std::string target;
  Tensor p;  // [rows of target]
  Tensor q;  // [cols of target]
};

/// All pairs of one category's adapter, covering every adapted matrix.
struct AttributeAdapter {
  std::string category;
  std::vector<AdapterPair> pairs;
};

/// Column-stacked, zero-padded adapter matrices: column i holds pair i's
/// vector padded with zeros to the longest dimension.
struct StackedAdapter {
  Tensor p;  // [max_p_dim x r]
  Tensor q;  // [max_q_dim x r]
};

StackedAdapter stack(const AttributeAdapter& adapter);

/// Inverse of stack(): rebuilds pairs given the per-pair dimensions implied
/// by `reference` (targets and vector lengths).
AttributeAdapter unstack(const StackedAdapter& stacked,
                         const AttributeAdapter& reference);

/// One bank per attribute: K structurally congruent adapters in category
/// order.
struct AdapterBank {
  std::string attribute;
  std::vector<std::string> categories;
  std::vector<AttributeAdapter> adapters;

  std::size_t category_count() const { return adapters.size(); }
  void validate() const;
};

/// Zero-initialized p / small-normal q bank for a model and target policy.
/// Zero p makes a freshly attached bank an exact no-op.
AdapterBank make_bank(const DenoiserModel& model, const std::string& attribute,
                      const std::vector<std::string>& categories,
                      AdapterTargets targets, Rng& rng,
                      double q_init_std = 1e-3);

/// One-hot gated selection: returns the adapter at the indicator's index.
const AttributeAdapter& select(const AdapterBank& bank,
                               const IndicatorVector& h);

/// Lazy rank-1 view of the model: every adapted matrix behaves as
/// W + alpha_scale * p q^T. The model is never mutated. `trainable` marks
/// the adapter's pairs as gradient slots 0..r-1.
ActiveAdapters patch_weights(const DenoiserModel& model,
                             const AttributeAdapter& adapter,
                             double alpha_scale, bool trainable = false);

/// Additive multi-attribute composition: one selected adapter per bank.
/// Order-independent; duplicate attributes are rejected.
ActiveAdapters compose_views(
    const DenoiserModel& model,
    const std::vector<std::pair<const AdapterBank*, IndicatorVector>>&
        selections,
    double alpha_scale);

struct OrthogonalityResult {
  double loss = 0.0;
  /// d(loss)/d(p), d(loss)/d(q) for every pair of every adapter of the
  /// current bank, indexed [adapter][pair].
  std::vector<std::vector<Tensor>> grad_p;
  std::vector<std::vector<Tensor>> grad_q;
};

/// Cross-bank subspace penalty between previously trained banks and the
/// current one: sum over prior banks and over category pairs of
/// ||P_i^T P_t||_F^2 + ||Q_i^T Q_t||_F^2 on the stacked (padded) matrices.
/// Zero exactly when every cross-bank column inner product vanishes.
/// Differentiable in the current bank only.
OrthogonalityResult orthogonality_loss(
    const std::vector<const AdapterBank*>& banks_prior,
    const AdapterBank& bank_current, bool with_gradients = true);

/// Same penalty evaluated against a random bank whose vectors keep the
/// current bank's norms; used as the scale reference for reporting.
double orthogonality_random_baseline(
    const std::vector<const AdapterBank*>& banks_prior,
    const AdapterBank& bank_current, Rng& rng, int repeats = 8);

}  // namespace fairdiff
