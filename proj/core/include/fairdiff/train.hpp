// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairdiff/adapter.hpp"
#include "fairdiff/diffusion.hpp"
#include "fairdiff/nn.hpp"
#include "fairdiff/world.hpp"

namespace fairdiff {

/// Base-model pretraining settings (Adam on the denoising objective).
struct PretrainConfig {
  int epochs = 30;
  int batch = 64;
  double lr = 1e-3;
  std::size_t dataset_size = 8192;
  /// Probability of replacing the condition with the empty token during
  /// training, enabling classifier-free guidance.
  double cond_dropout = 0.1;
  /// Fraction of rows conditioned on group tokens; the rest is split evenly
  /// across category tokens with pure per-category data.
  double group_fraction = 0.5;
  std::size_t holdout_size = 256;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PretrainMetricsRow {
  int epoch = 0;
  double train_loss = 0.0;
  double holdout_loss = 0.0;
};

struct PretrainResult {
  DenoiserModel model;
  std::vector<PretrainMetricsRow> metrics;
};

/// Trains a fresh denoiser on the world's biased data, conditioned on both
/// group tokens (bias mixture) and category tokens (pure per-category data,
/// other attributes uniform), with condition dropout for CFG.
/// `group_mix` weights the group tokens; empty means all groups equally.
PretrainResult pretrain_base(const SyntheticWorld& world,
                             const std::map<std::string, double>& group_mix,
                             const NoiseSchedule& sched,
                             const ModelSpec& arch,
                             const PretrainConfig& cfg);

/// Adapter-training settings for one attribute.
struct TrainConfig {
  double eta = 0.3;          // noise-composition strength
  double gamma = 0.1;        // orthogonal-regularization weight
  double lr = 1e-2;          // plain gradient-descent step
  int iters = 1000;          // steps per category
  double alpha_scale = 0.3;  // rank-1 application strength during training
  int batch = 32;            // latents per step
  int t_lo = -1;             // timestep range; -1 resolves to 0.05T / 0.95T
  int t_hi = -1;
  double q_init_std = 1e-3;
  AdapterTargets targets = AdapterTargets::kCrossAttentionOnly;
  std::string group;  // target group token; "" debiases the empty condition
  std::uint64_t seed = 1;

  void validate() const;
  int resolved_t_lo(int t_steps) const;
  int resolved_t_hi(int t_steps) const;
};

/// Latents discovered from the frozen model itself: partial reverse
/// diffusion from pure noise under the group condition, stopped at a
/// uniformly random timestep. No external data is involved.
struct SelfDiscoveryBatch {
  std::vector<Tensor> latents;
  std::vector<int> timesteps;
  ConditionId group;
};

SelfDiscoveryBatch self_discover_latents(const DenoiserModel& model_frozen,
                                         ConditionId group,
                                         const NoiseSchedule& sched, int t_lo,
                                         int t_hi, int batch, Rng& rng,
                                         int threads = 1);

/// Regression target eps_L: affine composition of the frozen model's group-
/// and category-conditioned predictions,
/// eps_g + eta * (eps_d - eps_g). No adapters are active.
Tensor guidance_target(const DenoiserModel& model_frozen, const Tensor& x_t,
                       ConditionId group, ConditionId category, int t,
                       double eta);

struct StepLosses {
  double guidance = 0.0;
  double orth = 0.0;
  double total = 0.0;
};

/// One gradient-descent update of a single category's (p, q) vectors
/// against the composed-noise target, plus the weighted cross-bank
/// orthogonality penalty. Only bank_current.adapters[category_index] moves.
StepLosses adapter_train_step(const DenoiserModel& model_frozen,
                              AdapterBank& bank_current,
                              std::size_t category_index,
                              const std::vector<const AdapterBank*>&
                                  banks_prior,
                              const SelfDiscoveryBatch& batch,
                              ConditionId category_token,
                              const TrainConfig& cfg);

struct TrainCurveRow {
  std::string attribute;
  std::string category;
  int step = 0;
  double guidance = 0.0;
  double orth = 0.0;
  double total = 0.0;
};

struct TrainAttributeResult {
  AdapterBank bank;
  std::vector<TrainCurveRow> curve;
  double final_orth = 0.0;
  double random_baseline_orth = 0.0;
};

/// Sequentially trains one adapter per category of the attribute against
/// the frozen base. Previously trained banks enter through the
/// orthogonality penalty. The base model is never mutated.
TrainAttributeResult train_attribute(
    const DenoiserModel& model_frozen, const SyntheticWorld& world,
    const AttributeSpec& attribute, const NoiseSchedule& sched,
    const std::vector<const AdapterBank*>& banks_prior, const TrainConfig& cfg,
    int curve_stride = 10, int threads = 1);

}  // namespace fairdiff
