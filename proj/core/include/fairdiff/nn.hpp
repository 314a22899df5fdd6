// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairdiff/tensor.hpp"

namespace fairdiff {

class Rng;

/// Dense id into the condition vocabulary. Id 0 is always the empty
/// (unconditional) token.
struct ConditionId {
  std::int32_t value = 0;
  friend bool operator==(ConditionId a, ConditionId b) {
    return a.value == b.value;
  }
};

inline constexpr ConditionId kEmptyCondition{0};

enum class ActivationKind { kSilu, kIdentity };

double activate(ActivationKind kind, double x);
double activate_grad(ActivationKind kind, double x);

/// y = W x + bias. Bias is optional; an empty tensor means zero bias.
struct LinearLayer {
  std::string name;
  Tensor weight;  // [m x n]
  Tensor bias;    // [m] or empty

  std::size_t out_dim() const { return weight.rows(); }
  std::size_t in_dim() const { return weight.cols(); }
};

/// One active rank-1 weight patch: the owning matrix behaves as
/// W + alpha * p q^T, i.e. forwards compute y = Wx + alpha*(q.x)*p.
/// `trainable_slot` >= 0 marks the pair as trainable and names the slot in
/// the gradient output; -1 means frozen.
struct RankOneTerm {
  const Tensor* p = nullptr;
  const Tensor* q = nullptr;
  double alpha = 1.0;
  int trainable_slot = -1;
};

class DenoiserModel;

/// Revocable view of a model with rank-1 patches attached to a subset of
/// its matrices. The base model is never mutated; dropping the view
/// restores base behavior. Views compose additively and are cheap to copy.
struct ActiveAdapters {
  const DenoiserModel* model = nullptr;
  std::vector<std::vector<RankOneTerm>> by_matrix;  // indexed by catalog id
  int trainable_slots = 0;

  bool empty() const;
};

/// Scaled-dot-product cross-attention: a single query token from the
/// sample path attends over the condition tokens.
struct CrossAttentionBlock {
  LinearLayer w_q;    // [attn_dim x sample_dim]
  LinearLayer w_k;    // [attn_dim x cond_dim]
  LinearLayer w_v;    // [attn_dim x cond_dim]
  LinearLayer w_out;  // [sample_dim x attn_dim]
  int head_count = 1;
  int sample_dim = 0;
  int cond_dim = 0;

  int attn_dim() const { return static_cast<int>(w_q.out_dim()); }
};

enum class BlockKind { kLinear, kCrossAttention };

struct TrunkBlock {
  BlockKind kind = BlockKind::kLinear;
  LinearLayer linear;        // valid when kind == kLinear
  CrossAttentionBlock attn;  // valid when kind == kCrossAttention
};

/// Serializable architecture descriptor. Two models are congruent (banks
/// interchangeable) iff their descriptors match.
struct ModelSpec {
  int sample_dim = 2;
  int hidden_dim = 24;
  int attn_dim = 16;
  int head_count = 2;
  int cond_dim = 12;
  int cond_tokens = 2;
  int time_dim = 16;
  int vocab_size = 2;
  std::vector<BlockKind> blocks = {
      BlockKind::kLinear, BlockKind::kCrossAttention, BlockKind::kLinear,
      BlockKind::kCrossAttention, BlockKind::kLinear};
  ActivationKind activation = ActivationKind::kSilu;
  /// Seed for the frozen condition-embedding table. Derived from the
  /// vocabulary (not the run seed) so that all models sharing a vocabulary
  /// read conditions through identical embeddings, the way a shared frozen
  /// text encoder would provide them.
  std::uint64_t embed_seed = 1;

  std::string key() const;  // canonical congruence string
  void validate() const;
};

struct MatrixInfo {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct NamedParam {
  std::string name;
  Tensor* tensor;
};

struct GradientTape;

enum class GradScope { kAdaptersOnly, kAllParameters };

/// Gradient output of a backward pass. `model` is keyed by parameter name
/// and stays empty under GradScope::kAdaptersOnly. Adapter gradients are
/// indexed by the trainable slot declared in the ActiveAdapters view.
struct Gradients {
  std::map<std::string, Tensor> model;
  std::vector<Tensor> adapter_p;
  std::vector<Tensor> adapter_q;

  void scale_all(double s);
  bool all_finite() const;
};

/// Frozen conditional noise-prediction network: an MLP trunk over the flat
/// sample vector with interleaved cross-attention blocks that read the
/// condition tokens, plus sinusoidal time conditioning.
class DenoiserModel {
 public:
  ModelSpec spec;
  Tensor cond_embed;      // [vocab_size x (cond_tokens*cond_dim)], frozen
  LinearLayer time_proj;  // [hidden x time_dim]
  std::vector<TrunkBlock> trunk;
  LinearLayer head;  // [sample_dim x hidden]

  /// Ordered list of every weight matrix reachable by adapters.
  const std::vector<MatrixInfo>& matrix_catalog() const { return catalog_; }
  int matrix_index(const std::string& name) const;
  const LinearLayer& matrix_at(int catalog_index) const;
  LinearLayer& matrix_at(int catalog_index);

  /// Trainable parameters (weights and biases; the condition-embedding
  /// table is a frozen buffer and not listed).
  std::vector<NamedParam> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;

  /// Condition tokens for an id as a [cond_tokens x cond_dim] matrix.
  Tensor condition_tokens(ConditionId id) const;

  void rebuild_catalog();
  std::uint64_t parameter_hash() const;

 private:
  std::vector<MatrixInfo> catalog_;
  std::vector<LinearLayer*> catalog_ptrs_;
};

/// Fresh model with scaled-normal trunk init (std 1/sqrt(fan_in)) and the
/// vocabulary-seeded frozen condition table.
DenoiserModel make_denoiser(const ModelSpec& spec, Rng& rng);

Tensor sinusoidal_time_embedding(int t, int dim);

/// y = Wx + bias (+ active rank-1 terms). Throws DimensionError naming the
/// layer on input mismatch; adapter dim mismatch names the target matrix.
Tensor linear_forward(const LinearLayer& layer, const Tensor& x,
                      const std::vector<RankOneTerm>* terms = nullptr);

/// Per-projection adapter slices for one attention block.
struct AttnAdapterSlices {
  const std::vector<RankOneTerm>* q = nullptr;
  const std::vector<RankOneTerm>* k = nullptr;
  const std::vector<RankOneTerm>* v = nullptr;
  const std::vector<RankOneTerm>* out = nullptr;
};

/// Residual cross-attention: returns sample + W_out(attend(q, k, v)).
/// `cond` holds one condition token per row.
Tensor cross_attention_forward(const CrossAttentionBlock& block,
                               const Tensor& sample, const Tensor& cond,
                               const AttnAdapterSlices* adapters = nullptr);

/// Predicted noise for a sample at timestep t under condition `cond`.
/// Passing a tape turns on training mode and records every intermediate
/// needed by backward().
Tensor denoiser_forward(const DenoiserModel& model, const Tensor& x,
                        ConditionId cond, int t,
                        const ActiveAdapters* adapters = nullptr,
                        GradientTape* tape = nullptr);

/// Reverse-mode gradients for a recorded forward. Consumes the tape; a
/// second call on the same tape throws. Under kAdaptersOnly, only the
/// trainable adapter slots receive gradients.
void backward_into(const DenoiserModel& model, GradientTape& tape,
                   const Tensor& dloss_dout, GradScope scope, Gradients& acc);

Gradients backward(const DenoiserModel& model, GradientTape& tape,
                   const Tensor& dloss_dout, GradScope scope);

/// Tape of forward intermediates. Opaque to callers; worker-local.
struct GradientTape {
  struct LinearRec {
    Tensor input;
    Tensor preact;
    bool residual = false;
  };
  struct AttnRec {
    Tensor input;
    Tensor q;        // [attn_dim]
    Tensor k;        // [n_tokens x attn_dim]
    Tensor v;        // [n_tokens x attn_dim]
    Tensor weights;  // [heads x n_tokens]
    Tensor concat;   // [attn_dim]
  };
  struct BlockRec {
    BlockKind kind;
    LinearRec linear;
    AttnRec attn;
  };

  Tensor input;
  ConditionId cond;
  int t = 0;
  Tensor cond_tokens;
  Tensor time_sin;
  Tensor time_out;  // projected time vector added into the stream
  std::vector<BlockRec> blocks;
  Tensor head_input;
  const ActiveAdapters* adapters = nullptr;
  bool consumed = false;
};

/// Tape-recording variant used by denoiser_forward.
Tensor cross_attention_forward(const CrossAttentionBlock& block,
                               const Tensor& sample, const Tensor& cond,
                               const AttnAdapterSlices* adapters,
                               GradientTape::AttnRec* rec);

}  // namespace fairdiff
