// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstring>
#include <vector>

#include "fairdiff/nn.hpp"
#include "fairdiff/rng.hpp"
#include "fairdiff/tensor.hpp"

namespace fairdiff::test {

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

/// Small trainable model: D=3, two attention blocks, ~1k parameters.
inline DenoiserModel small_model(std::uint64_t seed = 11,
                                 int vocab_size = 4) {
  ModelSpec spec;
  spec.sample_dim = 3;
  spec.hidden_dim = 8;
  spec.attn_dim = 4;
  spec.head_count = 2;
  spec.cond_dim = 5;
  spec.cond_tokens = 2;
  spec.time_dim = 6;
  spec.vocab_size = vocab_size;
  spec.blocks = {BlockKind::kLinear, BlockKind::kCrossAttention,
                 BlockKind::kLinear, BlockKind::kCrossAttention};
  spec.embed_seed = 99;
  Rng rng(seed);
  return make_denoiser(spec, rng);
}

inline LinearLayer make_layer(const std::string& name, std::size_t rows,
                              std::size_t cols, std::vector<double> w,
                              std::vector<double> b = {}) {
  LinearLayer l;
  l.name = name;
  l.weight = Tensor::matrix_of(rows, cols, std::move(w));
  if (!b.empty()) l.bias = Tensor::vector_of(std::move(b));
  return l;
}

/// Hand-built fixture whose output is exactly `output_gain * z`: identity
/// activation, one residual linear block with weight (gain-1)*I, attention
/// blocks silenced through zero output projections, zero time projection.
inline DenoiserModel linear_fixture_model(int dim, double output_gain,
                                          int vocab_size = 2) {
  ModelSpec spec;
  spec.sample_dim = dim;
  spec.hidden_dim = dim;
  spec.attn_dim = 2;
  spec.head_count = 1;
  spec.cond_dim = 2;
  spec.cond_tokens = 1;
  spec.time_dim = 2;
  spec.vocab_size = vocab_size;
  spec.blocks = {BlockKind::kLinear, BlockKind::kCrossAttention,
                 BlockKind::kCrossAttention};
  spec.activation = ActivationKind::kIdentity;
  spec.embed_seed = 5;
  Rng rng(1);
  DenoiserModel m = make_denoiser(spec, rng);

  m.time_proj.weight.fill(0.0);
  m.time_proj.bias.fill(0.0);
  auto& first = m.trunk[0].linear;
  first.weight.fill(0.0);
  for (int i = 0; i < dim; ++i) {
    first.weight.at(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) =
        output_gain - 1.0;
  }
  first.bias.fill(0.0);
  for (auto& block : m.trunk) {
    if (block.kind == BlockKind::kCrossAttention) {
      block.attn.w_out.weight.fill(0.0);
    }
  }
  m.head.weight.fill(0.0);
  for (int i = 0; i < dim; ++i) {
    m.head.weight.at(static_cast<std::size_t>(i),
                     static_cast<std::size_t>(i)) = 1.0;
  }
  m.head.bias.fill(0.0);
  return m;
}

}  // namespace fairdiff::test
