// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/nn.hpp"

#include <cmath>
#include <sstream>

#include "fairdiff/error.hpp"
#include "fairdiff/hash.hpp"
#include "fairdiff/rng.hpp"

namespace fairdiff {

double activate(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::kSilu:
      return x / (1.0 + std::exp(-x));
    case ActivationKind::kIdentity:
      return x;
  }
  return x;
}

double activate_grad(ActivationKind kind, double x) {
  switch (kind) {
    case ActivationKind::kSilu: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 + x * (1.0 - s));
    }
    case ActivationKind::kIdentity:
      return 1.0;
  }
  return 1.0;
}

bool ActiveAdapters::empty() const {
  for (const auto& terms : by_matrix) {
    if (!terms.empty()) return false;
  }
  return true;
}

std::string ModelSpec::key() const {
  std::ostringstream os;
  os << "D=" << sample_dim << ";H=" << hidden_dim << ";A=" << attn_dim
     << ";heads=" << head_count << ";cond=" << cond_dim << "x" << cond_tokens
     << ";time=" << time_dim << ";vocab=" << vocab_size << ";blocks=";
  for (BlockKind k : blocks) os << (k == BlockKind::kLinear ? 'L' : 'C');
  os << ";act=" << (activation == ActivationKind::kSilu ? "silu" : "id");
  os << ";embed=" << embed_seed;
  return os.str();
}

void ModelSpec::validate() const {
  if (sample_dim < 1) throw ConfigError("model.sample_dim must be >= 1");
  if (hidden_dim < 1) throw ConfigError("model.hidden_dim must be >= 1");
  if (time_dim < 2 || time_dim % 2 != 0) {
    throw ConfigError("model.time_dim must be even and >= 2");
  }
  if (vocab_size < 1) throw ConfigError("model.vocab_size must be >= 1");
  if (cond_tokens < 1) throw ConfigError("model.cond_tokens must be >= 1");
  if (cond_dim < 1) throw ConfigError("model.cond_dim must be >= 1");
  if (blocks.empty() || blocks.front() != BlockKind::kLinear) {
    throw ConfigError("model.blocks must start with a linear block");
  }
  int attn_blocks = 0;
  for (BlockKind k : blocks) {
    if (k == BlockKind::kCrossAttention) ++attn_blocks;
  }
  if (attn_blocks < 2) {
    throw ConfigError("model.blocks must contain at least 2 cross-attention "
                      "blocks, got " + std::to_string(attn_blocks));
  }
  if (head_count < 1 || attn_dim % head_count != 0) {
    throw ConfigError("model.attn_dim must be divisible by model.head_count");
  }
}

int DenoiserModel::matrix_index(const std::string& name) const {
  for (std::size_t i = 0; i < catalog_.size(); ++i) {
    if (catalog_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const LinearLayer& DenoiserModel::matrix_at(int idx) const {
  return *catalog_ptrs_[static_cast<std::size_t>(idx)];
}

LinearLayer& DenoiserModel::matrix_at(int idx) {
  return *catalog_ptrs_[static_cast<std::size_t>(idx)];
}

void DenoiserModel::rebuild_catalog() {
  catalog_.clear();
  catalog_ptrs_.clear();
  auto push = [&](LinearLayer& l) {
    catalog_.push_back({l.name, l.weight.rows(), l.weight.cols()});
    catalog_ptrs_.push_back(&l);
  };
  for (auto& block : trunk) {
    if (block.kind == BlockKind::kLinear) {
      push(block.linear);
    } else {
      push(block.attn.w_q);
      push(block.attn.w_k);
      push(block.attn.w_v);
      push(block.attn.w_out);
    }
  }
  push(head);
  push(time_proj);
}

std::vector<NamedParam> DenoiserModel::parameters() {
  std::vector<NamedParam> out;
  auto push = [&](LinearLayer& l) {
    out.push_back({l.name + ".weight", &l.weight});
    if (l.bias.numel() > 0) out.push_back({l.name + ".bias", &l.bias});
  };
  for (auto& block : trunk) {
    if (block.kind == BlockKind::kLinear) {
      push(block.linear);
    } else {
      push(block.attn.w_q);
      push(block.attn.w_k);
      push(block.attn.w_v);
      push(block.attn.w_out);
    }
  }
  push(head);
  push(time_proj);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> DenoiserModel::parameters()
    const {
  auto& self = const_cast<DenoiserModel&>(*this);
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (const auto& p : self.parameters()) out.emplace_back(p.name, p.tensor);
  return out;
}

Tensor DenoiserModel::condition_tokens(ConditionId id) const {
  if (id.value < 0 || id.value >= spec.vocab_size) {
    throw VocabError("condition id " + std::to_string(id.value) +
                     " outside vocabulary of size " +
                     std::to_string(spec.vocab_size));
  }
  const auto n_tok = static_cast<std::size_t>(spec.cond_tokens);
  const auto d = static_cast<std::size_t>(spec.cond_dim);
  Tensor tokens({n_tok, d});
  const double* row = cond_embed.data() +
                      static_cast<std::size_t>(id.value) * n_tok * d;
  for (std::size_t i = 0; i < n_tok * d; ++i) tokens[i] = row[i];
  return tokens;
}

std::uint64_t DenoiserModel::parameter_hash() const {
  Fnv1a64 h;
  for (const auto& [name, tensor] : parameters()) {
    h.update(name);
    h.update(tensor->data(), tensor->numel() * sizeof(double));
  }
  return h.value();
}

DenoiserModel make_denoiser(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  DenoiserModel m;
  m.spec = spec;

  Rng embed_rng(spec.embed_seed);
  m.cond_embed = Tensor::randn(
      {static_cast<std::size_t>(spec.vocab_size),
       static_cast<std::size_t>(spec.cond_tokens * spec.cond_dim)},
      1.0, embed_rng);

  auto init_layer = [&](const std::string& name, std::size_t rows,
                        std::size_t cols, bool with_bias) {
    LinearLayer l;
    l.name = name;
    l.weight = Tensor::randn({rows, cols},
                             1.0 / std::sqrt(static_cast<double>(cols)), rng);
    if (with_bias) l.bias = Tensor({rows});
    return l;
  };

  const auto H = static_cast<std::size_t>(spec.hidden_dim);
  const auto D = static_cast<std::size_t>(spec.sample_dim);
  const auto A = static_cast<std::size_t>(spec.attn_dim);
  const auto C = static_cast<std::size_t>(spec.cond_dim);

  m.time_proj = init_layer("time_proj",
                           H, static_cast<std::size_t>(spec.time_dim), true);

  bool first_linear = true;
  for (std::size_t i = 0; i < spec.blocks.size(); ++i) {
    TrunkBlock block;
    block.kind = spec.blocks[i];
    const std::string base = "trunk." + std::to_string(i);
    if (block.kind == BlockKind::kLinear) {
      const std::size_t in = first_linear ? D : H;
      block.linear = init_layer(base + ".linear", H, in, true);
      first_linear = false;
    } else {
      block.attn.w_q = init_layer(base + ".wq", A, H, false);
      block.attn.w_k = init_layer(base + ".wk", A, C, false);
      block.attn.w_v = init_layer(base + ".wv", A, C, false);
      block.attn.w_out = init_layer(base + ".wo", H, A, false);
      block.attn.head_count = spec.head_count;
      block.attn.sample_dim = spec.hidden_dim;
      block.attn.cond_dim = spec.cond_dim;
    }
    m.trunk.push_back(std::move(block));
  }
  m.head = init_layer("head", D, H, true);
  m.rebuild_catalog();
  return m;
}

Tensor sinusoidal_time_embedding(int t, int dim) {
  Tensor out({static_cast<std::size_t>(dim)});
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq =
        std::exp(-std::log(10000.0) * static_cast<double>(k) /
                 std::max(1, half - 1));
    out[static_cast<std::size_t>(2 * k)] = std::sin(t * freq);
    out[static_cast<std::size_t>(2 * k + 1)] = std::cos(t * freq);
  }
  return out;
}

namespace {

void check_adapter_dims(const LinearLayer& layer, const RankOneTerm& term) {
  if (term.p == nullptr || term.q == nullptr ||
      term.p->numel() != layer.out_dim() ||
      term.q->numel() != layer.in_dim()) {
    throw DimensionError(
        "adapter pair does not match target matrix '" + layer.name +
        "' of shape " + layer.weight.shape_str());
  }
}

}  // namespace

Tensor linear_forward(const LinearLayer& layer, const Tensor& x,
                      const std::vector<RankOneTerm>* terms) {
  if (x.rank() != 1 || x.numel() != layer.in_dim()) {
    throw DimensionError("input of shape " + x.shape_str() +
                         " does not match layer '" + layer.name +
                         "' expecting length " +
                         std::to_string(layer.in_dim()));
  }
  Tensor y = matvec(layer.weight, x);
  if (layer.bias.numel() > 0) {
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += layer.bias[i];
  }
  if (terms != nullptr) {
    for (const RankOneTerm& term : *terms) {
      check_adapter_dims(layer, term);
      const double gate = term.alpha * dot(*term.q, x);
      y.add_scaled(*term.p, gate);
    }
  }
  return y;
}

Tensor cross_attention_forward(const CrossAttentionBlock& block,
                               const Tensor& sample, const Tensor& cond,
                               const AttnAdapterSlices* adapters,
                               GradientTape::AttnRec* rec) {
  const auto A = static_cast<std::size_t>(block.attn_dim());
  const int heads = block.head_count;
  const auto dh = A / static_cast<std::size_t>(heads);
  if (cond.rank() != 2 ||
      cond.cols() != static_cast<std::size_t>(block.cond_dim)) {
    throw DimensionError("condition tokens of shape " + cond.shape_str() +
                         " do not match attention cond_dim " +
                         std::to_string(block.cond_dim));
  }
  const std::size_t n_tok = cond.rows();

  const Tensor q = linear_forward(block.w_q, sample,
                                  adapters ? adapters->q : nullptr);
  Tensor k({n_tok, A});
  Tensor v({n_tok, A});
  for (std::size_t j = 0; j < n_tok; ++j) {
    Tensor token({static_cast<std::size_t>(block.cond_dim)});
    for (std::size_t c = 0; c < token.numel(); ++c) token[c] = cond.at(j, c);
    const Tensor kj =
        linear_forward(block.w_k, token, adapters ? adapters->k : nullptr);
    const Tensor vj =
        linear_forward(block.w_v, token, adapters ? adapters->v : nullptr);
    for (std::size_t a = 0; a < A; ++a) {
      k.at(j, a) = kj[a];
      v.at(j, a) = vj[a];
    }
  }

  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor weights({static_cast<std::size_t>(heads), n_tok});
  Tensor concat({A});
  for (int h = 0; h < heads; ++h) {
    const std::size_t base = static_cast<std::size_t>(h) * dh;
    double max_logit = -1e300;
    std::vector<double> logits(n_tok);
    for (std::size_t j = 0; j < n_tok; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < dh; ++d) s += q[base + d] * k.at(j, base + d);
      logits[j] = s * inv_sqrt;
      max_logit = std::max(max_logit, logits[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n_tok; ++j) {
      logits[j] = std::exp(logits[j] - max_logit);
      z += logits[j];
    }
    for (std::size_t j = 0; j < n_tok; ++j) {
      const double w = logits[j] / z;
      weights.at(static_cast<std::size_t>(h), j) = w;
      for (std::size_t d = 0; d < dh; ++d) {
        concat[base + d] += w * v.at(j, base + d);
      }
    }
  }

  const Tensor u = linear_forward(block.w_out, concat,
                                  adapters ? adapters->out : nullptr);
  if (u.numel() != sample.numel()) {
    throw DimensionError("attention output length " +
                         std::to_string(u.numel()) +
                         " does not match sample path length " +
                         std::to_string(sample.numel()));
  }
  if (rec != nullptr) {
    rec->input = sample;
    rec->q = q;
    rec->k = k;
    rec->v = v;
    rec->weights = weights;
    rec->concat = concat;
  }
  return add(sample, u);
}

Tensor cross_attention_forward(const CrossAttentionBlock& block,
                               const Tensor& sample, const Tensor& cond,
                               const AttnAdapterSlices* adapters) {
  return cross_attention_forward(block, sample, cond, adapters, nullptr);
}

namespace {

const std::vector<RankOneTerm>* slice_for(const ActiveAdapters* adapters,
                                          int catalog_idx) {
  if (adapters == nullptr) return nullptr;
  const auto idx = static_cast<std::size_t>(catalog_idx);
  if (idx >= adapters->by_matrix.size()) return nullptr;
  const auto& terms = adapters->by_matrix[idx];
  return terms.empty() ? nullptr : &terms;
}

}  // namespace

Tensor denoiser_forward(const DenoiserModel& model, const Tensor& x,
                        ConditionId cond, int t,
                        const ActiveAdapters* adapters, GradientTape* tape) {
  if (x.rank() != 1 ||
      x.numel() != static_cast<std::size_t>(model.spec.sample_dim)) {
    throw DimensionError("sample of shape " + x.shape_str() +
                         " does not match model sample_dim " +
                         std::to_string(model.spec.sample_dim));
  }
  if (t < 0) throw ConfigError("negative timestep " + std::to_string(t));
  if (adapters != nullptr && adapters->model != nullptr &&
      adapters->model != &model) {
    throw DimensionError("adapter view was built for a different model");
  }

  const Tensor cond_tokens = model.condition_tokens(cond);
  const Tensor time_sin = sinusoidal_time_embedding(t, model.spec.time_dim);
  // time_proj is the last catalog entry (after all blocks and the head).
  const int time_proj_idx =
      static_cast<int>(model.matrix_catalog().size()) - 1;
  const Tensor time_out = linear_forward(model.time_proj, time_sin,
                                         slice_for(adapters, time_proj_idx));

  if (tape != nullptr) {
    tape->input = x;
    tape->cond = cond;
    tape->t = t;
    tape->cond_tokens = cond_tokens;
    tape->time_sin = time_sin;
    tape->time_out = time_out;
    tape->blocks.clear();
    tape->adapters = adapters;
    tape->consumed = false;
  }

  Tensor h = x;
  int catalog_idx = 0;
  for (const auto& block : model.trunk) {
    if (block.kind == BlockKind::kLinear) {
      const auto* terms = slice_for(adapters, catalog_idx);
      ++catalog_idx;
      const Tensor pre = linear_forward(block.linear, h, terms);
      if (pre.numel() != time_out.numel()) {
        throw DimensionError("trunk width " + std::to_string(pre.numel()) +
                             " does not match time projection width " +
                             std::to_string(time_out.numel()));
      }
      const bool residual = block.linear.in_dim() == block.linear.out_dim();
      Tensor next({pre.numel()});
      for (std::size_t i = 0; i < pre.numel(); ++i) {
        next[i] = activate(model.spec.activation, pre[i]) + time_out[i] +
                  (residual ? h[i] : 0.0);
      }
      if (tape != nullptr) {
        GradientTape::BlockRec rec;
        rec.kind = BlockKind::kLinear;
        rec.linear.input = h;
        rec.linear.preact = pre;
        rec.linear.residual = residual;
        tape->blocks.push_back(std::move(rec));
      }
      h = std::move(next);
    } else {
      AttnAdapterSlices slices;
      slices.q = slice_for(adapters, catalog_idx);
      slices.k = slice_for(adapters, catalog_idx + 1);
      slices.v = slice_for(adapters, catalog_idx + 2);
      slices.out = slice_for(adapters, catalog_idx + 3);
      catalog_idx += 4;
      GradientTape::BlockRec rec;
      rec.kind = BlockKind::kCrossAttention;
      h = cross_attention_forward(block.attn, h, cond_tokens, &slices,
                                  tape ? &rec.attn : nullptr);
      if (tape != nullptr) tape->blocks.push_back(std::move(rec));
    }
  }

  if (tape != nullptr) tape->head_input = h;
  const auto* head_terms = slice_for(adapters, catalog_idx);
  Tensor out = linear_forward(model.head, h, head_terms);
  return out;
}

}  // namespace fairdiff
