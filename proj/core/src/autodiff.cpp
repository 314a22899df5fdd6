// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "fairdiff/error.hpp"
#include "fairdiff/nn.hpp"

namespace fairdiff {

void Gradients::scale_all(double s) {
  for (auto& [name, g] : model) {
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= s;
  }
  for (auto& g : adapter_p) {
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= s;
  }
  for (auto& g : adapter_q) {
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= s;
  }
}

bool Gradients::all_finite() const {
  for (const auto& [name, g] : model) {
    if (!g.all_finite()) return false;
  }
  for (const auto& g : adapter_p) {
    if (!g.all_finite()) return false;
  }
  for (const auto& g : adapter_q) {
    if (!g.all_finite()) return false;
  }
  return true;
}

namespace {

class BackwardPass {
 public:
  BackwardPass(const DenoiserModel& model, GradientTape& tape, GradScope scope,
               Gradients& acc)
      : model_(model), tape_(tape), scope_(scope), acc_(acc) {
    if (tape_.adapters != nullptr) {
      const int slots = tape_.adapters->trainable_slots;
      if (static_cast<int>(acc_.adapter_p.size()) < slots) {
        acc_.adapter_p.resize(static_cast<std::size_t>(slots));
        acc_.adapter_q.resize(static_cast<std::size_t>(slots));
      }
    }
  }

  void run(const Tensor& dout) {
    // Walk the catalog the same way the forward pass did.
    int catalog_idx = 0;
    std::vector<int> block_base(model_.trunk.size());
    for (std::size_t i = 0; i < model_.trunk.size(); ++i) {
      block_base[i] = catalog_idx;
      catalog_idx += model_.trunk[i].kind == BlockKind::kLinear ? 1 : 4;
    }
    const int head_idx = catalog_idx;

    Tensor dh = backprop_linear(model_.head, head_idx, tape_.head_input, dout);

    Tensor dtime({tape_.time_out.numel()});
    for (std::size_t bi = model_.trunk.size(); bi-- > 0;) {
      const auto& block = model_.trunk[bi];
      const auto& rec = tape_.blocks[bi];
      if (block.kind == BlockKind::kLinear) {
        dtime.add_scaled(dh, 1.0);
        // d(activation) path
        Tensor dpre({rec.linear.preact.numel()});
        for (std::size_t i = 0; i < dpre.numel(); ++i) {
          dpre[i] = dh[i] * activate_grad(model_.spec.activation,
                                          rec.linear.preact[i]);
        }
        Tensor dx = backprop_linear(block.linear, block_base[bi],
                                    rec.linear.input, dpre);
        if (rec.linear.residual) dx.add_scaled(dh, 1.0);
        dh = std::move(dx);
      } else {
        dh = backprop_attention(block.attn, block_base[bi], rec.attn, dh);
      }
    }

    // Time projection gradients (the sinusoidal features are constants).
    if (scope_ == GradScope::kAllParameters) {
      accumulate_weight(model_.time_proj, dtime, tape_.time_sin);
    }
    backprop_adapter_terms(head_idx + 1, tape_.time_sin, dtime, nullptr);
  }

 private:
  // Accumulates parameter + adapter gradients for y = Wx + b (+ terms) and
  // returns dL/dx.
  Tensor backprop_linear(const LinearLayer& layer, int catalog_idx,
                         const Tensor& x, const Tensor& dy) {
    if (scope_ == GradScope::kAllParameters) accumulate_weight(layer, dy, x);
    Tensor dx({x.numel()});
    const Tensor& w = layer.weight;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double g = dy[r];
      if (g == 0.0) continue;
      const double* row = w.data() + r * w.cols();
      for (std::size_t c = 0; c < w.cols(); ++c) dx[c] += row[c] * g;
    }
    backprop_adapter_terms(catalog_idx, x, dy, &dx);
    return dx;
  }

  // Rank-1 terms: y += alpha*(q.x)*p. Adds the term contribution to dx
  // (when requested) and records trainable (p, q) gradients.
  void backprop_adapter_terms(int catalog_idx, const Tensor& x,
                              const Tensor& dy, Tensor* dx) {
    if (tape_.adapters == nullptr) return;
    const auto idx = static_cast<std::size_t>(catalog_idx);
    if (idx >= tape_.adapters->by_matrix.size()) return;
    for (const RankOneTerm& term : tape_.adapters->by_matrix[idx]) {
      const double qx = dot(*term.q, x);
      const double pdy = dot(*term.p, dy);
      if (dx != nullptr) dx->add_scaled(*term.q, term.alpha * pdy);
      if (term.trainable_slot >= 0) {
        const auto slot = static_cast<std::size_t>(term.trainable_slot);
        if (acc_.adapter_p[slot].numel() == 0) {
          acc_.adapter_p[slot] = Tensor({term.p->numel()});
          acc_.adapter_q[slot] = Tensor({term.q->numel()});
        }
        acc_.adapter_p[slot].add_scaled(dy, term.alpha * qx);
        acc_.adapter_q[slot].add_scaled(x, term.alpha * pdy);
      }
    }
  }

  void accumulate_weight(const LinearLayer& layer, const Tensor& dy,
                         const Tensor& x) {
    Tensor& gw = grad_slot(layer.name + ".weight", layer.weight.shape());
    for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
      const double g = dy[r];
      if (g == 0.0) continue;
      double* row = gw.data() + r * layer.weight.cols();
      for (std::size_t c = 0; c < layer.weight.cols(); ++c) {
        row[c] += g * x[c];
      }
    }
    if (layer.bias.numel() > 0) {
      Tensor& gb = grad_slot(layer.name + ".bias", layer.bias.shape());
      gb.add_scaled(dy, 1.0);
    }
  }

  Tensor& grad_slot(const std::string& name,
                    const std::vector<std::size_t>& shape) {
    auto it = acc_.model.find(name);
    if (it == acc_.model.end()) {
      it = acc_.model.emplace(name, Tensor(shape)).first;
    }
    return it->second;
  }

  // Residual attention block: h_out = h + W_out(attend(...)).
  // catalog_idx points at w_q; k/v/out follow.
  Tensor backprop_attention(const CrossAttentionBlock& block, int catalog_idx,
                            const GradientTape::AttnRec& rec,
                            const Tensor& dh_out) {
    const auto A = static_cast<std::size_t>(block.attn_dim());
    const int heads = block.head_count;
    const auto dhd = A / static_cast<std::size_t>(heads);
    const std::size_t n_tok = rec.k.rows();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dhd));

    // Through w_out, input = concatenated head outputs.
    const Tensor dconcat =
        backprop_linear(block.w_out, catalog_idx + 3, rec.concat, dh_out);

    Tensor dq({A});
    Tensor dk({n_tok, A});
    Tensor dv({n_tok, A});
    for (int h = 0; h < heads; ++h) {
      const std::size_t base = static_cast<std::size_t>(h) * dhd;
      // dv and dw from o_h = sum_j w_j v_j
      std::vector<double> dw(n_tok, 0.0);
      for (std::size_t j = 0; j < n_tok; ++j) {
        const double wj = rec.weights.at(static_cast<std::size_t>(h), j);
        for (std::size_t d = 0; d < dhd; ++d) {
          dv.at(j, base + d) += wj * dconcat[base + d];
          dw[j] += dconcat[base + d] * rec.v.at(j, base + d);
        }
      }
      // Softmax backward: ds_j = w_j * (dw_j - sum_i w_i dw_i)
      double mix = 0.0;
      for (std::size_t j = 0; j < n_tok; ++j) {
        mix += rec.weights.at(static_cast<std::size_t>(h), j) * dw[j];
      }
      for (std::size_t j = 0; j < n_tok; ++j) {
        const double wj = rec.weights.at(static_cast<std::size_t>(h), j);
        const double ds = wj * (dw[j] - mix) * inv_sqrt;
        for (std::size_t d = 0; d < dhd; ++d) {
          dq[base + d] += ds * rec.k.at(j, base + d);
          dk.at(j, base + d) += ds * rec.q[base + d];
        }
      }
    }

    // Through w_q, input is the block input (sample path).
    Tensor dx = backprop_linear(block.w_q, catalog_idx, rec.input, dq);
    // Residual path.
    dx.add_scaled(dh_out, 1.0);

    // Through w_k / w_v per condition token; tokens are frozen inputs.
    const auto cd = static_cast<std::size_t>(block.cond_dim);
    for (std::size_t j = 0; j < n_tok; ++j) {
      Tensor token({cd});
      for (std::size_t c = 0; c < cd; ++c) token[c] = tape_.cond_tokens.at(j, c);
      Tensor dkj({A});
      Tensor dvj({A});
      for (std::size_t a = 0; a < A; ++a) {
        dkj[a] = dk.at(j, a);
        dvj[a] = dv.at(j, a);
      }
      if (scope_ == GradScope::kAllParameters) {
        accumulate_weight(block.w_k, dkj, token);
        accumulate_weight(block.w_v, dvj, token);
      }
      backprop_adapter_terms(catalog_idx + 1, token, dkj, nullptr);
      backprop_adapter_terms(catalog_idx + 2, token, dvj, nullptr);
    }
    return dx;
  }

  const DenoiserModel& model_;
  GradientTape& tape_;
  GradScope scope_;
  Gradients& acc_;
};

}  // namespace

void backward_into(const DenoiserModel& model, GradientTape& tape,
                   const Tensor& dloss_dout, GradScope scope, Gradients& acc) {
  if (tape.consumed) {
    throw Error("gradient tape already consumed by a previous backward pass");
  }
  if (tape.blocks.size() != model.trunk.size()) {
    throw DimensionError("tape does not match model trunk layout");
  }
  tape.consumed = true;
  BackwardPass pass(model, tape, scope, acc);
  pass.run(dloss_dout);
}

Gradients backward(const DenoiserModel& model, GradientTape& tape,
                   const Tensor& dloss_dout, GradScope scope) {
  Gradients acc;
  backward_into(model, tape, dloss_dout, scope, acc);
  return acc;
}

}  // namespace fairdiff
