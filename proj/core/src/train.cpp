// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/train.hpp"

#include <algorithm>
#include <cmath>

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"
#include "fairdiff/threading.hpp"

namespace fairdiff {

void PretrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("pretrain.epochs must be >= 1");
  if (batch < 1) throw ConfigError("pretrain.batch must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("pretrain.lr must be positive");
  if (dataset_size < 2) throw ConfigError("pretrain.dataset_size too small");
  if (cond_dropout < 0.0 || cond_dropout >= 1.0) {
    throw ConfigError("pretrain.cond_dropout must be in [0, 1)");
  }
  if (group_fraction < 0.0 || group_fraction > 1.0) {
    throw ConfigError("pretrain.group_fraction must be in [0, 1]");
  }
}

void TrainConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("adapters.eta must be > 0");
  if (gamma < 0.0) throw ConfigError("adapters.gamma must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("adapters.lr must be positive");
  if (iters < 1) throw ConfigError("adapters.iters must be >= 1");
  if (batch < 1) throw ConfigError("adapters.batch must be >= 1");
  if ((t_lo < 0) != (t_hi < 0)) {
    throw ConfigError("adapters.t_range must set both ends or neither");
  }
  if (t_lo >= 0 && t_lo > t_hi) {
    throw ConfigError("adapters.t_range is inverted");
  }
}

int TrainConfig::resolved_t_lo(int t_steps) const {
  return t_lo >= 0 ? t_lo : static_cast<int>(0.05 * t_steps);
}

int TrainConfig::resolved_t_hi(int t_steps) const {
  return t_hi >= 0 ? t_hi : static_cast<int>(0.95 * t_steps);
}

namespace {

struct TrainingRow {
  Tensor x;
  ConditionId cond;
};

// Group rows follow each group's bias PMF; category rows pin one
// attribute's category and draw the remaining attributes uniformly.
std::vector<TrainingRow> build_rows(const SyntheticWorld& world,
                                    const std::map<std::string, double>&
                                        group_mix,
                                    const ConditionVocab& vocab,
                                    std::size_t n, double group_fraction,
                                    Rng& rng) {
  std::vector<std::pair<ConditionId, const std::vector<double>*>> groups;
  std::vector<double> weights;
  for (const auto& [name, pmf] : world.group_pmfs) {
    double w = 1.0;
    if (!group_mix.empty()) {
      auto it = group_mix.find(name);
      if (it == group_mix.end()) continue;
      w = it->second;
    }
    groups.emplace_back(vocab.id(name), &pmf);
    weights.push_back(w);
  }
  if (groups.empty()) throw ConfigError("pretraining group mix is empty");
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  for (double& w : weights) w /= wsum;

  struct CategoryToken {
    ConditionId id;
    int attr;
    std::size_t cat;
  };
  std::vector<CategoryToken> cat_tokens;
  for (std::size_t a = 0; a < world.attributes.size(); ++a) {
    const auto& attr = world.attributes[a];
    for (std::size_t c = 0; c < attr.categories.size(); ++c) {
      cat_tokens.push_back(
          {vocab.id(ConditionVocab::category_token(attr.name,
                                                   attr.categories[c])),
           static_cast<int>(a), c});
    }
  }

  std::vector<TrainingRow> rows;
  rows.reserve(n);
  const auto n_group = static_cast<std::size_t>(
      std::llround(group_fraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i) {
    TrainingRow row;
    if (i < n_group) {
      const std::size_t g = rng.categorical(weights);
      const std::size_t combo = rng.categorical(*groups[g].second);
      row.x = world.draw_component(combo, rng);
      row.cond = groups[g].first;
    } else {
      const auto& token = cat_tokens[(i - n_group) % cat_tokens.size()];
      row.x = world.draw_category(token.attr, token.cat, rng);
      row.cond = token.id;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Standard Adam over named parameter tensors.
class Adam {
 public:
  Adam(std::vector<NamedParam> params, double lr)
      : params_(std::move(params)), lr_(lr) {
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor->shape());
      v_.emplace_back(p.tensor->shape());
    }
  }

  void step(const Gradients& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto it = grads.model.find(params_[i].name);
      if (it == grads.model.end()) continue;
      const Tensor& g = it->second;
      Tensor& p = *params_[i].tensor;
      for (std::size_t j = 0; j < p.numel(); ++j) {
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
        const double mh = m_[i][j] / bc1;
        const double vh = v_[i][j] / bc2;
        p[j] -= lr_ * mh / (std::sqrt(vh) + 1e-8);
      }
    }
  }

 private:
  std::vector<NamedParam> params_;
  std::vector<Tensor> m_, v_;
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  int t_ = 0;
};

}  // namespace

PretrainResult pretrain_base(const SyntheticWorld& world,
                             const std::map<std::string, double>& group_mix,
                             const NoiseSchedule& sched, const ModelSpec& arch,
                             const PretrainConfig& cfg) {
  cfg.validate();
  const ConditionVocab vocab = world.vocab();
  ModelSpec spec = arch;
  spec.sample_dim = world.dim;
  spec.vocab_size = vocab.size();

  Rng rng(cfg.seed);
  Rng init_rng = rng.child("init");
  Rng data_rng = rng.child("data");
  Rng train_rng = rng.child("train");

  PretrainResult result;
  result.model = make_denoiser(spec, init_rng);
  DenoiserModel& model = result.model;

  const auto rows = build_rows(world, group_mix, vocab, cfg.dataset_size,
                               cfg.group_fraction, data_rng);

  // Fixed held-out tuples (x, cond, t, eps) so the metric is comparable
  // across epochs.
  struct HoldoutRow {
    Tensor x;
    ConditionId cond;
    int t;
    Tensor eps;
  };
  std::vector<HoldoutRow> holdout;
  {
    Rng ho_rng = rng.child("holdout");
    const auto ho_rows = build_rows(world, group_mix, vocab, cfg.holdout_size,
                                    cfg.group_fraction, ho_rng);
    for (const auto& row : ho_rows) {
      HoldoutRow h;
      h.x = row.x;
      h.cond = row.cond;
      h.t = static_cast<int>(
          ho_rng.uniform_int(static_cast<std::uint64_t>(sched.t_steps)));
      h.eps = Tensor::vector_of(
          ho_rng.gaussian_vec(static_cast<std::size_t>(world.dim)));
      holdout.push_back(std::move(h));
    }
  }
  auto holdout_loss = [&]() {
    double total = 0.0;
    for (const auto& h : holdout) {
      total += ldm_loss(model, h.x, h.cond, h.t, h.eps, sched).loss;
    }
    return total / static_cast<double>(holdout.size());
  };

  Adam optimizer(model.parameters(), cfg.lr);
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto dim = static_cast<std::size_t>(world.dim);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates shuffle from the training stream.
    for (std::size_t i = order.size(); i-- > 1;) {
      std::swap(order[i], order[train_rng.uniform_int(i + 1)]);
    }
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start + 1 <= rows.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end =
          std::min(rows.size(), start + static_cast<std::size_t>(cfg.batch));
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      Gradients grads;
      GradientTape tape;
      for (std::size_t i = start; i < end; ++i) {
        const auto& row = rows[order[i]];
        ConditionId cond = row.cond;
        if (cfg.cond_dropout > 0.0 &&
            train_rng.uniform01() < cfg.cond_dropout) {
          cond = kEmptyCondition;
        }
        const int t = static_cast<int>(
            train_rng.uniform_int(static_cast<std::uint64_t>(sched.t_steps)));
        const Tensor eps = Tensor::vector_of(train_rng.gaussian_vec(dim));
        auto loss = ldm_loss(model, row.x, cond, t, eps, sched, &tape);
        epoch_loss += loss.loss;
        ++seen;
        loss.d_eps_hat.require_finite("pretraining loss gradient");
        for (std::size_t j = 0; j < loss.d_eps_hat.numel(); ++j) {
          loss.d_eps_hat[j] *= inv_batch;
        }
        backward_into(model, tape, loss.d_eps_hat,
                      GradScope::kAllParameters, grads);
      }
      if (!grads.all_finite()) {
        throw NumericalError("pretraining diverged at epoch " +
                             std::to_string(epoch));
      }
      optimizer.step(grads);
    }
    PretrainMetricsRow row;
    row.epoch = epoch;
    row.train_loss = epoch_loss / static_cast<double>(seen);
    row.holdout_loss = holdout_loss();
    if (!std::isfinite(row.train_loss)) {
      throw NumericalError("pretraining loss diverged at epoch " +
                           std::to_string(epoch));
    }
    result.metrics.push_back(row);
  }
  return result;
}

SelfDiscoveryBatch self_discover_latents(const DenoiserModel& model_frozen,
                                         ConditionId group,
                                         const NoiseSchedule& sched, int t_lo,
                                         int t_hi, int batch, Rng& rng,
                                         int threads) {
  if (t_lo < 0 || t_hi > sched.t_steps || t_lo > t_hi) {
    throw ConfigError("self-discovery t_range [" + std::to_string(t_lo) +
                      ", " + std::to_string(t_hi) + "] outside schedule");
  }
  SelfDiscoveryBatch out;
  out.group = group;
  out.latents.resize(static_cast<std::size_t>(batch));
  out.timesteps.resize(static_cast<std::size_t>(batch));
  const Rng base(rng.next_u64());
  const auto span = static_cast<std::uint64_t>(t_hi - t_lo + 1);
  parallel_for(static_cast<std::size_t>(batch), threads, [&](std::size_t i) {
    Rng stream = base.child(i);
    const int t = t_lo + static_cast<int>(stream.uniform_int(span));
    out.timesteps[i] = t;
    out.latents[i] = sample_partial(model_frozen, group, sched,
                                    /*guidance_scale=*/1.0,
                                    /*adapters=*/nullptr, t, stream);
  });
  return out;
}

Tensor guidance_target(const DenoiserModel& model_frozen, const Tensor& x_t,
                       ConditionId group, ConditionId category, int t,
                       double eta) {
  const Tensor eps_g = denoiser_forward(model_frozen, x_t, group, t);
  if (eta == 0.0) return eps_g;
  const Tensor eps_d = denoiser_forward(model_frozen, x_t, category, t);
  Tensor out = eps_g;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] += eta * (eps_d[i] - eps_g[i]);
  }
  return out;
}

StepLosses adapter_train_step(const DenoiserModel& model_frozen,
                              AdapterBank& bank_current,
                              std::size_t category_index,
                              const std::vector<const AdapterBank*>&
                                  banks_prior,
                              const SelfDiscoveryBatch& batch,
                              ConditionId category_token,
                              const TrainConfig& cfg) {
  if (category_index >= bank_current.adapters.size()) {
    throw ConfigError("category index out of range for bank '" +
                      bank_current.attribute + "'");
  }
  AttributeAdapter& adapter = bank_current.adapters[category_index];
  const ActiveAdapters view =
      patch_weights(model_frozen, adapter, cfg.alpha_scale, true);

  StepLosses losses;
  Gradients grads;
  GradientTape tape;
  const double inv_batch = 1.0 / static_cast<double>(batch.latents.size());
  for (std::size_t i = 0; i < batch.latents.size(); ++i) {
    const Tensor& x_t = batch.latents[i];
    const int t = batch.timesteps[i];
    const Tensor target =
        guidance_target(model_frozen, x_t, batch.group, category_token, t,
                        cfg.eta);
    const Tensor predicted =
        denoiser_forward(model_frozen, x_t, batch.group, t, &view, &tape);
    Tensor dout({predicted.numel()});
    for (std::size_t j = 0; j < predicted.numel(); ++j) {
      const double diff = predicted[j] - target[j];
      losses.guidance += diff * diff * inv_batch;
      dout[j] = 2.0 * diff * inv_batch;
    }
    backward_into(model_frozen, tape, dout, GradScope::kAdaptersOnly, grads);
  }

  OrthogonalityResult orth;
  if (cfg.gamma > 0.0 && !banks_prior.empty()) {
    orth = orthogonality_loss(banks_prior, bank_current, true);
    losses.orth = orth.loss;
  }
  losses.total = losses.guidance + cfg.gamma * losses.orth;

  if (!grads.all_finite()) {
    throw NumericalError("adapter step produced non-finite gradients "
                         "(category '" + adapter.category + "', guidance "
                         "loss " + std::to_string(losses.guidance) + ")");
  }

  for (std::size_t c = 0; c < adapter.pairs.size(); ++c) {
    Tensor& p = adapter.pairs[c].p;
    Tensor& q = adapter.pairs[c].q;
    if (c < grads.adapter_p.size() && grads.adapter_p[c].numel() > 0) {
      p.add_scaled(grads.adapter_p[c], -cfg.lr);
      q.add_scaled(grads.adapter_q[c], -cfg.lr);
    }
    if (cfg.gamma > 0.0 && !banks_prior.empty()) {
      p.add_scaled(orth.grad_p[category_index][c], -cfg.lr * cfg.gamma);
      q.add_scaled(orth.grad_q[category_index][c], -cfg.lr * cfg.gamma);
    }
  }
  return losses;
}

TrainAttributeResult train_attribute(
    const DenoiserModel& model_frozen, const SyntheticWorld& world,
    const AttributeSpec& attribute, const NoiseSchedule& sched,
    const std::vector<const AdapterBank*>& banks_prior, const TrainConfig& cfg,
    int curve_stride, int threads) {
  cfg.validate();
  if (attribute.categories.size() < 2) {
    throw ConfigError("attribute '" + attribute.name +
                      "' needs at least 2 categories to train");
  }
  const ConditionVocab vocab = world.vocab();
  const ConditionId group_id =
      cfg.group.empty() ? kEmptyCondition : vocab.id(cfg.group);
  const int t_lo = cfg.resolved_t_lo(sched.t_steps);
  const int t_hi = cfg.resolved_t_hi(sched.t_steps);

  Rng rng(cfg.seed);
  Rng init_rng = rng.child("bank-init");
  TrainAttributeResult result;
  result.bank = make_bank(model_frozen, attribute.name, attribute.categories,
                          cfg.targets, init_rng, cfg.q_init_std);

  for (std::size_t k = 0; k < attribute.categories.size(); ++k) {
    const ConditionId cat_token = vocab.id(ConditionVocab::category_token(
        attribute.name, attribute.categories[k]));
    Rng cat_rng = rng.child(k);
    for (int step = 0; step < cfg.iters; ++step) {
      const SelfDiscoveryBatch batch = self_discover_latents(
          model_frozen, group_id, sched, t_lo, t_hi, cfg.batch, cat_rng,
          threads);
      const StepLosses losses = adapter_train_step(
          model_frozen, result.bank, k, banks_prior, batch, cat_token, cfg);
      if (step % curve_stride == 0 || step == cfg.iters - 1) {
        result.curve.push_back({attribute.name, attribute.categories[k], step,
                                losses.guidance, losses.orth, losses.total});
      }
    }
  }

  if (!banks_prior.empty()) {
    result.final_orth =
        orthogonality_loss(banks_prior, result.bank, false).loss;
    Rng baseline_rng = rng.child("orth-baseline");
    result.random_baseline_orth = orthogonality_random_baseline(
        banks_prior, result.bank, baseline_rng);
  }
  return result;
}

}  // namespace fairdiff
