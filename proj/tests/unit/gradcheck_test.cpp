// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <limits>

#include "fairdiff/adapter.hpp"
#include "fairdiff/diffusion.hpp"
#include "fairdiff/gradcheck.hpp"
#include "fairdiff/nn.hpp"
#include "fairdiff/rng.hpp"
#include "test_helpers.hpp"

using namespace fairdiff;
using namespace fairdiff::test;

namespace {

// Squared-error objective of a forward pass against a fixed target; the
// problem exposes every model parameter as a block.
class ModelLossProblem : public GradProblem {
 public:
  ModelLossProblem(DenoiserModel& model, Tensor x, ConditionId cond, int t,
                   Tensor target, const ActiveAdapters* view = nullptr)
      : model_(model),
        x_(std::move(x)),
        cond_(cond),
        t_(t),
        target_(std::move(target)),
        view_(view) {}

  std::vector<Block> blocks() override {
    std::vector<Block> out;
    for (auto& p : model_.parameters()) out.push_back({p.name, p.tensor});
    return out;
  }

  double eval() override {
    const Tensor y = denoiser_forward(model_, x_, cond_, t_, view_);
    return squared_norm(sub(y, target_));
  }

  std::vector<Tensor> gradients() override {
    GradientTape tape;
    const Tensor y = denoiser_forward(model_, x_, cond_, t_, view_, &tape);
    const Tensor dout = scale(sub(y, target_), 2.0);
    const Gradients grads =
        backward(model_, tape, dout, GradScope::kAllParameters);
    std::vector<Tensor> out;
    for (auto& p : model_.parameters()) out.push_back(grads.model.at(p.name));
    return out;
  }

 private:
  DenoiserModel& model_;
  Tensor x_;
  ConditionId cond_;
  int t_;
  Tensor target_;
  const ActiveAdapters* view_;
};

// Same objective but over the (p, q) vectors of one adapter.
class AdapterLossProblem : public GradProblem {
 public:
  AdapterLossProblem(const DenoiserModel& model, AttributeAdapter& adapter,
                     double alpha, Tensor x, ConditionId cond, int t,
                     Tensor target)
      : model_(model),
        adapter_(adapter),
        alpha_(alpha),
        x_(std::move(x)),
        cond_(cond),
        t_(t),
        target_(std::move(target)) {}

  std::vector<Block> blocks() override {
    std::vector<Block> out;
    for (auto& pair : adapter_.pairs) {
      out.push_back({pair.target + ".p", &pair.p});
      out.push_back({pair.target + ".q", &pair.q});
    }
    return out;
  }

  double eval() override {
    const ActiveAdapters view = patch_weights(model_, adapter_, alpha_, false);
    const Tensor y = denoiser_forward(model_, x_, cond_, t_, &view);
    return squared_norm(sub(y, target_));
  }

  std::vector<Tensor> gradients() override {
    const ActiveAdapters view = patch_weights(model_, adapter_, alpha_, true);
    GradientTape tape;
    const Tensor y = denoiser_forward(model_, x_, cond_, t_, &view, &tape);
    const Tensor dout = scale(sub(y, target_), 2.0);
    const Gradients grads =
        backward(model_, tape, dout, GradScope::kAdaptersOnly);
    std::vector<Tensor> out;
    for (std::size_t c = 0; c < adapter_.pairs.size(); ++c) {
      out.push_back(grads.adapter_p[c]);
      out.push_back(grads.adapter_q[c]);
    }
    return out;
  }

 private:
  const DenoiserModel& model_;
  AttributeAdapter& adapter_;
  double alpha_;
  Tensor x_;
  ConditionId cond_;
  int t_;
  Tensor target_;
};

}  // namespace

TEST_CASE("all model parameter gradients match finite differences") {
  DenoiserModel model = small_model(21);
  Rng rng(31);
  const Tensor x = Tensor::randn({3}, 1.0, rng);
  const Tensor target = Tensor::randn({3}, 1.0, rng);
  ModelLossProblem problem(model, x, ConditionId{2}, 9, target);
  const auto report = grad_check(problem, 1e-4);
  INFO(report.summary());
  CHECK(report.passed());
}

TEST_CASE("adapter (p, q) gradients match finite differences on a "
          "2-attention-block model") {
  const DenoiserModel model = small_model(22);
  Rng rng(32);
  Rng bank_rng(33);
  AdapterBank bank = make_bank(model, "attr", {"a", "b"},
                               AdapterTargets::kCrossAttentionOnly, bank_rng);
  // Give p nonzero values so q gradients are alive.
  for (auto& pair : bank.adapters[0].pairs) {
    pair.p = Tensor::randn({pair.p.numel()}, 0.2, rng);
    pair.q = Tensor::randn({pair.q.numel()}, 0.2, rng);
  }
  const Tensor x = Tensor::randn({3}, 1.0, rng);
  const Tensor target = Tensor::randn({3}, 1.0, rng);
  AdapterLossProblem problem(model, bank.adapters[0], 0.6, x, ConditionId{1},
                             40, target);
  const auto report = grad_check(problem, 1e-4);
  INFO(report.summary());
  CHECK(report.passed());
}

TEST_CASE("adapter gradients on every matrix incl. trunk match finite "
          "differences") {
  const DenoiserModel model = small_model(23);
  Rng rng(34);
  Rng bank_rng(35);
  AdapterBank bank = make_bank(model, "attr", {"a", "b"},
                               AdapterTargets::kAllMatrices, bank_rng);
  for (auto& pair : bank.adapters[1].pairs) {
    pair.p = Tensor::randn({pair.p.numel()}, 0.15, rng);
    pair.q = Tensor::randn({pair.q.numel()}, 0.15, rng);
  }
  const Tensor x = Tensor::randn({3}, 1.0, rng);
  const Tensor target = Tensor::randn({3}, 1.0, rng);
  AdapterLossProblem problem(model, bank.adapters[1], 0.4, x, ConditionId{3},
                             5, target);
  const auto report = grad_check(problem, 1e-4);
  INFO(report.summary());
  CHECK(report.passed());
}

TEST_CASE("ldm loss gradients match finite differences") {
  DenoiserModel model = small_model(24);
  Rng rng(36);
  const NoiseSchedule sched = make_schedule(10, 0.01, 0.2);
  const Tensor x0 = Tensor::randn({3}, 1.0, rng);
  const Tensor eps = Tensor::randn({3}, 1.0, rng);
  const int t = 4;
  const ConditionId cond{1};

  std::vector<GradProblem::Block> blocks;
  for (auto& p : model.parameters()) blocks.push_back({p.name, p.tensor});
  ClosureGradProblem problem(
      blocks,
      [&]() { return ldm_loss(model, x0, cond, t, eps, sched).loss; },
      [&]() {
        GradientTape tape;
        auto res = ldm_loss(model, x0, cond, t, eps, sched, &tape);
        const Gradients grads =
            backward(model, tape, res.d_eps_hat, GradScope::kAllParameters);
        std::vector<Tensor> out;
        for (auto& p : model.parameters()) {
          out.push_back(grads.model.at(p.name));
        }
        return out;
      });
  const auto report = grad_check(problem, 1e-4);
  INFO(report.summary());
  CHECK(report.passed());
}

TEST_CASE("grad_check passes everything at infinite tolerance") {
  DenoiserModel model = linear_fixture_model(2, 1.0);
  const Tensor x = Tensor::vector_of({1.0, 2.0});
  const Tensor target = Tensor::vector_of({0.0, 0.0});
  ModelLossProblem problem(model, x, ConditionId{0}, 0, target);
  const auto report =
      grad_check(problem, std::numeric_limits<double>::infinity());
  CHECK(report.passed());
}

TEST_CASE("grad_check fails a deliberately corrupted gradient") {
  DenoiserModel model = small_model(25);
  Rng rng(37);
  const Tensor x = Tensor::randn({3}, 1.0, rng);
  const Tensor target = Tensor::randn({3}, 1.0, rng);
  ModelLossProblem honest(model, x, ConditionId{1}, 3, target);

  std::vector<GradProblem::Block> blocks = honest.blocks();
  ClosureGradProblem corrupted(
      blocks, [&]() { return honest.eval(); },
      [&]() {
        auto grads = honest.gradients();
        grads[0][0] += 0.5;  // corrupted backward rule
        return grads;
      });
  const auto report = grad_check(corrupted, 1e-4);
  CHECK_FALSE(report.passed());
}
