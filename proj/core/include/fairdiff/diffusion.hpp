// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "fairdiff/nn.hpp"
#include "fairdiff/tensor.hpp"

namespace fairdiff {

class Rng;

/// Linear-beta DDPM noise schedule over T discrete timesteps.
/// alpha_bar[t] is the cumulative signal fraction at level t; t = 0 is the
/// near-clean level and t = T-1 the near-pure-noise level.
struct NoiseSchedule {
  int t_steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;

  /// alpha_bar[t-1], with the t = 0 convention alpha_bar[-1] = 1.
  double alpha_bar_prev(int t) const {
    return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 1)];
  }
  /// Ancestral sampler noise scale; zero at the final step.
  double sigma(int t) const;
  void check_timestep(int t) const;
};

NoiseSchedule make_schedule(int t_steps, double beta_min, double beta_max);

/// Forward noising: z_t = sqrt(alpha_bar[t]) x0 + sqrt(1 - alpha_bar[t]) eps.
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps,
                const NoiseSchedule& sched);

/// One ancestral reverse step: consumes the state at level t and the model's
/// noise prediction for it, produces the state at level t-1. `noise` must be
/// a standard normal draw; it is ignored at t = 0 where sigma is zero.
Tensor reverse_step(const Tensor& z, const Tensor& eps_hat, int t,
                    const NoiseSchedule& sched, const Tensor& noise);

struct LdmLossResult {
  double loss = 0.0;
  Tensor d_eps_hat;  // dloss/d(predicted eps), for chaining into backward
  Tensor eps_hat;
};

/// Denoising objective: squared L2 between the true noise and the model
/// prediction at z_t = q_sample(x0, t, eps). Records the tape when given.
LdmLossResult ldm_loss(const DenoiserModel& model, const Tensor& x0,
                       ConditionId cond, int t, const Tensor& eps,
                       const NoiseSchedule& sched,
                       GradientTape* tape = nullptr,
                       const ActiveAdapters* adapters = nullptr);

/// Classifier-free guidance composition:
/// eps = eps_uncond + scale * (eps_cond - eps_uncond).
/// scale == 1 short-circuits to a single conditional forward.
Tensor cfg_epsilon(const DenoiserModel& model, const Tensor& z_t,
                   ConditionId cond, int t, double guidance_scale,
                   const ActiveAdapters* adapters = nullptr);

struct SampleTrajectory {
  std::vector<Tensor> states;  // z_T ... z_0, length t_steps + 1
  ConditionId cond;
  double guidance_scale = 1.0;

  const Tensor& final_sample() const { return states.back(); }
};

/// Full ancestral reverse process from pure noise. Deterministic given the
/// rng state. Throws NumericalError naming the step if a latent diverges.
SampleTrajectory sample(const DenoiserModel& model, ConditionId cond,
                        const NoiseSchedule& sched, double guidance_scale,
                        const ActiveAdapters* adapters, Rng& rng);

/// Reverse process stopped early: returns the latent at level `stop_t`
/// (stop_t == t_steps returns the initial Gaussian draw untouched).
Tensor sample_partial(const DenoiserModel& model, ConditionId cond,
                      const NoiseSchedule& sched, double guidance_scale,
                      const ActiveAdapters* adapters, int stop_t, Rng& rng);

}  // namespace fairdiff
