// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "fairdiff/diffusion.hpp"

#include <cmath>

#include "fairdiff/error.hpp"
#include "fairdiff/rng.hpp"

namespace fairdiff {

double NoiseSchedule::sigma(int t) const {
  check_timestep(t);
  const auto i = static_cast<std::size_t>(t);
  const double var =
      beta[i] * (1.0 - alpha_bar_prev(t)) / (1.0 - alpha_bar[i]);
  return std::sqrt(var);
}

void NoiseSchedule::check_timestep(int t) const {
  if (t < 0 || t >= t_steps) {
    throw ConfigError("timestep " + std::to_string(t) +
                      " outside schedule of " + std::to_string(t_steps) +
                      " steps");
  }
}

NoiseSchedule make_schedule(int t_steps, double beta_min, double beta_max) {
  if (t_steps < 2) {
    throw ConfigError("schedule.t_steps must be >= 2, got " +
                      std::to_string(t_steps));
  }
  if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
    throw ConfigError("schedule requires 0 < beta_min <= beta_max < 1");
  }
  NoiseSchedule s;
  s.t_steps = t_steps;
  s.beta.resize(static_cast<std::size_t>(t_steps));
  s.alpha.resize(static_cast<std::size_t>(t_steps));
  s.alpha_bar.resize(static_cast<std::size_t>(t_steps));
  double running = 1.0;
  for (int t = 0; t < t_steps; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const double frac =
        t_steps == 1 ? 0.0
                     : static_cast<double>(t) / static_cast<double>(t_steps - 1);
    s.beta[i] = beta_min + (beta_max - beta_min) * frac;
    s.alpha[i] = 1.0 - s.beta[i];
    running *= s.alpha[i];
    s.alpha_bar[i] = running;
  }
  return s;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps,
                const NoiseSchedule& sched) {
  sched.check_timestep(t);
  if (!x0.same_shape(eps)) {
    throw DimensionError("q_sample: x0 " + x0.shape_str() +
                         " and eps " + eps.shape_str() + " differ");
  }
  const double ab = sched.alpha_bar[static_cast<std::size_t>(t)];
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  Tensor z = x0;
  for (std::size_t i = 0; i < z.numel(); ++i) {
    z[i] = signal * x0[i] + noise * eps[i];
  }
  return z;
}

Tensor reverse_step(const Tensor& z, const Tensor& eps_hat, int t,
                    const NoiseSchedule& sched, const Tensor& noise) {
  sched.check_timestep(t);
  const auto i = static_cast<std::size_t>(t);
  const double eps_coef = sched.beta[i] / std::sqrt(1.0 - sched.alpha_bar[i]);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha[i]);
  const double sigma = sched.sigma(t);
  Tensor out = z;
  for (std::size_t d = 0; d < z.numel(); ++d) {
    out[d] = inv_sqrt_alpha * (z[d] - eps_coef * eps_hat[d]);
    if (sigma > 0.0) out[d] += sigma * noise[d];
  }
  return out;
}

LdmLossResult ldm_loss(const DenoiserModel& model, const Tensor& x0,
                       ConditionId cond, int t, const Tensor& eps,
                       const NoiseSchedule& sched, GradientTape* tape,
                       const ActiveAdapters* adapters) {
  const Tensor z_t = q_sample(x0, t, eps, sched);
  LdmLossResult res;
  res.eps_hat = denoiser_forward(model, z_t, cond, t, adapters, tape);
  res.d_eps_hat = Tensor({eps.numel()});
  for (std::size_t i = 0; i < eps.numel(); ++i) {
    const double diff = res.eps_hat[i] - eps[i];
    res.loss += diff * diff;
    res.d_eps_hat[i] = 2.0 * diff;
  }
  return res;
}

Tensor cfg_epsilon(const DenoiserModel& model, const Tensor& z_t,
                   ConditionId cond, int t, double guidance_scale,
                   const ActiveAdapters* adapters) {
  if (guidance_scale == 1.0) {
    return denoiser_forward(model, z_t, cond, t, adapters);
  }
  const Tensor eps_uncond =
      denoiser_forward(model, z_t, kEmptyCondition, t, adapters);
  if (guidance_scale == 0.0) return eps_uncond;
  const Tensor eps_cond = denoiser_forward(model, z_t, cond, t, adapters);
  Tensor out = eps_uncond;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] += guidance_scale * (eps_cond[i] - eps_uncond[i]);
  }
  return out;
}

namespace {

// Shared reverse loop: runs steps t = T-1 down to `last_step` inclusive.
// Step t consumes the state at noise level t and produces level t-1, so
// running through last_step = 0 yields the clean sample while
// last_step = t+1 leaves the state at level t (q_sample-consistent).
Tensor reverse_loop(const DenoiserModel& model, ConditionId cond,
                    const NoiseSchedule& sched, double guidance_scale,
                    const ActiveAdapters* adapters, int last_step, Rng& rng,
                    std::vector<Tensor>* trajectory) {
  const auto dim = static_cast<std::size_t>(model.spec.sample_dim);
  Tensor z({dim});
  for (std::size_t i = 0; i < dim; ++i) z[i] = rng.gaussian();
  if (trajectory != nullptr) trajectory->push_back(z);

  for (int t = sched.t_steps - 1; t >= last_step; --t) {
    const Tensor eps_hat =
        cfg_epsilon(model, z, cond, t, guidance_scale, adapters);
    Tensor noise({dim});
    if (sched.sigma(t) > 0.0) {
      for (std::size_t i = 0; i < dim; ++i) noise[i] = rng.gaussian();
    }
    z = reverse_step(z, eps_hat, t, sched, noise);
    if (!z.all_finite()) {
      throw NumericalError("latent diverged at reverse step t=" +
                           std::to_string(t));
    }
    if (trajectory != nullptr) trajectory->push_back(z);
  }
  return z;
}

}  // namespace

SampleTrajectory sample(const DenoiserModel& model, ConditionId cond,
                        const NoiseSchedule& sched, double guidance_scale,
                        const ActiveAdapters* adapters, Rng& rng) {
  SampleTrajectory traj;
  traj.cond = cond;
  traj.guidance_scale = guidance_scale;
  traj.states.reserve(static_cast<std::size_t>(sched.t_steps) + 1);
  reverse_loop(model, cond, sched, guidance_scale, adapters, 0, rng,
               &traj.states);
  return traj;
}

Tensor sample_partial(const DenoiserModel& model, ConditionId cond,
                      const NoiseSchedule& sched, double guidance_scale,
                      const ActiveAdapters* adapters, int stop_t, Rng& rng) {
  if (stop_t < 0 || stop_t > sched.t_steps) {
    throw ConfigError("sample_partial stop_t " + std::to_string(stop_t) +
                      " outside [0, " + std::to_string(sched.t_steps) + "]");
  }
  return reverse_loop(model, cond, sched, guidance_scale, adapters,
                      stop_t + 1, rng, nullptr);
}

}  // namespace fairdiff
