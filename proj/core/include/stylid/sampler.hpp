#pragma once

#include <optional>

#include "stylid/denoiser.hpp"
#include "stylid/rng.hpp"
#include "stylid/schedule.hpp"
#include "stylid/tensor.hpp"

namespace stylid {

/// Guided noise estimate eps_u + g·(eps_c - eps_u), where eps_u uses an
/// all-zero conditioning vector. g == 1 skips the unconditional pass.
Tensor guided_noise(const NoisePredictor& model, const Tensor& x_t, int t, const Tensor& cond, double guidance_scale);

/// One ancestral step with fixed variance sigma_t^2 = beta_t:
///   x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) · eps_hat) / sqrt(alpha_t) + sigma_t z,
/// with z drawn only when t > 1.
Tensor reverse_step(const Tensor& x_t, int t, const Tensor& cond, const NoisePredictor& model,
                    const NoiseSchedule& sched, RngStream& rng, double guidance_scale = 1.0);

struct SamplerOptions {
  double guidance_scale = 7.5;
  double subject_guidance = 0.95;  // blend weight toward the guide
  int window = 25;                 // number of leading reverse steps that blend
};

/// Runs reverse_step from t = T down to 1. During the first `window` steps
/// the state is first blended as (1 - lambda)·x_t + lambda·guide_t, with
/// guide_t a fresh forward_marginal sample of the guide at step t.
///
/// Randomness: the initial state, the reverse noise and the guide noise come
/// from three separate splits of `rng`, so a zero window yields the same
/// output whether or not a guide is passed.
Tensor sample(const NoisePredictor& model, const Tensor& cond, const NoiseSchedule& sched,
              const SamplerOptions& options, const std::optional<Tensor>& init, const std::optional<Tensor>& guide,
              const RngStream& rng, const Shape& latent_shape);

}  // namespace stylid
