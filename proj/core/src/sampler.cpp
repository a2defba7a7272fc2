#include "stylid/sampler.hpp"

#include <cmath>

#include "stylid/error.hpp"

namespace stylid {

Tensor guided_noise(const NoisePredictor& model, const Tensor& x_t, int t, const Tensor& cond, double guidance_scale) {
  Tensor eps_c = model.predict_noise(x_t, t, cond);
  if (guidance_scale == 1.0) return eps_c;
  const Tensor eps_u = model.predict_noise(x_t, t, Tensor(cond.shape()));
  Tensor out = eps_u;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += guidance_scale * (eps_c[i] - eps_u[i]);
  return out;
}

Tensor reverse_step(const Tensor& x_t, int t, const Tensor& cond, const NoisePredictor& model,
                    const NoiseSchedule& sched, RngStream& rng, double guidance_scale) {
  const double beta = sched.beta(t);
  const double alpha = sched.alpha(t);
  const double abar = sched.alpha_bar(t);
  const Tensor eps = guided_noise(model, x_t, t, cond, guidance_scale);
  require_same_shape(x_t, eps, "reverse_step");
  const double coef = abar < 1.0 ? beta / std::sqrt(1.0 - abar) : 0.0;
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  Tensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - coef * eps[i]) * inv_sqrt_alpha;
  if (t > 1) {
    const Tensor z = gaussian(rng, x_t.shape());
    const double sigma = std::sqrt(beta);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * z[i];
  }
  return out;
}

Tensor sample(const NoisePredictor& model, const Tensor& cond, const NoiseSchedule& sched,
              const SamplerOptions& options, const std::optional<Tensor>& init, const std::optional<Tensor>& guide,
              const RngStream& rng, const Shape& latent_shape) {
  const int T = sched.steps();
  if (options.window < 0 || options.window > T) {
    throw ConfigError("composition window " + std::to_string(options.window) + " outside [0, " + std::to_string(T) +
                      "]");
  }
  if (options.window > 0 && !guide) throw ConfigError("a composition window needs a guide latent");
  if (!(options.subject_guidance >= 0.0 && options.subject_guidance <= 1.0)) {
    throw ConfigError("subject guidance must lie in [0, 1]");
  }

  RngStream init_stream = rng.split(0);
  RngStream step_stream = rng.split(1);
  RngStream guide_stream = rng.split(2);

  Tensor x = init ? *init : gaussian(init_stream, latent_shape);
  if (options.window > 0) require_same_shape(x, *guide, "sample guide");

  const double lambda = options.subject_guidance;
  for (int t = T; t >= 1; --t) {
    if (T - t < options.window) {
      const Tensor g = forward_marginal(*guide, t, sched, guide_stream);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = (1.0 - lambda) * x[i] + lambda * g[i];
    }
    x = reverse_step(x, t, cond, model, sched, step_stream, options.guidance_scale);
  }
  return x;
}

}  // namespace stylid
