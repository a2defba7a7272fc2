#include "stylid/schedule.hpp"

#include <cmath>
#include <string>

#include "stylid/error.hpp"

namespace stylid {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
  alpha_.resize(beta_.size());
  alpha_bar_.resize(beta_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < beta_.size(); ++i) {
    alpha_[i] = 1.0 - beta_[i];
    running *= alpha_[i];
    alpha_bar_[i] = running;
  }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("noise schedule needs at least one step, got " + std::to_string(steps));
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ConfigError("noise schedule requires 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    betas[i] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ConfigError("noise schedule needs at least one step");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] >= 0.0 && betas[i] < 1.0)) throw ConfigError("beta values must lie in [0, 1)");
    if (i > 0 && betas[i] < betas[i - 1]) throw ConfigError("beta values must be non-decreasing");
  }
  return NoiseSchedule(std::move(betas));
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > steps()) {
    throw StepError("step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
}

double NoiseSchedule::beta(int t) const {
  check_step(t);
  return beta_[t - 1];
}

double NoiseSchedule::alpha(int t) const {
  check_step(t);
  return alpha_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  check_step(t);
  return alpha_bar_[t - 1];
}

Tensor forward_step(const Tensor& x_prev, int t, const NoiseSchedule& sched, RngStream& rng) {
  const double beta = sched.beta(t);
  Tensor eps = gaussian(rng, x_prev.shape());
  Tensor out = x_prev;
  const double keep = std::sqrt(1.0 - beta), spread = std::sqrt(beta);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * out[i] + spread * eps[i];
  return out;
}

Tensor forward_marginal_with_noise(const Tensor& x0, int t, const NoiseSchedule& sched, const Tensor& eps) {
  require_same_shape(x0, eps, "forward_marginal");
  const double abar = sched.alpha_bar(t);
  const double keep = std::sqrt(abar), spread = std::sqrt(1.0 - abar);
  Tensor out = x0;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * out[i] + spread * eps[i];
  return out;
}

Tensor forward_marginal(const Tensor& x0, int t, const NoiseSchedule& sched, RngStream& rng) {
  sched.alpha_bar(t);  // validates t before consuming randomness
  return forward_marginal_with_noise(x0, t, sched, gaussian(rng, x0.shape()));
}

}  // namespace stylid
