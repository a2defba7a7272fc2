#pragma once

#include <cstddef>
#include <vector>

#include "stylid/rng.hpp"
#include "stylid/tensor.hpp"

namespace stylid {

/// Per-step noise variances beta_t with the derived alpha_t = 1 - beta_t and
/// alpha_bar_t = prod_{s<=t} alpha_s. Steps are 1-indexed, t in [1, T].
class NoiseSchedule {
 public:
  /// Linear interpolation of beta from beta_start to beta_end over T steps.
  /// Requires T >= 1 and 0 < beta_start <= beta_end < 1.
  static NoiseSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 0.02);

  /// Arbitrary non-decreasing betas in [0, 1). Zero entries are accepted so
  /// tests can probe the noiseless limit.
  static NoiseSchedule from_betas(std::vector<double> betas);

  int steps() const noexcept { return static_cast<int>(beta_.size()); }
  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;

  const std::vector<double>& betas() const noexcept { return beta_; }
  const std::vector<double>& alpha_bars() const noexcept { return alpha_bar_; }

 private:
  explicit NoiseSchedule(std::vector<double> betas);
  void check_step(int t) const;

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

/// x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(beta_t) eps, eps ~ N(0, I).
Tensor forward_step(const Tensor& x_prev, int t, const NoiseSchedule& sched, RngStream& rng);

/// Closed form of t iterated forward steps: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Tensor forward_marginal(const Tensor& x0, int t, const NoiseSchedule& sched, RngStream& rng);

/// Same as forward_marginal but with caller-supplied noise.
Tensor forward_marginal_with_noise(const Tensor& x0, int t, const NoiseSchedule& sched, const Tensor& eps);

}  // namespace stylid
