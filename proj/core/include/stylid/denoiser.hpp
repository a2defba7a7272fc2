#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "stylid/attention.hpp"
#include "stylid/rng.hpp"
#include "stylid/tensor.hpp"

namespace stylid {

/// Anything that predicts the noise in x_t.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual Tensor predict_noise(const Tensor& x_t, int t, const Tensor& cond) const = 0;
};

struct DenoiserConfig {
  std::size_t token_count = 16;
  std::size_t token_width = 4;  // d_model
  std::size_t head_dim = 8;
  std::size_t cond_dim = 8;
  std::size_t identity_dim = 7;
  int horizon = 100;  // step count the time features are normalized by

  std::size_t latent_size() const noexcept { return token_count * token_width; }
  std::size_t feature_size() const noexcept { return token_count * (head_dim + token_width); }
};

inline constexpr std::size_t kTimeBasis = 3;

/// One attention block plus an affine head, predicting epsilon.
///
///   X  = latent reshaped to token_count × token_width
///   H  = X + 1·(cond·W_c + b_c)
///   A  = self-attention of H (identity-augmented when an identity is bound)
///   f  = [vec(A); vec(H)]
///   eps = sum_k phi_k(t) (f·W_k + b_k),  phi = {1, tau, tau^2}, tau = t / horizon
///
/// All-zero weights give a zero prediction.
class DenoiserModel final : public NoisePredictor {
 public:
  explicit DenoiserModel(DenoiserConfig config = {});

  static DenoiserModel random(const DenoiserConfig& config, RngStream& rng, double attention_scale = 0.5);

  const DenoiserConfig& config() const noexcept { return config_; }

  ExtendedAttentionWeights& attention() noexcept { return attention_; }
  const ExtendedAttentionWeights& attention() const noexcept { return attention_; }
  Tensor& cond_weight() noexcept { return cond_w_; }
  Tensor& cond_bias() noexcept { return cond_b_; }
  std::array<Tensor, kTimeBasis>& head_weights() noexcept { return head_w_; }
  std::array<Tensor, kTimeBasis>& head_biases() noexcept { return head_b_; }
  const std::array<Tensor, kTimeBasis>& head_weights() const noexcept { return head_w_; }

  /// Copy whose self-attention carries `id`; an unbound model uses plain
  /// self-attention with the base weights.
  DenoiserModel with_identity(IdentityEmbedding id) const;
  DenoiserModel without_identity() const;
  const std::optional<IdentityEmbedding>& identity() const noexcept { return identity_; }

  Tensor predict_noise(const Tensor& x_t, int t, const Tensor& cond) const override;

  /// Post-softmax attention of the block for this input.
  Tensor attention_map_for(const Tensor& x_t, const Tensor& cond) const;

  /// Every parameter tensor in a fixed order.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

 private:
  friend struct DenoiserBackprop;

  Tensor tokens_with_cond(const Tensor& x_t, const Tensor& cond) const;

  DenoiserConfig config_;
  ExtendedAttentionWeights attention_;
  Tensor cond_w_, cond_b_;
  std::array<Tensor, kTimeBasis> head_w_, head_b_;
  std::optional<IdentityEmbedding> identity_;
};

std::array<double, kTimeBasis> time_features(int t, int horizon);

/// One supervised epsilon-prediction example.
struct TrainingExample {
  Tensor latent;  // x_t
  int step = 1;
  Tensor cond;
  Tensor target;  // true epsilon
  std::optional<IdentityEmbedding> identity;
};

/// Gradients of the mean squared epsilon error, laid out like
/// DenoiserModel::parameters().
struct DenoiserGradients {
  double loss = 0.0;
  std::vector<Tensor> grads;
};

/// Mean over examples of ||eps_hat - eps||^2 / latent_size. Examples with an
/// identity are evaluated with identity-augmented attention.
double mean_noise_loss(const DenoiserModel& model, const std::vector<TrainingExample>& batch);
DenoiserGradients noise_loss_gradients(const DenoiserModel& model, const std::vector<TrainingExample>& batch);

// Parameter indices into DenoiserModel::parameters().
enum DenoiserParam : std::size_t {
  kParamWq = 0,
  kParamWk,
  kParamWv,
  kParamUq,
  kParamUk,
  kParamCondW,
  kParamCondB,
  kParamHeadW0,  // kTimeBasis head weights follow, then kTimeBasis biases
};
inline constexpr std::size_t kParamHeadB0 = kParamHeadW0 + kTimeBasis;
inline constexpr std::size_t kParamCount = kParamHeadB0 + kTimeBasis;

}  // namespace stylid
