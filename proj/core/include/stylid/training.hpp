#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "stylid/denoiser.hpp"
#include "stylid/facegen.hpp"
#include "stylid/lora.hpp"
#include "stylid/rng.hpp"
#include "stylid/schedule.hpp"

namespace stylid {

/// Adam over a fixed list of parameter tensors.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// `params` and `grads` are parallel; a parameter whose gradient is absent
  /// (empty tensor) is skipped.
  void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Trains LoRA factors on the attention projections of `model` by plain
/// gradient descent on mean_noise_loss, with gradients taken only through A
/// and B. `model` itself is never modified. Throws ConfigError for empty data
/// with steps > 0.
AdapterSet train_lora(const DenoiserModel& model, const std::vector<TrainingExample>& data,
                      const LoraTrainConfig& cfg, std::vector<double>* loss_trace = nullptr);

struct ToyTrainConfig {
  int steps = 500;
  std::size_t batch = 16;
  double lr = 0.01;  // Adam step size
  double cond_dropout = 0.2;
  // Probability that a training latent comes from a stylized face.
  double stylized_fraction = 0.5;
  double style_intensity = 0.7;
  std::size_t image_size = 32;
  int schedule_steps = 100;
  std::size_t eval_examples = 64;
  std::string prompt = "graffiti portrait";
  // When set, the base model stays frozen and only adapters are trained.
  std::optional<LoraTrainConfig> lora;
  std::size_t lora_examples = 64;

  void validate() const;
};

struct ToyTrainResult {
  DenoiserModel model;
  AdapterSet adapters;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Latent of every face in a grid, as rendered and as stylized.
struct FaceLatents {
  std::vector<Tensor> clean;
  std::vector<Tensor> stylized;
  std::vector<AttributeVector> attributes;
};

FaceLatents encode_face_grid(const std::vector<FaceParams>& grid, const LatentCodec& codec, const StyleOp& style,
                             const RngStream& rng);

struct ExampleSpec {
  double stylized_fraction = 0.5;
  double cond_dropout = 0.2;
  // Attach identity_embedding(attributes) of the source face.
  bool with_identity = false;
};

/// Noisy training examples drawn from `latents`: a random face (stylized
/// with probability stylized_fraction), a uniform step and fresh noise.
std::vector<TrainingExample> draw_examples(const FaceLatents& latents, const NoiseSchedule& sched, const Tensor& cond,
                                           const ExampleSpec& spec, std::size_t count, const RngStream& rng);

/// Fits a randomly initialized denoiser to the epsilon-prediction task on
/// latents of `grid`. The losses in the result are measured on a fixed
/// held-out batch. Throws TrainingError if the loss becomes non-finite.
ToyTrainResult train_toy_denoiser(const std::vector<FaceParams>& grid, const ToyTrainConfig& cfg,
                                  const RngStream& rng);

/// Fine-tunes every parameter of a copy of `base` on clean face latents.
/// With `with_identity` each example carries identity_embedding(attributes)
/// and the identity projections U_q, U_k train along with the rest; without
/// it the same batches are seen with plain self-attention. Running both from
/// one base and stream gives two arms that differ only in identity access.
ToyTrainResult fine_tune_arm(const DenoiserModel& base, const std::vector<FaceParams>& grid, const ToyTrainConfig& cfg,
                             const RngStream& rng, bool with_identity);

}  // namespace stylid
