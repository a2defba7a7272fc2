#include "stylid/training.hpp"

#include <cmath>
#include <string>

#include "stylid/error.hpp"
#include "stylid/identity.hpp"

namespace stylid {

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
  if (params.size() != grads.size()) throw ShapeError("Adam: parameter and gradient lists differ in length");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  if (m_.size() != params.size()) throw ShapeError("Adam: parameter list changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].empty()) continue;
    Tensor& p = *params[i];
    require_same_shape(p, grads[i], "Adam");
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = grads[i][j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      p[j] -= lr_ * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + eps_);
    }
  }
}

namespace {

void require_finite_loss(double loss, const char* what, int step) {
  if (!std::isfinite(loss)) {
    throw TrainingError(std::string(what) + " diverged: loss is " + std::to_string(loss) + " at step " +
                        std::to_string(step));
  }
}

DenoiserModel with_adapters(const DenoiserModel& model, const AdapterSet& adapters) {
  DenoiserModel merged = model;
  merged.attention() = apply_to_attention(model.attention(), adapters);
  return merged;
}

void lora_descent(LoRAAdapter& ad, const Tensor& d_merged, double lr) {
  // W~ = W + alpha A B  =>  dA = alpha dW~ B^T,  dB = alpha A^T dW~
  const Tensor da = matmul(d_merged, transpose(ad.b)) * ad.alpha;
  const Tensor db = matmul(transpose(ad.a), d_merged) * ad.alpha;
  ad.a -= da * lr;
  ad.b -= db * lr;
}

}  // namespace

AdapterSet train_lora(const DenoiserModel& model, const std::vector<TrainingExample>& data,
                      const LoraTrainConfig& cfg, std::vector<double>* loss_trace) {
  cfg.validate();
  if (data.empty() && cfg.steps > 0) throw ConfigError("train_lora needs at least one example when steps > 0");

  const auto& base = model.attention().base;
  const RngStream root(cfg.seed, 0x6c6f7261);
  AdapterSet ad;
  if (cfg.target_q) {
    RngStream r = root.split(0);
    ad.q = LoRAAdapter::init(base.w_q.rows(), base.w_q.cols(), cfg.rank, cfg.alpha, r, cfg.init_scale);
  }
  if (cfg.target_k) {
    RngStream r = root.split(1);
    ad.k = LoRAAdapter::init(base.w_k.rows(), base.w_k.cols(), cfg.rank, cfg.alpha, r, cfg.init_scale);
  }
  if (cfg.target_v) {
    RngStream r = root.split(2);
    ad.v = LoRAAdapter::init(base.w_v.rows(), base.w_v.cols(), cfg.rank, cfg.alpha, r, cfg.init_scale);
  }

  for (int step = 0; step < cfg.steps; ++step) {
    const DenoiserGradients g = noise_loss_gradients(with_adapters(model, ad), data);
    require_finite_loss(g.loss, "LoRA training", step);
    if (loss_trace) loss_trace->push_back(g.loss);
    if (ad.q) lora_descent(*ad.q, g.grads[kParamWq], cfg.lr);
    if (ad.k) lora_descent(*ad.k, g.grads[kParamWk], cfg.lr);
    if (ad.v) lora_descent(*ad.v, g.grads[kParamWv], cfg.lr);
  }
  if (loss_trace && !data.empty()) {
    const double final_loss = mean_noise_loss(with_adapters(model, ad), data);
    require_finite_loss(final_loss, "LoRA training", cfg.steps);
    loss_trace->push_back(final_loss);
  }
  return ad;
}

void ToyTrainConfig::validate() const {
  if (steps < 0) throw ConfigError("training steps must be non-negative");
  if (batch == 0 || eval_examples == 0) throw ConfigError("batch sizes must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(cond_dropout >= 0.0 && cond_dropout <= 1.0)) throw ConfigError("cond_dropout must lie in [0, 1]");
  if (!(stylized_fraction >= 0.0 && stylized_fraction <= 1.0)) {
    throw ConfigError("stylized_fraction must lie in [0, 1]");
  }
  if (schedule_steps < 1) throw ConfigError("schedule_steps must be at least 1");
  if (lora) lora->validate();
}

FaceLatents encode_face_grid(const std::vector<FaceParams>& grid, const LatentCodec& codec, const StyleOp& style,
                             const RngStream& rng) {
  FaceLatents out;
  const std::size_t size = codec.image_shape().at(1);
  for (const FaceParams& face : grid) {
    const Tensor img = render_face(face, size);
    out.clean.push_back(encode(img, codec));
    out.stylized.push_back(encode(graffiti_stylize(img, style, rng), codec));
    out.attributes.push_back(face.attributes);
  }
  return out;
}

namespace {

struct ExampleSource {
  const FaceLatents& latents;
  const NoiseSchedule& sched;
  Tensor cond;
  double cond_dropout;
  double stylized_fraction;
  bool with_identity;

  TrainingExample draw(RngStream& rng) const {
    const std::size_t n = latents.clean.size();
    const std::size_t face = static_cast<std::size_t>(rng.next_u64() % n);
    const bool stylized = rng.next_uniform() <= stylized_fraction && stylized_fraction > 0.0;
    const int t = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(sched.steps()));
    const bool dropped = rng.next_uniform() <= cond_dropout && cond_dropout > 0.0;
    const Tensor& x0 = stylized ? latents.stylized[face] : latents.clean[face];
    TrainingExample ex;
    ex.target = gaussian(rng, x0.shape());
    ex.latent = forward_marginal_with_noise(x0, t, sched, ex.target);
    ex.step = t;
    ex.cond = dropped ? Tensor(cond.shape()) : cond;
    if (with_identity) ex.identity = identity_embedding(latents.attributes[face]);
    return ex;
  }

  std::vector<TrainingExample> batch(RngStream rng, std::size_t count) const {
    std::vector<TrainingExample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(draw(rng));
    return out;
  }
};

}  // namespace

std::vector<TrainingExample> draw_examples(const FaceLatents& latents, const NoiseSchedule& sched, const Tensor& cond,
                                           const ExampleSpec& spec, std::size_t count, const RngStream& rng) {
  if (latents.clean.empty()) throw ConfigError("draw_examples needs at least one face");
  const ExampleSource src{latents, sched, cond, spec.cond_dropout, spec.stylized_fraction, spec.with_identity};
  return src.batch(rng, count);
}

namespace {

void require_grid(const std::vector<FaceParams>& grid) {
  if (grid.empty()) throw ConfigError("training needs a nonempty face grid");
}

}  // namespace

ToyTrainResult train_toy_denoiser(const std::vector<FaceParams>& grid, const ToyTrainConfig& cfg,
                                  const RngStream& rng) {
  cfg.validate();
  require_grid(grid);
  DenoiserConfig dcfg;
  dcfg.horizon = cfg.schedule_steps;
  RngStream init_rng = rng.split(0);
  ToyTrainResult res{DenoiserModel::random(dcfg, init_rng), {}, 0.0, 0.0};

  const LatentCodec codec = make_face_codec(cfg.image_size);
  StyleOp style;
  style.intensity = cfg.style_intensity;
  const FaceLatents latents = encode_face_grid(grid, codec, style, rng.split(3));
  const NoiseSchedule sched = NoiseSchedule::linear(cfg.schedule_steps);
  const ExampleSource src{latents, sched, embed_prompt(cfg.prompt, dcfg.cond_dim), cfg.cond_dropout,
                          cfg.stylized_fraction, false};
  const std::vector<TrainingExample> eval = src.batch(rng.split(2), cfg.eval_examples);

  if (cfg.lora) {
    const std::vector<TrainingExample> data = src.batch(rng.split(1), cfg.lora_examples);
    LoraTrainConfig lcfg = *cfg.lora;
    lcfg.steps = cfg.steps;
    res.initial_loss = mean_noise_loss(res.model, eval);
    res.adapters = train_lora(res.model, data, lcfg);
    res.final_loss = mean_noise_loss(with_adapters(res.model, res.adapters), eval);
    require_finite_loss(res.final_loss, "denoiser training", cfg.steps);
    return res;
  }

  res.initial_loss = mean_noise_loss(res.model, eval);
  Adam opt(cfg.lr);
  const RngStream step_root = rng.split(1);
  for (int step = 0; step < cfg.steps; ++step) {
    const auto batch = src.batch(step_root.split(static_cast<std::uint64_t>(step)), cfg.batch);
    DenoiserGradients g = noise_loss_gradients(res.model, batch);
    require_finite_loss(g.loss, "denoiser training", step);
    // Identity projections stay at zero in the base model.
    g.grads[kParamUq] = Tensor();
    g.grads[kParamUk] = Tensor();
    opt.step(res.model.parameters(), g.grads);
  }
  res.final_loss = mean_noise_loss(res.model, eval);
  require_finite_loss(res.final_loss, "denoiser training", cfg.steps);
  return res;
}

ToyTrainResult fine_tune_arm(const DenoiserModel& base, const std::vector<FaceParams>& grid, const ToyTrainConfig& cfg,
                             const RngStream& rng, bool with_identity) {
  cfg.validate();
  require_grid(grid);
  ToyTrainResult res{base.without_identity(), {}, 0.0, 0.0};

  const LatentCodec codec = make_face_codec(cfg.image_size);
  StyleOp style;
  style.intensity = cfg.style_intensity;
  const FaceLatents latents = encode_face_grid(grid, codec, style, rng.split(3));
  const NoiseSchedule sched = NoiseSchedule::linear(cfg.schedule_steps);
  const ExampleSource src{latents, sched, embed_prompt(cfg.prompt, base.config().cond_dim), cfg.cond_dropout,
                          cfg.stylized_fraction, with_identity};
  const std::vector<TrainingExample> eval = src.batch(rng.split(2), cfg.eval_examples);

  res.initial_loss = mean_noise_loss(res.model, eval);
  Adam opt(cfg.lr);
  const RngStream step_root = rng.split(1);
  for (int step = 0; step < cfg.steps; ++step) {
    const auto batch = src.batch(step_root.split(static_cast<std::uint64_t>(step)), cfg.batch);
    const DenoiserGradients g = noise_loss_gradients(res.model, batch);
    require_finite_loss(g.loss, "fine-tuning", step);
    opt.step(res.model.parameters(), g.grads);
  }
  res.final_loss = mean_noise_loss(res.model, eval);
  require_finite_loss(res.final_loss, "fine-tuning", cfg.steps);
  return res;
}

}  // namespace stylid
