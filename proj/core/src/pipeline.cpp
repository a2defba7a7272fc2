#include "stylid/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <thread>
#include <tuple>

#include "stylid/error.hpp"
#include "stylid/sampler.hpp"

namespace stylid {

void PipelineConfig::validate() const {
  if (!(guidance_scale >= 0.0) || !std::isfinite(guidance_scale)) throw ConfigError("guidance_scale must be >= 0");
  if (!(subject_guidance >= 0.0 && subject_guidance <= 1.0)) throw ConfigError("subject_guidance must lie in [0, 1]");
  if (!(style_intensity >= 0.0 && style_intensity <= 1.0)) throw ConfigError("style_intensity must lie in [0, 1]");
  if (steps < 1) throw ConfigError("steps must be at least 1");
  if (composition_window < 0 || composition_window > steps) {
    throw ConfigError("composition_window must lie in [0, steps] (got " + std::to_string(composition_window) +
                      " with steps " + std::to_string(steps) + ")");
  }
  if (lora_rank < 1) throw ConfigError("lora_rank must be at least 1");
  if (!(lora_alpha > 0.0) || !std::isfinite(lora_alpha)) throw ConfigError("lora_alpha must be positive");
  if (image_size < kMinImageSize) throw ConfigError("image_size must be at least " + std::to_string(kMinImageSize));
  if (train_steps < 0 || identity_train_steps < 0 || lora_steps < 0) {
    throw ConfigError("training step counts must be non-negative");
  }
  if (train_faces == 0) throw ConfigError("train_faces must be positive");
  if (train_batch == 0) throw ConfigError("train_batch must be positive");
  if (!(train_lr > 0.0)) throw ConfigError("train_lr must be positive");
}

void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

constexpr std::uint64_t kStageStream = 0x7374616765;

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

DenoiserModel with_adapters(const DenoiserModel& model, const AdapterSet& adapters) {
  DenoiserModel out = model;
  out.attention() = apply_to_attention(model.attention(), adapters);
  return out;
}

SamplerOptions sampler_options(const PipelineConfig& cfg) {
  return {cfg.guidance_scale, cfg.subject_guidance, cfg.composition_window};
}

Tensor diffusion_pass(const Tensor& styled, const AttributeVector& a, const std::string& prompt,
                      const PipelineConfig& cfg, const RngStream& rng, const DiffusionStage& stage) {
  const DenoiserModel model = identity_arm(stage, identity_embedding(a));
  const Tensor cond = embed_prompt(prompt, model.config().cond_dim);
  const Tensor z = sample(model, cond, stage.schedule, sampler_options(cfg), std::nullopt, encode(styled, stage.codec),
                          rng, stage.codec.latent_shape());
  return decode(z, stage.codec);
}

double ffc_or_zero(const Tensor& out, const AttributeVector& a) {
  try {
    return ffc(face_embedding(extract_attributes(out)), face_embedding(a));
  } catch (const ExtractionError&) {
    return 0.0;
  }
}

StyleOp style_for(const PipelineConfig& cfg) {
  StyleOp op;
  op.intensity = cfg.style_intensity;
  return op;
}

const DiffusionStage* require_stage(const PipelineConfig& cfg, const DiffusionStage* stage,
                                    std::optional<DiffusionStage>& owned) {
  if (!cfg.use_diffusion) return nullptr;
  if (stage) return stage;
  owned.emplace(build_diffusion_stage(cfg));
  return &*owned;
}

PipelineResult finish(Tensor out, const Tensor& i_img, const AttributeVector& a, const PipelineConfig& cfg,
                      const char* order, Clock::time_point start) {
  PipelineResult res{std::move(out), {}};
  res.row.order = order;
  res.row.intensity = cfg.style_intensity;
  res.row.attr_loss = squared_distance(extract_attributes(res.image), extract_attributes(i_img));
  res.row.ffc = ffc_or_zero(res.image, a);
  res.row.seed = cfg.seed;
  res.row.ms = elapsed_ms(start);
  return res;
}

}  // namespace

DiffusionStage build_diffusion_stage(const PipelineConfig& cfg) {
  cfg.validate();
  const auto grid = make_face_grid(cfg.train_faces, cfg.seed);
  const RngStream root(cfg.seed, kStageStream);

  ToyTrainConfig tc;
  tc.steps = cfg.train_steps;
  tc.image_size = cfg.image_size;
  tc.schedule_steps = cfg.steps;
  tc.style_intensity = cfg.style_intensity;
  tc.prompt = cfg.prompt;
  tc.batch = cfg.train_batch;
  tc.lr = cfg.train_lr;
  const ToyTrainResult base = train_toy_denoiser(grid, tc, root.split(0));
  tc.steps = cfg.identity_train_steps;
  tc.stylized_fraction = 0.0;
  const ToyTrainResult plain_arm = fine_tune_arm(base.model, grid, tc, root.split(1), false);
  const ToyTrainResult id_arm = fine_tune_arm(base.model, grid, tc, root.split(1), true);

  DiffusionStage st{plain_arm.model,
                    id_arm.model,
                    {},
                    make_face_codec(cfg.image_size),
                    NoiseSchedule::linear(cfg.steps),
                    plain_arm.initial_loss,
                    plain_arm.final_loss,
                    id_arm.initial_loss,
                    id_arm.final_loss};

  if (cfg.lora_steps > 0) {
    // Style adapters: fitted on stylized latents only, shared by both arms.
    StyleOp style = style_for(cfg);
    const FaceLatents latents = encode_face_grid(grid, st.codec, style, root.split(2));
    ExampleSpec spec;
    spec.stylized_fraction = 1.0;
    const auto data =
        draw_examples(latents, st.schedule, embed_prompt(cfg.prompt, base.model.config().cond_dim), spec, 64,
                      root.split(3));
    LoraTrainConfig lc;
    lc.rank = cfg.lora_rank;
    lc.alpha = cfg.lora_alpha;
    lc.steps = cfg.lora_steps;
    lc.lr = 0.002;
    lc.seed = mix64(cfg.seed);
    st.adapters = train_lora(st.baseline, data, lc);
  }
  return st;
}

DenoiserModel baseline_arm(const DiffusionStage& stage) {
  return with_adapters(stage.baseline, stage.adapters).without_identity();
}

DenoiserModel identity_arm(const DiffusionStage& stage, const IdentityEmbedding& id) {
  return with_adapters(stage.identity_arm, stage.adapters).with_identity(id);
}

DenoiserModel zero_identity_arm(const DiffusionStage& stage) {
  DenoiserModel out = with_adapters(stage.baseline, stage.adapters);
  out.attention().u_q = stage.identity_arm.attention().u_q;
  out.attention().u_k = stage.identity_arm.attention().u_k;
  return out.with_identity(IdentityEmbedding::zeros(out.config().identity_dim));
}

RngStream cell_stream(std::uint64_t seed, std::size_t face_id) {
  return RngStream(seed, 0x63656c6c).split(face_id);
}

PipelineResult run_style_first(const Tensor& i_img, const std::string& prompt, const PipelineConfig& cfg,
                               const RngStream& rng, const DiffusionStage* stage) {
  const auto start = Clock::now();
  cfg.validate();
  std::optional<DiffusionStage> owned;
  stage = require_stage(cfg, stage, owned);
  const AttributeVector a = extract_attributes(i_img);

  Tensor x = graffiti_stylize(i_img, style_for(cfg), rng.split(0));
  if (stage) x = diffusion_pass(x, a, prompt, cfg, rng.split(1), *stage);
  return finish(project(x, a, cfg.projection), i_img, a, cfg, "PS", start);
}

PipelineResult run_identity_first(const Tensor& i_img, const std::string& prompt, const PipelineConfig& cfg,
                                  const RngStream& rng, const DiffusionStage* stage) {
  const auto start = Clock::now();
  cfg.validate();
  std::optional<DiffusionStage> owned;
  stage = require_stage(cfg, stage, owned);
  const AttributeVector a = extract_attributes(i_img);

  Tensor x = graffiti_stylize(project(i_img, a, cfg.projection), style_for(cfg), rng.split(0));
  if (stage) x = diffusion_pass(x, a, prompt, cfg, rng.split(1), *stage);
  return finish(std::move(x), i_img, a, cfg, "SP", start);
}

ExperimentReport ablate_order(const std::vector<FaceParams>& grid, const PipelineConfig& cfg,
                              const std::vector<double>& intensities, const std::vector<std::uint64_t>& seeds,
                              std::size_t jobs) {
  cfg.validate();
  if (grid.empty()) throw ConfigError("ablate_order needs a nonempty face grid");
  if (intensities.empty() || seeds.empty()) throw ConfigError("ablate_order needs at least one intensity and seed");
  for (double s : intensities) {
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("style intensities must lie in [0, 1]");
  }
  std::optional<DiffusionStage> owned;
  const DiffusionStage* stage = require_stage(cfg, nullptr, owned);

  struct Cell {
    std::size_t face;
    double intensity;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t f = 0; f < grid.size(); ++f)
    for (double s : intensities)
      for (std::uint64_t seed : seeds) cells.push_back({f, s, seed});

  std::vector<std::array<ReportRow, 2>> out(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    PipelineConfig cc = cfg;
    cc.style_intensity = c.intensity;
    cc.seed = c.seed;
    const Tensor img = render_face(grid[c.face], cfg.image_size);
    const RngStream rng = cell_stream(c.seed, c.face);
    PipelineResult ps = run_style_first(img, cfg.prompt, cc, rng, stage);
    PipelineResult sp = run_identity_first(img, cfg.prompt, cc, rng, stage);
    ps.row.face_id = sp.row.face_id = c.face;
    if (ps.row.attr_loss > sp.row.attr_loss) {
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "composition order violated: face_id=%zu intensity=%.17g seed=%llu loss_ps=%.17g loss_sp=%.17g",
                    c.face, c.intensity, static_cast<unsigned long long>(c.seed), ps.row.attr_loss, sp.row.attr_loss);
      throw AssertionFailure(buf);
    }
    out[i] = {std::move(ps.row), std::move(sp.row)};
  });

  ExperimentReport rep;
  rep.cells = cells.size();
  std::size_t holds = 0;
  for (const auto& pair : out) {
    rep.mean_loss_ps += pair[0].attr_loss;
    rep.mean_loss_sp += pair[1].attr_loss;
    holds += pair[0].attr_loss <= pair[1].attr_loss;
    rep.strict_wins += pair[0].attr_loss < pair[1].attr_loss;
    rep.rows.push_back(pair[0]);
    rep.rows.push_back(pair[1]);
  }
  const double n = static_cast<double>(cells.size());
  rep.mean_loss_ps /= n;
  rep.mean_loss_sp /= n;
  rep.win_rate = static_cast<double>(holds) / n;
  std::stable_sort(rep.rows.begin(), rep.rows.end(), [](const ReportRow& x, const ReportRow& y) {
    return std::tie(x.face_id, x.intensity, x.seed, x.order) < std::tie(y.face_id, y.intensity, y.seed, y.order);
  });
  return rep;
}

AttentionReport ablate_attention(const std::vector<FaceParams>& grid, const PipelineConfig& cfg,
                                 const DiffusionStage& stage, const AttentionAblationOptions& options) {
  cfg.validate();
  if (grid.empty()) throw ConfigError("ablate_attention needs a nonempty face grid");
  if (options.seeds.empty()) throw ConfigError("ablate_attention needs at least one seed");

  const DenoiserModel baseline = baseline_arm(stage);
  const DenoiserModel zeroed = zero_identity_arm(stage);
  const Tensor cond = embed_prompt(cfg.prompt, baseline.config().cond_dim);
  const SamplerOptions opts = sampler_options(cfg);
  const StyleOp style = style_for(cfg);
  const std::size_t size = stage.codec.image_shape().at(1);

  struct Cell {
    std::size_t face;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (std::size_t f = 0; f < grid.size(); ++f)
    for (std::uint64_t seed : options.seeds) cells.push_back({f, seed});

  std::vector<std::array<AttentionRow, 2>> out(cells.size());
  parallel_for(cells.size(), options.jobs, [&](std::size_t i) {
    const Cell& c = cells[i];
    const RngStream rng = cell_stream(c.seed, c.face);
    const Tensor img = render_face(grid[c.face], size);
    const AttributeVector a = extract_attributes(img);
    const Tensor guide = encode(graffiti_stylize(img, style, rng.split(0)), stage.codec);
    const DenoiserModel arms[2] = {baseline, options.zero_identity ? zeroed : identity_arm(stage, identity_embedding(a))};
    const char* names[2] = {"baseline", "identity"};
    for (int k = 0; k < 2; ++k) {
      const auto start = Clock::now();
      const Tensor z =
          sample(arms[k], cond, stage.schedule, opts, std::nullopt, guide, rng.split(1), stage.codec.latent_shape());
      const Tensor decoded = decode(z, stage.codec);
      AttentionRow row;
      row.face_id = c.face;
      row.arm = names[k];
      row.seed = c.seed;
      try {
        row.ffc = ffc(face_embedding(extract_attributes(decoded)), face_embedding(a));
      } catch (const ExtractionError&) {
        row.ffc = 0.0;
        row.extracted = false;
      }
      row.face_mass = face_attention_mass(arms[k].attention_map_for(guide, cond), kFaceTokenCount);
      row.ms = elapsed_ms(start);
      out[i][k] = std::move(row);
    }
  });

  AttentionReport rep;
  for (const auto& pair : out) {
    rep.mean_ffc_baseline += pair[0].ffc;
    rep.mean_ffc_identity += pair[1].ffc;
    rep.mean_mass_baseline += pair[0].face_mass;
    rep.mean_mass_identity += pair[1].face_mass;
    rep.rows.push_back(pair[0]);
    rep.rows.push_back(pair[1]);
  }
  const double n = static_cast<double>(cells.size());
  rep.mean_ffc_baseline /= n;
  rep.mean_ffc_identity /= n;
  rep.mean_mass_baseline /= n;
  rep.mean_mass_identity /= n;
  return rep;
}

}  // namespace stylid
