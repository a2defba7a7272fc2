#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stylid/error.hpp"
#include "stylid/pipeline.hpp"
#include "stylid/sampler.hpp"
#include "support.hpp"

using namespace stylid;

namespace {

PipelineConfig small_diffusion_config() {
  PipelineConfig cfg;
  cfg.use_diffusion = true;
  cfg.steps = 20;
  cfg.composition_window = 5;
  cfg.train_steps = 40;
  cfg.identity_train_steps = 20;
  cfg.lora_steps = 5;
  cfg.train_faces = 4;
  cfg.train_batch = 8;
  return cfg;
}

const DiffusionStage& small_stage() {
  static const DiffusionStage stage = build_diffusion_stage(small_diffusion_config());
  return stage;
}

std::string csv_of(const ExperimentReport& rep) {
  std::ostringstream os;
  rep.write_csv(os);
  return os.str();
}

std::string csv_of(const AttentionReport& rep) {
  std::ostringstream os;
  rep.write_csv(os);
  return os.str();
}

}  // namespace

TEST_CASE("config validation") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.composition_window = 101;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = PipelineConfig{};
  cfg.style_intensity = 1.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = PipelineConfig{};
  cfg.image_size = 16;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = PipelineConfig{};
  cfg.lora_rank = 64;
  cfg.lora_alpha = 128;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("style first, identity after") {
  const auto grid = make_face_grid(10, 1);
  const RngStream rng(3);
  PipelineConfig cfg;

  SUBCASE("degenerate stages") {
    cfg.style_intensity = 0.0;
    cfg.composition_window = 0;
    for (const FaceParams& p : grid) {
      const Tensor img = render_face(p, 32);
      const PipelineResult ps = run_style_first(img, cfg.prompt, cfg, rng);
      const PipelineResult sp = run_identity_first(img, cfg.prompt, cfg, rng);
      CHECK(ps.row.attr_loss == 0.0);
      CHECK(sp.row.attr_loss == 0.0);
      CHECK(ps.image.identical(img));
      CHECK(sp.image.identical(ps.image));
      CHECK(ps.row.ffc == sp.row.ffc);
    }
  }
  SUBCASE("defaults") {
    for (const FaceParams& p : grid) {
      const Tensor img = render_face(p, 32);
      const PipelineResult ps = run_style_first(img, cfg.prompt, cfg, rng);
      CHECK(ps.row.order == "PS");
      CHECK(ps.row.attr_loss <= 1e-9);
      CHECK(std::abs(ps.row.ffc - 1.0) <= 1e-6);

      const PipelineResult sp = run_identity_first(img, cfg.prompt, cfg, rng);
      CHECK(sp.row.order == "SP");
      const Tensor drifted = graffiti_stylize(img, StyleOp{0.7}, rng.split(0));
      CHECK(sp.row.attr_loss > 0.0);
      CHECK(sp.row.attr_loss == attr_loss(drifted, img));
      CHECK(sp.image.identical(drifted));
    }
  }
  SUBCASE("optimize projection") {
    cfg.projection = ProjectionMode::kOptimize;
    const Tensor img = render_face(grid[0], 32);
    const PipelineResult ps = run_style_first(img, cfg.prompt, cfg, rng);
    CHECK(ps.row.attr_loss <= 6 * 1e-8);
    CHECK(ps.row.attr_loss <= run_identity_first(img, cfg.prompt, cfg, rng).row.attr_loss);
  }
}

TEST_CASE("diffusion path") {
  const DiffusionStage& stage = small_stage();
  const PipelineConfig cfg = small_diffusion_config();
  const RngStream rng(8);
  const Tensor img = render_face(make_face_grid(1, 2)[0], 32);

  const PipelineResult ps = run_style_first(img, cfg.prompt, cfg, rng, &stage);
  CHECK(ps.row.attr_loss <= 1e-9);
  CHECK(std::abs(ps.row.ffc - 1.0) <= 1e-6);
  CHECK(run_style_first(img, cfg.prompt, cfg, rng, &stage).image.identical(ps.image));

  const PipelineResult sp = run_identity_first(img, cfg.prompt, cfg, rng, &stage);
  CHECK(ps.row.attr_loss <= sp.row.attr_loss);

  SUBCASE("a zero window never reads the guide") {
    const DenoiserModel model = identity_arm(stage, identity_embedding(extract_attributes(img)));
    const Tensor cond = embed_prompt(cfg.prompt, model.config().cond_dim);
    SamplerOptions opts{cfg.guidance_scale, cfg.subject_guidance, 0};
    const Shape shape = stage.codec.latent_shape();
    const Tensor poison = Tensor::filled(shape, std::nan(""));
    const Tensor a = sample(model, cond, stage.schedule, opts, std::nullopt, std::nullopt, rng, shape);
    const Tensor b = sample(model, cond, stage.schedule, opts, std::nullopt, poison, rng, shape);
    CHECK(a.identical(b));
    CHECK(a.all_finite());
  }
}

TEST_CASE("ablate_order") {
  const auto grid = make_face_grid(10, 4);
  const PipelineConfig cfg;
  std::vector<double> intensities;
  for (int i = 1; i <= 10; ++i) intensities.push_back(i / 10.0);

  const ExperimentReport rep = ablate_order(grid, cfg, intensities, {0, 1}, 1);
  CHECK(rep.cells == 200);
  CHECK(rep.rows.size() == 400);
  CHECK(rep.win_rate == 1.0);
  CHECK(rep.mean_loss_ps <= 1e-9);
  CHECK(rep.mean_loss_sp > 0.0);
  for (std::size_t i = 0; i + 1 < rep.rows.size(); i += 2) {
    CHECK(rep.rows[i].order == "PS");
    CHECK(rep.rows[i + 1].order == "SP");
    CHECK(rep.rows[i].attr_loss <= rep.rows[i + 1].attr_loss);
  }

  const std::string csv = csv_of(rep);
  CHECK(csv.rfind("face_id,order,intensity,attr_loss,ffc,seed,ms\n", 0) == 0);
  CHECK(csv_of(ablate_order(grid, cfg, intensities, {0, 1}, 1)) == csv);
  CHECK(csv_of(ablate_order(grid, cfg, intensities, {0, 1}, 3)) == csv);

  SUBCASE("ties at intensity 0 count as holds") {
    const ExperimentReport tie = ablate_order({grid[0]}, cfg, {0.0}, {5}, 1);
    CHECK(tie.rows.size() == 2);
    CHECK(tie.rows[0].attr_loss == 0.0);
    CHECK(tie.rows[1].attr_loss == 0.0);
    CHECK(tie.win_rate == 1.0);
    CHECK(tie.strict_wins == 0);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(ablate_order({}, cfg, intensities, {0}, 1), ConfigError);
    CHECK_THROWS_AS(ablate_order(grid, cfg, {1.5}, {0}, 1), ConfigError);
    CHECK_THROWS_AS(ablate_order(grid, cfg, intensities, {}, 1), ConfigError);
  }
}

TEST_CASE("ablate_attention") {
  const DiffusionStage& stage = small_stage();
  const PipelineConfig cfg = small_diffusion_config();
  const auto grid = make_face_grid(3, 6);

  SUBCASE("zero identity arms coincide") {
    AttentionAblationOptions opts;
    opts.seeds = {0, 1};
    opts.zero_identity = true;
    const AttentionReport rep = ablate_attention(grid, cfg, stage, opts);
    REQUIRE(rep.rows.size() == 12);
    for (std::size_t i = 0; i < rep.rows.size(); i += 2) {
      CHECK(rep.rows[i].arm == "baseline");
      CHECK(rep.rows[i + 1].arm == "identity");
      CHECK(rep.rows[i].ffc == rep.rows[i + 1].ffc);
      CHECK(rep.rows[i].face_mass == rep.rows[i + 1].face_mass);
    }
    CHECK(rep.mean_ffc_baseline == rep.mean_ffc_identity);
  }
  SUBCASE("reproducible for any worker count") {
    AttentionAblationOptions opts;
    opts.seeds = {0, 1, 2};
    const std::string one = csv_of(ablate_attention(grid, cfg, stage, opts));
    opts.jobs = 4;
    CHECK(csv_of(ablate_attention(grid, cfg, stage, opts)) == one);
    CHECK(one.rfind("face_id,arm,seed,ffc,face_mass,ms\n", 0) == 0);
  }
}

TEST_CASE("constructed identity weights raise face attention mass") {
  // Zero baseline: every logit is 0, so the face mass is 9/16. The identity
  // arm keys on a direction separating face tokens from the rest, and its
  // query is c·e_0 through the constant entry of the identity code.
  PipelineConfig cfg;
  cfg.steps = 10;
  cfg.composition_window = 2;
  const DenoiserConfig dc;
  const LatentCodec codec = make_face_codec(32);
  const FaceParams face = make_face_grid(1, 0)[0];
  const Tensor img = render_face(face, 32);
  const Tensor guide = encode(graffiti_stylize(img, StyleOp{cfg.style_intensity}, cell_stream(0, 0).split(0)), codec);
  const Tensor tokens = guide.reshaped({dc.token_count, dc.token_width});

  std::vector<double> w(dc.token_width, 0.0);
  for (std::size_t j = 0; j < dc.token_count; ++j)
    for (std::size_t c = 0; c < dc.token_width; ++c)
      w[c] += tokens(j, c) * (j < kFaceTokenCount ? 1.0 / kFaceTokenCount : -1.0 / (dc.token_count - kFaceTokenCount));
  const double scale = 4.0;

  DenoiserModel id_model(dc);
  for (std::size_t c = 0; c < dc.token_width; ++c) id_model.attention().base.w_k(c, 0) = w[c];
  id_model.attention().u_q(dc.identity_dim - 1, 0) = scale;

  // Direct evaluation of the identity arm's face mass.
  std::vector<double> logits(dc.token_count);
  double norm = 0.0, face_mass = 0.0;
  for (std::size_t j = 0; j < dc.token_count; ++j) {
    double k = 0.0;
    for (std::size_t c = 0; c < dc.token_width; ++c) k += tokens(j, c) * w[c];
    logits[j] = std::exp(scale * k / std::sqrt(static_cast<double>(dc.head_dim)));
    norm += logits[j];
    if (j < kFaceTokenCount) face_mass += logits[j];
  }
  face_mass /= norm;

  const DiffusionStage stage{DenoiserModel(dc), id_model, {}, codec, NoiseSchedule::linear(cfg.steps)};
  const AttentionReport rep = ablate_attention({face}, cfg, stage, AttentionAblationOptions{});
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].face_mass == doctest::Approx(9.0 / 16.0).epsilon(1e-14));
  CHECK(rep.rows[1].face_mass == doctest::Approx(face_mass).epsilon(1e-12));
  CHECK(rep.rows[1].face_mass > rep.rows[0].face_mass);
}

TEST_CASE("toy denoiser training") {
  const auto grid = make_face_grid(8, 2);
  const RngStream rng(11);
  ToyTrainConfig cfg;

  cfg.steps = 0;
  const ToyTrainResult zero = train_toy_denoiser(grid, cfg, rng);
  DenoiserConfig dc;
  dc.horizon = cfg.schedule_steps;
  RngStream init = rng.split(0);
  const DenoiserModel fresh = DenoiserModel::random(dc, init);
  for (std::size_t p = 0; p < kParamCount; ++p) CHECK(zero.model.parameters()[p]->identical(*fresh.parameters()[p]));
  CHECK(zero.initial_loss == zero.final_loss);

  SUBCASE("500 steps reduce the loss") {
    cfg.steps = 500;
    const ToyTrainResult res = train_toy_denoiser(grid, cfg, rng);
    CHECK(res.final_loss < res.initial_loss);
    CHECK(res.model.attention().u_q.identical(zero.model.attention().u_q));
  }
  SUBCASE("LoRA mode keeps the base frozen") {
    cfg.steps = 30;
    cfg.lora = LoraTrainConfig{};
    const ToyTrainResult res = train_toy_denoiser(grid, cfg, rng);
    for (std::size_t p = 0; p < kParamCount; ++p) CHECK(res.model.parameters()[p]->identical(*fresh.parameters()[p]));
    REQUIRE(res.adapters.q);
    CHECK(frobenius_norm(res.adapters.q->b) > 0.0);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(train_toy_denoiser({}, cfg, rng), ConfigError);
    cfg.lr = -1.0;
    CHECK_THROWS_AS(train_toy_denoiser(grid, cfg, rng), ConfigError);
  }
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  std::vector<int> hit(50, 0);
  try {
    parallel_for(50, 4, [&](std::size_t i) {
      hit[i] = 1;
      if (i == 17 || i == 31) throw InputError("cell " + std::to_string(i));
    });
    FAIL("expected a throw");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()) == "cell 17");
  }
  for (int h : hit) CHECK(h == 1);
}
