// Micro-benchmarks for the hot paths of the pipeline.
#include <benchmark/benchmark.h>

#include "stylid/attention.hpp"
#include "stylid/denoiser.hpp"
#include "stylid/facegen.hpp"
#include "stylid/identity.hpp"
#include "stylid/lora.hpp"
#include "stylid/pipeline.hpp"
#include "stylid/sampler.hpp"
#include "stylid/style.hpp"

using namespace stylid;

namespace {

void BM_PhiloxBlock(benchmark::State& state) {
  RngStream rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(rng.next_block());
}
BENCHMARK(BM_PhiloxBlock);

void BM_Gaussian(benchmark::State& state) {
  RngStream rng(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gaussian(rng, {n}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Gaussian)->Arg(64)->Arg(4096);

void BM_SelfAttention(benchmark::State& state) {
  RngStream rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  const AttentionWeights w = AttentionWeights::random(8, 8, rng, 1.0);
  const Tensor x = gaussian(rng, {n, 8});
  for (auto _ : state) benchmark::DoNotOptimize(self_attention(x, w));
}
BENCHMARK(BM_SelfAttention)->Arg(16)->Arg(64)->Arg(256);

void BM_IdentitySelfAttention(benchmark::State& state) {
  RngStream rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  ExtendedAttentionWeights w = ExtendedAttentionWeights::from_base(AttentionWeights::random(8, 8, rng, 1.0), 4);
  w.u_q = gaussian(rng, {4, 8});
  w.u_k = gaussian(rng, {4, 8});
  const IdentityEmbedding id{gaussian(rng, {4})};
  const Tensor x = gaussian(rng, {n, 8});
  for (auto _ : state) benchmark::DoNotOptimize(identity_self_attention(x, id, w));
}
BENCHMARK(BM_IdentitySelfAttention)->Arg(16)->Arg(64)->Arg(256);

void BM_LoraMerge(benchmark::State& state) {
  RngStream rng(5);
  const auto d = static_cast<std::size_t>(state.range(0));
  const Tensor w = gaussian(rng, {d, d});
  const LoRAAdapter ad{gaussian(rng, {d, 4}), gaussian(rng, {4, d}), 2.0};
  for (auto _ : state) benchmark::DoNotOptimize(merge(w, ad));
}
BENCHMARK(BM_LoraMerge)->Arg(16)->Arg(128);

void BM_DenoiserPredict(benchmark::State& state) {
  RngStream rng(6);
  const DenoiserModel model = DenoiserModel::random(DenoiserConfig{}, rng);
  const Tensor x = gaussian(rng, {model.config().token_count * model.config().token_width});
  const Tensor cond = embed_prompt("guitarist pose", model.config().cond_dim);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict_noise(x, 50, cond));
}
BENCHMARK(BM_DenoiserPredict);

void BM_Sample(benchmark::State& state) {
  RngStream rng(7);
  const DenoiserModel model = DenoiserModel::random(DenoiserConfig{}, rng);
  const auto steps = static_cast<int>(state.range(0));
  const NoiseSchedule sched = NoiseSchedule::linear(steps);
  const Tensor cond = embed_prompt("guitarist pose", model.config().cond_dim);
  const Shape shape{model.config().token_count * model.config().token_width};
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample(model, cond, sched, SamplerOptions{7.5, 0.95, 0}, std::nullopt, std::nullopt, rng.split(0), shape));
  }
}
BENCHMARK(BM_Sample)->Arg(50)->Arg(100);

void BM_RenderFace(benchmark::State& state) {
  const FaceParams face = make_face_grid(1, 0).front();
  const auto size = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(render_face(face, size));
}
BENCHMARK(BM_RenderFace)->Arg(32)->Arg(128);

void BM_StylizeProject(benchmark::State& state) {
  const Tensor img = render_face(make_face_grid(1, 0).front(), 64);
  const AttributeVector a = extract_attributes(img);
  StyleOp op;
  op.intensity = 0.7;
  const RngStream rng(8);
  for (auto _ : state) benchmark::DoNotOptimize(project(graffiti_stylize(img, op, rng), a));
}
BENCHMARK(BM_StylizeProject);

void BM_ExtractAttributes(benchmark::State& state) {
  const Tensor img = render_face(make_face_grid(1, 0).front(), static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extract_attributes(img));
}
BENCHMARK(BM_ExtractAttributes)->Arg(32)->Arg(128);

void BM_StyleLossGrad(benchmark::State& state) {
  RngStream rng(9);
  const FeatureExtractor phi = FeatureExtractor::random({3, 8, 8}, rng, 1.0);
  const auto s = static_cast<std::size_t>(state.range(0));
  const Tensor x = gaussian(rng, {3, s, s}), c = gaussian(rng, {3, s, s}), st = gaussian(rng, {3, s, s});
  const StyleLossConfig cfg{1.0, 1.0, 0};
  for (auto _ : state) benchmark::DoNotOptimize(total_loss_grad(x, c, st, cfg, phi));
}
BENCHMARK(BM_StyleLossGrad)->Arg(16)->Arg(32);

void BM_AblateOrder(benchmark::State& state) {
  const auto grid = make_face_grid(10, 0);
  const PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(ablate_order(grid, cfg, {0.5, 1.0}, {0}, 1));
  state.SetItemsProcessed(state.iterations() * 20);
}
BENCHMARK(BM_AblateOrder)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
