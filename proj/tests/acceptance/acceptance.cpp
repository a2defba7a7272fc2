// Runs every acceptance criterion and prints one PASS/FAIL line each.
#include <CLI11.hpp>

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stylid/cli.hpp"
#include "stylid/error.hpp"
#include "stylid/pipeline.hpp"
#include "stylid/sampler.hpp"
#include "stylid/style.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace stylid;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g(double v) { return fmt("%.3g", v); }

std::vector<double> sweep_intensities() {
  std::vector<double> v;
  for (int i = 1; i <= 10; ++i) v.push_back(i / 10.0);
  return v;
}

// 1. Both composition orders over 100 faces x 10 intensities x 3 seeds.
Outcome composition_order(const fs::path& out_dir) {
  const auto start = Clock::now();
  const PipelineConfig cfg;
  const auto grid = make_face_grid(100, 0);
  const ExperimentReport rep = ablate_order(grid, cfg, sweep_intensities(), {0, 1, 2}, 1);
  const double secs = seconds_since(start);

  double max_ps = 0.0;
  std::size_t strict_needed = 0, strict_missing = 0, drift_mismatch = 0;
  for (std::size_t i = 0; i + 1 < rep.rows.size(); i += 2) {
    const ReportRow &ps = rep.rows[i], &sp = rep.rows[i + 1];
    max_ps = std::max(max_ps, ps.attr_loss);
    // Drift of S measured independently of the pipeline.
    const Tensor img = render_face(grid[ps.face_id], cfg.image_size);
    StyleOp op;
    op.intensity = ps.intensity;
    const double drift = attr_loss(graffiti_stylize(img, op, cell_stream(ps.seed, ps.face_id).split(0)), img);
    drift_mismatch += drift != sp.attr_loss;
    if (drift > 0.0) {
      ++strict_needed;
      strict_missing += !(ps.attr_loss < sp.attr_loss);
    }
  }
  std::ofstream(out_dir / "ablate_order.csv") << [&] {
    std::ostringstream os;
    rep.write_csv(os);
    return os.str();
  }();
  const bool pass = rep.cells == 3000 && rep.win_rate == 1.0 && max_ps <= 1e-9 && strict_missing == 0 &&
                    drift_mismatch == 0 && secs <= 60.0;
  return {pass, "cells=" + std::to_string(rep.cells) + " win_rate=" + g(rep.win_rate) + " max_loss_ps=" + g(max_ps) +
                    " mean_loss_sp=" + g(rep.mean_loss_sp) + " strict=" + std::to_string(strict_needed - strict_missing) +
                    "/" + std::to_string(strict_needed) + " time=" + fmt("%.1fs", secs) + " (limit 60s)"};
}

// 2. F_a(P(S(I))) = F_a(I) on the sweep, and P(I) = I bitwise.
Outcome exact_projection() {
  const auto grid = make_face_grid(100, 0);
  double worst = 0.0;
  std::size_t not_identity = 0, checked = 0;
  for (std::size_t f = 0; f < grid.size(); ++f) {
    const Tensor img = render_face(grid[f], 32);
    const AttributeVector a = extract_attributes(img);
    not_identity += !project(img, a).identical(img);
    for (double k : sweep_intensities()) {
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        StyleOp op;
        op.intensity = k;
        const Tensor s = graffiti_stylize(img, op, cell_stream(seed, f).split(0));
        worst = std::max(worst, max_abs_diff(extract_attributes(project(s, a)), a));
        ++checked;
      }
    }
  }
  return {worst <= 1e-9 && not_identity == 0,
          "cells=" + std::to_string(checked) + " max_attr_error=" + g(worst) +
              " P(I)!=I on " + std::to_string(not_identity) + "/100 renders"};
}

// 3. Zero identity: 1000 random instances, then the pipeline arms.
Outcome zero_identity(const DiffusionStage& stage, const PipelineConfig& cfg) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    RngStream rng(seed, 3);
    const std::size_t n = 2 + seed % 7, dm = 1 + seed % 5, d = 1 + seed % 6, did = 1 + seed % 8;
    ExtendedAttentionWeights w = ExtendedAttentionWeights::from_base(AttentionWeights::random(dm, d, rng, 1.0), did);
    w.u_q = gaussian(rng, {did, d});
    w.u_k = gaussian(rng, {did, d});
    const Tensor x = gaussian(rng, {n, dm}) * 2.0;
    worst = std::max(worst, max_abs_diff(identity_self_attention(x, IdentityEmbedding::zeros(did), w),
                                         self_attention(x, w.base)));
  }

  AttentionAblationOptions opts;
  opts.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) opts.seeds.push_back(s);
  opts.zero_identity = true;
  const auto grid = make_face_grid(5, cfg.seed);
  const AttentionReport rep = ablate_attention(grid, cfg, stage, opts);
  std::size_t row_mismatch = 0;
  for (std::size_t i = 0; i + 1 < rep.rows.size(); i += 2) {
    row_mismatch += rep.rows[i].ffc != rep.rows[i + 1].ffc || rep.rows[i].face_mass != rep.rows[i + 1].face_mass;
  }
  // Sampled latents compared bitwise.
  const DenoiserModel base = baseline_arm(stage), zero = zero_identity_arm(stage);
  const Tensor cond = embed_prompt(cfg.prompt, base.config().cond_dim);
  const SamplerOptions so{cfg.guidance_scale, cfg.subject_guidance, cfg.composition_window};
  std::size_t latent_mismatch = 0;
  for (std::size_t f = 0; f < grid.size(); ++f) {
    const Tensor img = render_face(grid[f], cfg.image_size);
    StyleOp op;
    op.intensity = cfg.style_intensity;
    const RngStream rng = cell_stream(0, f);
    const Tensor guide = encode(graffiti_stylize(img, op, rng.split(0)), stage.codec);
    const Shape shape = stage.codec.latent_shape();
    latent_mismatch += !sample(base, cond, stage.schedule, so, std::nullopt, guide, rng.split(1), shape)
                            .identical(sample(zero, cond, stage.schedule, so, std::nullopt, guide, rng.split(1), shape));
  }
  return {worst <= 1e-12 && row_mismatch == 0 && latent_mismatch == 0,
          "instances=1000 max_abs_diff=" + g(worst) + " pipeline rows differing=" + std::to_string(row_mismatch) + "/" +
              std::to_string(rep.rows.size() / 2) + " latents differing=" + std::to_string(latent_mismatch) + "/" +
              std::to_string(grid.size())};
}

// 4. Analytic style/content gradient against central differences.
Outcome gradient_fidelity() {
  const auto start = Clock::now();
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    RngStream rng(trial, 4);
    const std::size_t channels = 1 + trial % 3;
    std::vector<std::size_t> widths{channels};
    for (std::size_t l = 0; l < 1 + trial % 3; ++l) widths.push_back(2 + (trial + l) % 3);
    const FeatureExtractor phi = FeatureExtractor::random(widths, rng, 0.6 + 0.05 * static_cast<double>(trial));
    const Shape shape = channels == 1 ? Shape{4, 4} : Shape{channels, 4, 4};
    const Tensor x = gaussian(rng, shape), c = gaussian(rng, shape), s = gaussian(rng, shape);
    const StyleLossConfig cfg{rng.next_uniform() * 2.0, rng.next_uniform() * 2.0, trial % phi.layer_count()};
    const Tensor grad = total_loss_grad(x, c, s, cfg, phi);
    const Tensor fd = finite_diff_grad([&](const Tensor& v) { return total_loss(v, c, s, cfg, phi); }, x, 1e-5);
    worst = std::max(worst, frobenius_norm(grad - fd) / frobenius_norm(fd));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && secs <= 30.0,
          "triples=20 max_rel_error=" + g(worst) + " time=" + fmt("%.2fs", secs) + " (limit 30s)"};
}

// 5. Closed-form marginal against iterated single steps.
Outcome diffusion_moments() {
  const NoiseSchedule sched = NoiseSchedule::linear(100);
  const int n = 10000;
  const Tensor x0 = Tensor::vector({1.0, -0.5, 0.25});
  bool ok = true;
  double worst = 0.0;  // largest deviation in standard errors
  for (int t : {1, 50, 100}) {
    RngStream a(5, static_cast<std::uint64_t>(t)), b(6, static_cast<std::uint64_t>(t));
    std::vector<std::vector<double>> closed(x0.size()), iter(x0.size());
    for (int i = 0; i < n; ++i) {
      const Tensor m = forward_marginal(x0, t, sched, a);
      Tensor x = x0;
      for (int k = 1; k <= t; ++k) x = forward_step(x, k, sched, b);
      for (std::size_t d = 0; d < x0.size(); ++d) {
        closed[d].push_back(m[d]);
        iter[d].push_back(x[d]);
      }
    }
    for (std::size_t d = 0; d < x0.size(); ++d) {
      auto stats = [](const std::vector<double>& v) {
        double mean = 0.0, var = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        for (double x : v) var += (x - mean) * (x - mean);
        return std::pair{mean, var / static_cast<double>(v.size() - 1)};
      };
      const auto [mc, vc] = stats(closed[d]);
      const auto [mi, vi] = stats(iter[d]);
      const double var = 1.0 - sched.alpha_bar(t);
      const double se_mean = std::sqrt(2.0 * var / n);
      const double se_var = var * std::sqrt(2.0 * 2.0 / (n - 1));
      const double zm = std::abs(mc - mi) / se_mean, zv = std::abs(vc - vi) / se_var;
      worst = std::max({worst, zm, zv});
      ok = ok && zm <= 3.0 && zv <= 3.0;
    }
  }
  return {ok, "t={1,50,100} samples=10000 max_deviation=" + fmt("%.2f", worst) + " SE (limit 3)"};
}

// 6. Merge exactness, rank bound, frozen base, toy-task descent.
Outcome lora_contracts() {
  double merge_err = 0.0;
  std::size_t rank_violations = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed, 6);
    const std::size_t d = 3 + seed % 6, k = 2 + seed % 7, r = 1 + seed % std::min(d, k);
    const Tensor w = gaussian(rng, {d, k});
    const LoRAAdapter ad{gaussian(rng, {d, r}), gaussian(rng, {r, k}), 0.5 + static_cast<double>(seed % 9)};
    const Tensor merged = merge(w, ad);
    merge_err = std::max(merge_err, frobenius_norm(merged - w - matmul(ad.a, ad.b) * ad.alpha));
    const Tensor delta = merged - w;
    Eigen::MatrixXd m(d, k);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < k; ++j) m(i, j) = delta(i, j);
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
    for (Eigen::Index i = static_cast<Eigen::Index>(r); i < sv.size(); ++i) rank_violations += sv(i) > 1e-9 * sv(0);
  }

  DenoiserConfig dc;
  dc.token_count = 4;
  dc.token_width = 2;
  dc.head_dim = 3;
  dc.cond_dim = 2;
  dc.identity_dim = 2;
  std::size_t frozen_violations = 0, non_decreasing = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(seed);
    const DenoiserModel base = DenoiserModel::random(dc, rng);
    const DenoiserModel before = base;
    std::vector<TrainingExample> data;
    for (int i = 0; i < 8; ++i) {
      const Tensor x = gaussian(rng, {8});
      data.push_back({x, 1 + 12 * i, gaussian(rng, {2}), x * 0.5, std::nullopt});
    }
    LoraTrainConfig cfg;
    cfg.rank = 2;
    cfg.steps = 200;
    cfg.seed = seed;
    std::vector<double> trace;
    train_lora(base, data, cfg, &trace);
    non_decreasing += !(trace.back() < trace.front());
    const auto p = before.parameters(), q = base.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) {
      frozen_violations += p[i]->storage().size() != q[i]->storage().size() ||
                           std::memcmp(p[i]->storage().data(), q[i]->storage().data(),
                                       p[i]->storage().size() * sizeof(double)) != 0;
    }
  }
  return {merge_err <= 1e-12 && rank_violations == 0 && frozen_violations == 0 && non_decreasing == 0,
          "max_merge_error=" + g(merge_err) + " rank_violations=" + std::to_string(rank_violations) +
              " frozen_violations=" + std::to_string(frozen_violations) +
              " seeds_without_descent=" + std::to_string(non_decreasing) + "/10"};
}

// 7. Cosine similarity contracts.
Outcome ffc_metric() {
  double same = 0.0, ortho = 0.0, scale = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed, 7);
    const std::size_t n = 2 + seed % 10;
    const Tensor u = gaussian(rng, {n});
    Tensor v = gaussian(rng, {n});
    v -= u * (dot(u, v) / dot(u, u));
    same = std::max(same, std::abs(ffc(u, u) - 1.0));
    ortho = std::max(ortho, std::abs(ffc(u, v)));
    scale = std::max(scale, std::abs(ffc(u, u * 3.0) - 1.0));
  }
  return {same <= 1e-12 && ortho <= 1e-12 && scale <= 1e-12,
          "pairs=100 |ffc(u,u)-1|=" + g(same) + " |ffc(u,v_perp)|=" + g(ortho) + " |ffc(u,3u)-1|=" + g(scale)};
}

// 8. Trained identity arm against the baseline arm.
Outcome attention_ablation(const DiffusionStage& stage, const PipelineConfig& cfg, double train_secs,
                           const fs::path& out_dir) {
  const auto start = Clock::now();
  AttentionAblationOptions opts;
  opts.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) opts.seeds.push_back(s);
  const AttentionReport rep = ablate_attention(make_face_grid(5, cfg.seed), cfg, stage, opts);
  const double secs = train_secs + seconds_since(start);
  std::ofstream os(out_dir / "ablate_attention.csv");
  rep.write_csv(os);
  const bool exact = rep.mean_ffc_baseline == 1.0 && rep.mean_ffc_identity == 1.0;
  const bool direction = rep.mean_ffc_identity > rep.mean_ffc_baseline ||
                         (rep.mean_ffc_identity == rep.mean_ffc_baseline && exact);
  return {direction && secs <= 300.0,
          "seeds=20 faces=5 mean_ffc identity=" + fmt("%.4f", rep.mean_ffc_identity) +
              " baseline=" + fmt("%.4f", rep.mean_ffc_baseline) + " face_mass identity=" +
              fmt("%.4f", rep.mean_mass_identity) + " baseline=" + fmt("%.4f", rep.mean_mass_baseline) +
              " time=" + fmt("%.1fs", secs) + " (limit 300s)"};
}

// 9. Every command, repeated and across worker counts, via the CLI.
Outcome determinism(const fs::path& out_dir) {
  const std::vector<std::string> quick = {"--seed",        "13", "--steps",       "20", "--window", "5",
                                          "--train-steps", "40", "--identity-steps", "20", "--lora-steps", "5",
                                          "--train-faces", "4",  "--train-batch", "8"};
  const fs::path vec = out_dir / "embedding.txt";
  std::ofstream(vec) << "0.3 -0.2 0.9\n";
  std::vector<std::vector<std::string>> commands = {
      {"render", "--faces", "4"},
      {"stylize", "--faces", "4"},
      {"diffuse", "--faces", "3"},
      {"train"},
      {"ablate-order", "--faces", "6", "--seeds", "2"},
      {"ablate-attention", "--faces", "2", "--seeds", "3"},
      {"ffc", vec.string(), vec.string()},
      {"attn-map", "--face-id", "1"},
  };
  std::size_t failures = 0, runs = 0;
  std::string failed;
  for (const auto& base : commands) {
    std::map<std::string, std::uint64_t> reference;
    std::string reference_summary;
    int k = 0;
    for (const char* jobs : {"1", "1", "3"}) {
      const fs::path dir = out_dir / "determinism" / (base[0] + "_" + std::to_string(k++));
      fs::remove_all(dir);
      fs::create_directories(dir);
      std::vector<std::string> args = base;
      args.insert(args.end(), quick.begin(), quick.end());
      args.insert(args.end(), {"--jobs", jobs, "--out-dir", dir.string()});
      std::ostringstream out, err;
      const int code = cli::run(args, out, err);
      ++runs;
      // The summary line without its wall time.
      std::string text = out.str();
      std::string summary = text.substr(text.find('\n') + 1);
      summary = summary.substr(0, summary.find(" wall_ms="));
      const auto sums = stylid::testing::checksum_dir(dir);
      if (k == 1) {
        reference = sums;
        reference_summary = summary;
      }
      if (code != 0 || sums != reference || summary != reference_summary) {
        ++failures;
        failed += " " + base[0];
      }
    }
  }
  return {failures == 0, "commands=" + std::to_string(commands.size()) + " runs=" + std::to_string(runs) +
                             " jobs={1,1,3} mismatches=" + std::to_string(failures) + failed};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string out = "acceptance_out";
  app.add_option("--out-dir", out, "Directory for generated reports");
  CLI11_PARSE(app, argc, argv);
  const fs::path out_dir(out);
  fs::create_directories(out_dir);

  const PipelineConfig cfg;
  std::optional<DiffusionStage> stage;
  double train_secs = 0.0;
  auto trained = [&]() -> const DiffusionStage& {
    if (!stage) {
      const auto start = Clock::now();
      stage.emplace(build_diffusion_stage(cfg));
      train_secs = seconds_since(start);
    }
    return *stage;
  };

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"composition-order", [&] { return composition_order(out_dir); }},
      {"exact-projection", [&] { return exact_projection(); }},
      {"zero-identity", [&] { return zero_identity(trained(), cfg); }},
      {"gradient-fidelity", [&] { return gradient_fidelity(); }},
      {"diffusion-moments", [&] { return diffusion_moments(); }},
      {"lora-contracts", [&] { return lora_contracts(); }},
      {"ffc-metric", [&] { return ffc_metric(); }},
      {"attention-ablation", [&] { return attention_ablation(trained(), cfg, train_secs, out_dir); }},
      {"determinism", [&] { return determinism(out_dir); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %-19s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
