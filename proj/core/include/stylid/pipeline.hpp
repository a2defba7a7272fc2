#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stylid/codec.hpp"
#include "stylid/denoiser.hpp"
#include "stylid/facegen.hpp"
#include "stylid/identity.hpp"
#include "stylid/lora.hpp"
#include "stylid/rng.hpp"
#include "stylid/schedule.hpp"
#include "stylid/training.hpp"

namespace stylid {

/// Run configuration. Rank and alpha default to the desk-scale 4 / 8; the
/// full-scale setting is rank 64, alpha 128 (valid here, but larger than the
/// toy attention matrices admit).
struct PipelineConfig {
  double guidance_scale = 7.5;
  double subject_guidance = 0.95;
  double style_intensity = 0.7;
  int steps = 100;
  int composition_window = 25;
  std::size_t lora_rank = 4;
  double lora_alpha = 8.0;
  std::uint64_t seed = 0;

  bool use_diffusion = false;
  ProjectionMode projection = ProjectionMode::kRerender;
  std::size_t image_size = 32;
  std::string prompt = "graffiti portrait";

  // Toy training budget for the diffusion stage.
  int train_steps = 1000;
  int identity_train_steps = 1000;
  int lora_steps = 50;
  std::size_t train_faces = 32;
  std::size_t train_batch = 64;
  double train_lr = 0.003;

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

struct ReportRow {
  std::size_t face_id = 0;
  std::string order;  // "PS" (style first) or "SP" (identity first)
  double intensity = 0.0;
  double attr_loss = 0.0;
  double ffc = 0.0;
  std::uint64_t seed = 0;
  double ms = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  double mean_loss_ps = 0.0;
  double mean_loss_sp = 0.0;
  double win_rate = 0.0;      // cells with loss_ps <= loss_sp
  std::size_t strict_wins = 0;  // cells with loss_ps < loss_sp
  std::size_t cells = 0;

  /// CSV with header face_id,order,intensity,attr_loss,ffc,seed,ms. The ms
  /// column is written as 0 unless `with_timing`, so reports stay
  /// byte-identical across runs.
  void write_csv(std::ostream& os, bool with_timing = false) const;
  std::string summary() const;
};

struct AttentionRow {
  std::size_t face_id = 0;
  std::string arm;  // "baseline" or "identity"
  std::uint64_t seed = 0;
  double ffc = 0.0;
  double face_mass = 0.0;
  bool extracted = true;
  double ms = 0.0;
};

struct AttentionReport {
  std::vector<AttentionRow> rows;
  double mean_ffc_baseline = 0.0;
  double mean_ffc_identity = 0.0;
  double mean_mass_baseline = 0.0;
  double mean_mass_identity = 0.0;

  /// CSV with header face_id,arm,seed,ffc,face_mass,ms.
  void write_csv(std::ostream& os, bool with_timing = false) const;
  std::string summary() const;
};

/// Trained denoisers shared by the diffusion pass and the attention ablation.
/// Both arms carry the same LoRA adapters; they differ only in the identity
/// projections U_q, U_k.
struct DiffusionStage {
  DenoiserModel baseline;
  DenoiserModel identity_arm;
  AdapterSet adapters;
  LatentCodec codec;
  NoiseSchedule schedule;
  double base_loss_initial = 0.0, base_loss_final = 0.0;
  double identity_loss_initial = 0.0, identity_loss_final = 0.0;
};

DiffusionStage build_diffusion_stage(const PipelineConfig& cfg);

/// The stage's arms with adapters merged: plain self-attention, and the
/// identity arm bound to `id`.
DenoiserModel baseline_arm(const DiffusionStage& stage);
DenoiserModel identity_arm(const DiffusionStage& stage, const IdentityEmbedding& id);
/// Baseline weights with the identity arm's U_q, U_k, bound to a zero
/// embedding. Identity attention then reduces to the baseline exactly.
DenoiserModel zero_identity_arm(const DiffusionStage& stage);

struct PipelineResult {
  Tensor image;
  ReportRow row;
};

/// graffiti_stylize, then (if cfg.use_diffusion) a guided, identity-aware
/// denoiser pass, then projection to F_a(I). Row order tag "PS".
PipelineResult run_style_first(const Tensor& i_img, const std::string& prompt, const PipelineConfig& cfg,
                               const RngStream& rng, const DiffusionStage* stage = nullptr);

/// Projection to F_a(I) first, then the same stylization and optional
/// denoiser pass. Row order tag "SP".
PipelineResult run_identity_first(const Tensor& i_img, const std::string& prompt, const PipelineConfig& cfg,
                                  const RngStream& rng, const DiffusionStage* stage = nullptr);

/// Stream for one (seed, face) sweep cell; independent of the worker that
/// runs it and shared by every intensity of that face.
RngStream cell_stream(std::uint64_t seed, std::size_t face_id);

/// Both orders for every (face, intensity, seed) cell, run on `jobs` worker
/// threads. Rows are sorted by (face_id, intensity, seed, order). Throws
/// AssertionFailure naming the first offending cell if any cell has
/// loss_ps > loss_sp.
ExperimentReport ablate_order(const std::vector<FaceParams>& grid, const PipelineConfig& cfg,
                              const std::vector<double>& intensities, const std::vector<std::uint64_t>& seeds,
                              std::size_t jobs = 1);

struct AttentionAblationOptions {
  std::vector<std::uint64_t> seeds{0};
  // Runs zero_identity_arm in place of the identity arm; the two arms must
  // then coincide.
  bool zero_identity = false;
  std::size_t jobs = 1;
};

/// Samples every face with the baseline and the identity arm from the same
/// stream and reports the FFC of each output's attributes against the input
/// face, plus the attention mass on face tokens. An output whose landmarks
/// cannot be extracted scores ffc 0.
AttentionReport ablate_attention(const std::vector<FaceParams>& grid, const PipelineConfig& cfg,
                                 const DiffusionStage& stage, const AttentionAblationOptions& options);

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. If any call
/// throws, the exception of the lowest index is rethrown after all workers
/// finish.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace stylid
