#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "stylid/attributes.hpp"
#include "stylid/codec.hpp"
#include "stylid/face_geometry.hpp"
#include "stylid/rng.hpp"
#include "stylid/tensor.hpp"

namespace stylid {

using Rgb = std::array<double, 3>;

inline constexpr std::size_t kPaletteCount = 4;

/// Attributes plus nuisance fields. The nuisance fields (palette, background)
/// only affect colour channels and are invisible to attribute extraction.
struct FaceParams {
  AttributeVector attributes;
  int palette_id = 0;
  double background = 0.5;
};

/// Deterministic {4, size, size} raster. Throws ConfigError for out-of-range
/// parameters or size < 32.
Tensor render_face(const FaceParams& params, std::size_t size);

/// Toy graffiti operator S.
struct StyleOp {
  double intensity = 0.7;
  std::vector<Rgb> palette = default_graffiti_palette();
  double edge_gain = 1.5;
  // Attribute-space jitter magnitude at intensity 1.
  double jitter = 0.15;

  static std::vector<Rgb> default_graffiti_palette();
};

/// Contrast warp, edge boost and palette quantization on the colour channels,
/// each blended with the input by `intensity`, followed by landmark jitter of
/// magnitude `intensity * jitter`. The jitter direction is drawn from a
/// sub-stream of `stream` keyed by the input image's content hash, so S is a
/// deterministic function of (image, op, stream). Intensity 0 returns the
/// input bitwise.
Tensor graffiti_stylize(const Tensor& img, const StyleOp& op, const RngStream& stream);

/// Fraction of pixels whose colour lies within `tolerance` (Euclidean RGB) of
/// each palette entry; the final entry collects everything else.
std::vector<double> palette_histogram(const Tensor& img, const std::vector<Rgb>& palette, double tolerance = 0.05);

std::uint64_t image_hash(const Tensor& img);

/// `count` faces with attributes on the 11-point grid {0, 0.1, ..., 1}.
std::vector<FaceParams> make_face_grid(std::size_t count, std::uint64_t seed);

// Face-aware latent codec.
//
// The 64-dimensional latent (shaped 8×8) reads as 16 tokens of width 4.
// Tokens 0..8 belong to the nine landmarks: [window mass, column moment,
// row moment, one colour statistic]. Tokens 9..15 carry the remaining colour
// block averages and the geometry mass outside all windows. Because the
// mass and first moments of every landmark window are in the row space,
// attribute extraction commutes exactly with decode(encode(.)).
inline constexpr std::size_t kLatentSide = 8;
inline constexpr std::size_t kTokenWidth = 4;
inline constexpr std::size_t kTokenCount = kLatentSide * kLatentSide / kTokenWidth;
inline constexpr std::size_t kFaceTokenCount = kLandmarkCount;

LatentCodec make_face_codec(std::size_t image_size);

/// Binary PPM (P6) of the colour channels, with landmark geometry overlaid in
/// white. Values are clamped to [0, 1] and rounded to 8 bits.
std::string to_ppm(const Tensor& img);

/// Deterministic stand-in for a text encoder: positional token hashes expanded
/// into Gaussian vectors, summed, and normalized to unit length. Throws
/// InputError for text without tokens.
Tensor embed_prompt(std::string_view text, std::size_t dim);

}  // namespace stylid
