#include "stylid/facegen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "stylid/error.hpp"

namespace stylid {

namespace {

struct Palette {
  Rgb skin, feature, accent;
};

constexpr std::array<Palette, kPaletteCount> kFacePalettes = {{
    {{0.85, 0.70, 0.55}, {0.20, 0.10, 0.05}, {0.70, 0.30, 0.25}},
    {{0.55, 0.38, 0.25}, {0.10, 0.05, 0.02}, {0.45, 0.20, 0.15}},
    {{0.95, 0.80, 0.70}, {0.30, 0.20, 0.40}, {0.80, 0.40, 0.40}},
    {{0.40, 0.27, 0.18}, {0.05, 0.05, 0.05}, {0.60, 0.25, 0.20}},
}};

void set_rgb(Tensor& img, std::size_t r, std::size_t c, const Rgb& rgb) {
  for (std::size_t ch = 0; ch < 3; ++ch) img(ch + 1, r, c) = rgb[ch];
}

void validate_params(const FaceParams& p) {
  if (!p.attributes.in_range()) throw ConfigError("face attributes must lie in [0, 1]");
  if (p.palette_id < 0 || p.palette_id >= static_cast<int>(kPaletteCount)) {
    throw ConfigError("palette id out of range: " + std::to_string(p.palette_id));
  }
  if (!(p.background >= 0.0 && p.background <= 1.0)) throw ConfigError("background shade must lie in [0, 1]");
}

double contrast_warp(double c) { return 0.5 + 0.5 * std::tanh(3.0 * (c - 0.5)) / std::tanh(1.5); }

const Rgb& nearest_colour(const Rgb& c, const std::vector<Rgb>& palette) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < palette.size(); ++i) {
    double d = 0.0;
    for (std::size_t ch = 0; ch < 3; ++ch) d += (c[ch] - palette[i][ch]) * (c[ch] - palette[i][ch]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return palette[best];
}

AttributeVector clamped_attributes(const Tensor& img) {
  AttributeVector a = attributes_from_landmarks(measure_geometry(img).centroids);
  for (auto& v : a.values) v = std::clamp(v, 0.0, 1.0);
  return a;
}

}  // namespace

Tensor render_face(const FaceParams& params, std::size_t size) {
  validate_params(params);
  if (size < kMinImageSize) {
    throw ConfigError("face images must be at least " + std::to_string(kMinImageSize) + " pixels");
  }
  const auto& pal = kFacePalettes[static_cast<std::size_t>(params.palette_id)];
  const auto& a = params.attributes;
  const auto marks = landmark_positions(a);

  const double chin = marks[static_cast<std::size_t>(Landmark::kChin)].v;
  const double face_cv = 0.52, face_ry = chin - face_cv, face_rx = 0.75 * face_ry;
  const double eye_h = std::max(0.015, marks[1].v - 0.38);
  const double nose_tip = marks[static_cast<std::size_t>(Landmark::kNoseTip)].v;
  const double mouth_w = marks[static_cast<std::size_t>(Landmark::kMouthRight)].u - 0.5;
  const double mouth_bow = marks[static_cast<std::size_t>(Landmark::kMouthCenter)].v - 0.72;

  Tensor img({kImageChannels, size, size});
  const double inv = 1.0 / static_cast<double>(size);
  for (std::size_t r = 0; r < size; ++r) {
    const double v = (static_cast<double>(r) + 0.5) * inv;
    for (std::size_t c = 0; c < size; ++c) {
      const double u = (static_cast<double>(c) + 0.5) * inv;
      Rgb colour = {params.background, params.background, params.background};
      const double fu = (u - 0.5) / face_rx, fv = (v - face_cv) / face_ry;
      if (fu * fu + fv * fv <= 1.0) colour = pal.skin;
      for (std::size_t eye : {0u, 2u}) {
        const double eu = (u - marks[eye].u) / 0.05, ev = (v - 0.38) / eye_h;
        if (eu * eu + ev * ev <= 1.0) colour = pal.feature;
      }
      if (std::abs(u - 0.5) <= 0.015 && v >= 0.42 && v <= nose_tip) colour = pal.accent;
      if (std::abs(u - 0.5) <= mouth_w) {
        const double s = (u - 0.5) / mouth_w;
        const double curve = 0.72 + mouth_bow * (1.0 - s * s);
        if (std::abs(v - curve) <= 0.015) colour = pal.feature;
      }
      set_rgb(img, r, c, colour);
    }
  }
  draw_geometry(img, a);
  return img;
}

std::vector<Rgb> StyleOp::default_graffiti_palette() {
  return {{0.05, 0.05, 0.05}, {0.95, 0.95, 0.95}, {0.90, 0.10, 0.60}, {0.10, 0.80, 0.90},
          {0.98, 0.85, 0.10}, {1.00, 0.45, 0.05}, {0.20, 0.85, 0.30}};
}

std::uint64_t image_hash(const Tensor& img) {
  std::uint64_t h = mix64(img.rank());
  for (auto e : img.shape()) h = hash_combine(h, e);
  for (double v : img.values()) h = hash_combine(h, std::bit_cast<std::uint64_t>(v));
  return h;
}

Tensor graffiti_stylize(const Tensor& img, const StyleOp& op, const RngStream& stream) {
  require_face_image(img, "graffiti_stylize");
  if (!(op.intensity >= 0.0 && op.intensity <= 1.0)) throw ConfigError("style intensity must lie in [0, 1]");
  if (op.palette.empty()) throw ConfigError("style palette must not be empty");
  if (op.intensity == 0.0) return img;

  const std::size_t size = img.shape()[1];
  const double k = op.intensity;

  Tensor warped = img;
  for (std::size_t ch = 1; ch < kImageChannels; ++ch)
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c) warped(ch, r, c) = contrast_warp(img(ch, r, c));

  Tensor boosted = warped;
  for (std::size_t ch = 1; ch < kImageChannels; ++ch) {
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        double sum = 0.0;
        int count = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const auto rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
            if (rr < 0 || cc < 0 || rr >= static_cast<long>(size) || cc >= static_cast<long>(size)) continue;
            sum += warped(ch, static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
            ++count;
          }
        }
        const double centre = warped(ch, r, c);
        boosted(ch, r, c) = std::clamp(centre + op.edge_gain * (centre - sum / count), 0.0, 1.0);
      }
    }
  }

  Tensor out = img;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const Rgb b = {boosted(1, r, c), boosted(2, r, c), boosted(3, r, c)};
      const Rgb& q = nearest_colour(b, op.palette);
      for (std::size_t ch = 0; ch < 3; ++ch) out(ch + 1, r, c) = (1.0 - k) * img(ch + 1, r, c) + k * q[ch];
    }
  }

  // Geometry jitter: the direction depends only on the input image, the
  // magnitude scales with intensity, so drift is monotone in intensity.
  const AttributeVector before = clamped_attributes(img);
  RngStream jitter_stream = stream.split(image_hash(img));
  const Tensor dir = gaussian(jitter_stream, {kAttributeCount});
  AttributeVector after = before;
  for (std::size_t i = 0; i < kAttributeCount; ++i) {
    after[i] = std::clamp(before[i] + k * op.jitter * dir[i], 0.0, 1.0);
  }
  draw_geometry(out, after);
  return out;
}

std::vector<double> palette_histogram(const Tensor& img, const std::vector<Rgb>& palette, double tolerance) {
  require_face_image(img, "palette_histogram");
  const std::size_t size = img.shape()[1];
  std::vector<double> hist(palette.size() + 1, 0.0);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      std::size_t bin = palette.size();
      double best = tolerance * tolerance;
      for (std::size_t i = 0; i < palette.size(); ++i) {
        double d = 0.0;
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double e = img(ch + 1, r, c) - palette[i][ch];
          d += e * e;
        }
        if (d <= best) {
          best = d;
          bin = i;
        }
      }
      hist[bin] += 1.0;
    }
  }
  for (auto& h : hist) h /= static_cast<double>(size * size);
  return hist;
}

std::vector<FaceParams> make_face_grid(std::size_t count, std::uint64_t seed) {
  std::vector<FaceParams> grid;
  grid.reserve(count);
  const RngStream root(seed, 0x6661636573ull);
  for (std::size_t i = 0; i < count; ++i) {
    RngStream s = root.split(i);
    FaceParams p;
    for (auto& v : p.attributes.values) v = static_cast<double>(s.next_u64() % 11) / 10.0;
    p.palette_id = static_cast<int>(s.next_u64() % kPaletteCount);
    p.background = 0.2 + 0.06 * static_cast<double>(s.next_u64() % 11);
    grid.push_back(p);
  }
  return grid;
}

LatentCodec make_face_codec(std::size_t image_size) {
  const LandmarkLayout layout(image_size);
  const std::size_t S = image_size;
  const std::size_t n = kImageChannels * S * S;
  const std::size_t z = kLatentSide * kLatentSide;
  Tensor enc({z, n});
  auto pixel = [S](std::size_t ch, std::size_t r, std::size_t c) { return (ch * S + r) * S + c; };

  // Colour statistic j -> latent index.
  auto colour_slot = [](std::size_t j) {
    return j < kLandmarkCount ? j * kTokenWidth + 3 : kLandmarkCount * kTokenWidth + (j - kLandmarkCount);
  };

  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    const auto& w = layout.window(k);
    const double rc = (static_cast<double>(w.row0) + static_cast<double>(w.row1)) / 2.0;
    const double cc = (static_cast<double>(w.col0) + static_cast<double>(w.col1)) / 2.0;
    double rr_norm = 0.0, cc_norm = 0.0;
    for (std::size_t r = w.row0; r <= w.row1; ++r)
      for (std::size_t c = w.col0; c <= w.col1; ++c) {
        rr_norm += (r - rc) * (r - rc);
        cc_norm += (c - cc) * (c - cc);
      }
    rr_norm = std::sqrt(rr_norm);
    cc_norm = std::sqrt(cc_norm);
    const double mass_w = 1.0 / std::sqrt(static_cast<double>(w.area()));
    for (std::size_t r = w.row0; r <= w.row1; ++r) {
      for (std::size_t c = w.col0; c <= w.col1; ++c) {
        const std::size_t p = pixel(kGeometryChannel, r, c);
        enc(k * kTokenWidth + 0, p) = mass_w;
        enc(k * kTokenWidth + 1, p) = (static_cast<double>(c) - cc) / cc_norm;
        enc(k * kTokenWidth + 2, p) = (static_cast<double>(r) - rc) / rr_norm;
      }
    }
  }

  // 3 colour channels × (3 row bands × 4 column blocks) block averages.
  std::size_t stat = 0;
  for (std::size_t ch = 1; ch < kImageChannels; ++ch) {
    for (std::size_t band = 0; band < 3; ++band) {
      for (std::size_t blk = 0; blk < 4; ++blk, ++stat) {
        const std::size_t r0 = band * S / 3, r1 = (band + 1) * S / 3;
        const std::size_t c0 = blk * S / 4, c1 = (blk + 1) * S / 4;
        const double wgt = 1.0 / std::sqrt(static_cast<double>((r1 - r0) * (c1 - c0)));
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t c = c0; c < c1; ++c) enc(colour_slot(stat), pixel(ch, r, c)) = wgt;
      }
    }
  }

  std::size_t outside = 0;
  for (std::size_t r = 0; r < S; ++r)
    for (std::size_t c = 0; c < S; ++c)
      if (!layout.in_any_window(r, c)) ++outside;
  const double wgt = 1.0 / std::sqrt(static_cast<double>(outside));
  for (std::size_t r = 0; r < S; ++r)
    for (std::size_t c = 0; c < S; ++c)
      if (!layout.in_any_window(r, c)) enc(colour_slot(stat), pixel(kGeometryChannel, r, c)) = wgt;

  return LatentCodec(std::move(enc), {kImageChannels, S, S}, {kLatentSide, kLatentSide});
}

std::string to_ppm(const Tensor& img) {
  require_face_image(img, "to_ppm");
  const std::size_t size = img.shape()[1];
  std::ostringstream os;
  os << "P6\n" << size << ' ' << size << "\n255\n";
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double m = std::clamp(img(kGeometryChannel, r, c), 0.0, 1.0);
      for (std::size_t ch = 1; ch < kImageChannels; ++ch) {
        const double v = std::clamp(img(ch, r, c), 0.0, 1.0) * (1.0 - m) + m;
        os.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
  return os.str();
}

}  // namespace stylid
