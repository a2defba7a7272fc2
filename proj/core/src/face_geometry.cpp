#include "stylid/face_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stylid/error.hpp"

namespace stylid {

namespace {

constexpr std::array<std::string_view, kAttributeCount> kAttributeNames = {
    "eye_spacing", "eye_size", "nose_length", "mouth_width", "mouth_curvature", "face_radius"};

// Affine landmark model. Each landmark coordinate depends on at most one
// attribute, which keeps the inverse exact and the windows easy to bound.
constexpr double kEyeLine = 0.38;
constexpr double kEyeOffsetBase = 0.12, kEyeOffsetGain = 0.08;
constexpr double kEyeHalfBase = 0.03, kEyeHalfGain = 0.04;
constexpr double kNoseBase = 0.50, kNoseGain = 0.10;
constexpr double kMouthLine = 0.72;
constexpr double kMouthHalfBase = 0.08, kMouthHalfGain = 0.08;
constexpr double kCurveGain = 0.06;
constexpr double kChinBase = 0.84, kChinGain = 0.10;

}  // namespace

std::string_view attribute_name(std::size_t index) { return kAttributeNames.at(index); }

bool AttributeVector::in_range() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

Tensor AttributeVector::as_tensor() const { return Tensor::vector({values.begin(), values.end()}); }

AttributeVector AttributeVector::from_tensor(const Tensor& t) {
  if (t.size() != kAttributeCount) {
    throw ShapeError("attribute vector needs " + std::to_string(kAttributeCount) + " entries, got " +
                     shape_string(t.shape()));
  }
  AttributeVector a;
  for (std::size_t i = 0; i < kAttributeCount; ++i) a.values[i] = t[i];
  return a;
}

double squared_distance(const AttributeVector& a, const AttributeVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kAttributeCount; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double max_abs_diff(const AttributeVector& a, const AttributeVector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < kAttributeCount; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::array<Point, kLandmarkCount> landmark_positions(const AttributeVector& a) {
  const double dx = kEyeOffsetBase + kEyeOffsetGain * a[Attribute::kEyeSpacing];
  const double h = kEyeHalfBase + kEyeHalfGain * a[Attribute::kEyeSize];
  const double w = kMouthHalfBase + kMouthHalfGain * a[Attribute::kMouthWidth];
  return {{
      {0.5 - dx, kEyeLine - h},
      {0.5 - dx, kEyeLine + h},
      {0.5 + dx, kEyeLine - h},
      {0.5 + dx, kEyeLine + h},
      {0.5, kNoseBase + kNoseGain * a[Attribute::kNoseLength]},
      {0.5 - w, kMouthLine},
      {0.5, kMouthLine + kCurveGain * (a[Attribute::kMouthCurvature] - 0.5)},
      {0.5 + w, kMouthLine},
      {0.5, kChinBase + kChinGain * a[Attribute::kFaceRadius]},
  }};
}

AttributeVector attributes_from_landmarks(const std::array<Point, kLandmarkCount>& p) {
  auto at = [&p](Landmark l) { return p[static_cast<std::size_t>(l)]; };
  const double dx = ((0.5 - at(Landmark::kLeftEyeUpper).u) + (0.5 - at(Landmark::kLeftEyeLower).u) +
                     (at(Landmark::kRightEyeUpper).u - 0.5) + (at(Landmark::kRightEyeLower).u - 0.5)) /
                    4.0;
  const double h = ((at(Landmark::kLeftEyeLower).v - at(Landmark::kLeftEyeUpper).v) +
                    (at(Landmark::kRightEyeLower).v - at(Landmark::kRightEyeUpper).v)) /
                   4.0;
  const double w = (at(Landmark::kMouthRight).u - at(Landmark::kMouthLeft).u) / 2.0;
  const double corners = (at(Landmark::kMouthLeft).v + at(Landmark::kMouthRight).v) / 2.0;

  AttributeVector a;
  a[Attribute::kEyeSpacing] = (dx - kEyeOffsetBase) / kEyeOffsetGain;
  a[Attribute::kEyeSize] = (h - kEyeHalfBase) / kEyeHalfGain;
  a[Attribute::kNoseLength] = (at(Landmark::kNoseTip).v - kNoseBase) / kNoseGain;
  a[Attribute::kMouthWidth] = (w - kMouthHalfBase) / kMouthHalfGain;
  a[Attribute::kMouthCurvature] = (at(Landmark::kMouthCenter).v - corners) / kCurveGain + 0.5;
  a[Attribute::kFaceRadius] = (at(Landmark::kChin).v - kChinBase) / kChinGain;
  return a;
}

namespace {

inline double to_pixel(double normalized, std::size_t size) { return normalized * static_cast<double>(size) - 0.5; }

}  // namespace

LandmarkLayout::LandmarkLayout(std::size_t size) : size_(size) {
  if (size < kMinImageSize) {
    throw ConfigError("face images must be at least " + std::to_string(kMinImageSize) + " pixels, got " +
                      std::to_string(size));
  }
  AttributeVector lo, hi;
  lo.values.fill(0.0);
  hi.values.fill(1.0);
  const auto p0 = landmark_positions(lo);
  const auto p1 = landmark_positions(hi);
  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    const double umin = std::min(p0[k].u, p1[k].u), umax = std::max(p0[k].u, p1[k].u);
    const double vmin = std::min(p0[k].v, p1[k].v), vmax = std::max(p0[k].v, p1[k].v);
    const auto c0 = static_cast<std::size_t>(std::floor(to_pixel(umin, size)));
    const auto c1 = static_cast<std::size_t>(std::floor(to_pixel(umax, size))) + 1;
    const auto r0 = static_cast<std::size_t>(std::floor(to_pixel(vmin, size)));
    const auto r1 = static_cast<std::size_t>(std::floor(to_pixel(vmax, size))) + 1;
    if (c1 >= size || r1 >= size) throw ConfigError("landmark window exceeds image bounds");
    windows_[k] = PixelWindow{r0, r1, c0, c1};
  }
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    for (std::size_t j = i + 1; j < kLandmarkCount; ++j) {
      const auto& a = windows_[i];
      const auto& b = windows_[j];
      const bool disjoint = a.row1 < b.row0 || b.row1 < a.row0 || a.col1 < b.col0 || b.col1 < a.col0;
      if (!disjoint) throw ConfigError("landmark windows overlap at size " + std::to_string(size));
    }
  }
}

bool LandmarkLayout::in_any_window(std::size_t r, std::size_t c) const noexcept {
  return std::any_of(windows_.begin(), windows_.end(), [&](const PixelWindow& w) { return w.contains(r, c); });
}

void require_face_image(const Tensor& img, const char* what) {
  const auto& s = img.shape();
  if (s.size() != 3 || s[0] != kImageChannels || s[1] != s[2]) {
    throw ShapeError(std::string(what) + ": expected a {4, S, S} face image, got " + shape_string(s));
  }
}

void draw_geometry(Tensor& img, const AttributeVector& attrs) {
  require_face_image(img, "draw_geometry");
  const std::size_t size = img.shape()[1];
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) img(kGeometryChannel, r, c) = 0.0;
  for (const Point& p : landmark_positions(attrs)) {
    const double px = to_pixel(p.u, size), py = to_pixel(p.v, size);
    const double fx0 = std::floor(px), fy0 = std::floor(py);
    const double fx = px - fx0, fy = py - fy0;
    const auto c0 = static_cast<std::size_t>(fx0), r0 = static_cast<std::size_t>(fy0);
    img(kGeometryChannel, r0, c0) += kLandmarkMass * (1.0 - fx) * (1.0 - fy);
    img(kGeometryChannel, r0, c0 + 1) += kLandmarkMass * fx * (1.0 - fy);
    img(kGeometryChannel, r0 + 1, c0) += kLandmarkMass * (1.0 - fx) * fy;
    img(kGeometryChannel, r0 + 1, c0 + 1) += kLandmarkMass * fx * fy;
  }
}

GeometryMeasurement measure_geometry(const Tensor& img) {
  require_face_image(img, "measure_geometry");
  const std::size_t size = img.shape()[1];
  const LandmarkLayout layout(size);
  GeometryMeasurement m;
  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    const auto& w = layout.window(k);
    double mass = 0.0, mr = 0.0, mc = 0.0;
    for (std::size_t r = w.row0; r <= w.row1; ++r) {
      for (std::size_t c = w.col0; c <= w.col1; ++c) {
        const double g = img(kGeometryChannel, r, c);
        mass += g;
        mr += g * static_cast<double>(r);
        mc += g * static_cast<double>(c);
      }
    }
    if (!(mass >= 0.25 * kLandmarkMass)) {
      throw ExtractionError("no detectable landmark " + std::to_string(k) + " (window mass " +
                            std::to_string(mass) + ")");
    }
    m.masses[k] = mass;
    m.centroids[k] = Point{(mc / mass + 0.5) / static_cast<double>(size), (mr / mass + 0.5) / static_cast<double>(size)};
  }
  return m;
}

}  // namespace stylid
