#pragma once

#include <array>
#include <cstddef>

#include "stylid/attributes.hpp"
#include "stylid/tensor.hpp"

namespace stylid {

// Image layout shared by the renderer, style operator, codec and extractor:
// a {4, S, S} tensor whose channel 0 holds landmark geometry and channels
// 1..3 hold RGB colour in [0, 1].
inline constexpr std::size_t kImageChannels = 4;
inline constexpr std::size_t kGeometryChannel = 0;
inline constexpr std::size_t kMinImageSize = 32;

inline constexpr std::size_t kLandmarkCount = 9;
inline constexpr double kLandmarkMass = 4.0;

enum class Landmark : std::size_t {
  kLeftEyeUpper = 0,
  kLeftEyeLower,
  kRightEyeUpper,
  kRightEyeLower,
  kNoseTip,
  kMouthLeft,
  kMouthCenter,
  kMouthRight,
  kChin,
};

struct Point {
  double u = 0.0;  // horizontal, normalized to [0, 1]
  double v = 0.0;  // vertical, normalized to [0, 1]
};

/// Normalized landmark positions of a face with the given attributes.
std::array<Point, kLandmarkCount> landmark_positions(const AttributeVector& attrs);

/// Inverse of landmark_positions on the affine map's image. Redundant
/// landmarks (both eyes) are averaged.
AttributeVector attributes_from_landmarks(const std::array<Point, kLandmarkCount>& points);

/// Inclusive pixel rectangle.
struct PixelWindow {
  std::size_t row0, row1, col0, col1;
  std::size_t height() const noexcept { return row1 - row0 + 1; }
  std::size_t width() const noexcept { return col1 - col0 + 1; }
  std::size_t area() const noexcept { return height() * width(); }
  bool contains(std::size_t r, std::size_t c) const noexcept {
    return r >= row0 && r <= row1 && c >= col0 && c <= col1;
  }
};

/// Search windows per landmark for an S×S image. Each window covers the
/// bilinear footprint of its landmark for every attribute vector in [0,1]^6,
/// and windows are pairwise disjoint for S >= kMinImageSize.
class LandmarkLayout {
 public:
  explicit LandmarkLayout(std::size_t size);

  std::size_t size() const noexcept { return size_; }
  const PixelWindow& window(std::size_t landmark) const { return windows_.at(landmark); }
  const std::array<PixelWindow, kLandmarkCount>& windows() const noexcept { return windows_; }
  bool in_any_window(std::size_t r, std::size_t c) const noexcept;

 private:
  std::size_t size_;
  std::array<PixelWindow, kLandmarkCount> windows_;
};

/// Writes the geometry channel of `img` for the given attributes: every
/// landmark is splatted bilinearly with total mass kLandmarkMass, all other
/// geometry pixels are zero. Colour channels are untouched.
void draw_geometry(Tensor& img, const AttributeVector& attrs);

struct GeometryMeasurement {
  std::array<Point, kLandmarkCount> centroids{};
  std::array<double, kLandmarkCount> masses{};
};

/// First-moment centroids of the geometry channel inside each landmark
/// window. Throws ExtractionError if any window's mass is below a quarter of
/// kLandmarkMass.
GeometryMeasurement measure_geometry(const Tensor& img);

void require_face_image(const Tensor& img, const char* what);

}  // namespace stylid
