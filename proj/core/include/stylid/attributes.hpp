#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "stylid/tensor.hpp"

namespace stylid {

inline constexpr std::size_t kAttributeCount = 6;

enum class Attribute : std::size_t {
  kEyeSpacing = 0,
  kEyeSize,
  kNoseLength,
  kMouthWidth,
  kMouthCurvature,
  kFaceRadius,
};

std::string_view attribute_name(std::size_t index);

/// Normalized facial parameters, every component in [0, 1].
struct AttributeVector {
  std::array<double, kAttributeCount> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](Attribute a) { return values[static_cast<std::size_t>(a)]; }
  double operator[](Attribute a) const { return values[static_cast<std::size_t>(a)]; }

  bool in_range() const noexcept;
  Tensor as_tensor() const;
  static AttributeVector from_tensor(const Tensor& t);

  bool operator==(const AttributeVector&) const = default;
};

double squared_distance(const AttributeVector& a, const AttributeVector& b);
double max_abs_diff(const AttributeVector& a, const AttributeVector& b);

}  // namespace stylid
