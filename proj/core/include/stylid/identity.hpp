#pragma once

#include <functional>

#include "stylid/attention.hpp"
#include "stylid/attributes.hpp"
#include "stylid/tensor.hpp"

namespace stylid {

/// F_a: recovers the attribute vector of a face image from the landmark
/// centroids of its geometry channel. Exact (to rounding) on renders, and
/// independent of resolution. Values are clamped to [0, 1]; throws
/// ExtractionError when a landmark window carries no mass.
AttributeVector extract_attributes(const Tensor& img);

/// ||F_a(x) - F_a(i)||^2.
double attr_loss(const Tensor& x_img, const Tensor& i_img);

enum class ProjectionMode { kRerender, kOptimize };

/// P with fixed reference attributes: F_a(apply(X)) == reference for all X.
struct Projector {
  AttributeVector reference;
  ProjectionMode mode = ProjectionMode::kRerender;
  // Convergence target for the optimize mode (max abs attribute error).
  double tolerance = 1e-4;

  Tensor apply(const Tensor& x_img) const;
};

/// Restores `target` attributes while keeping every colour channel of X.
/// Re-render mode redraws the geometry channel; optimize mode runs gradient
/// descent on attr_loss over the landmark-window pixels. If X already carries
/// the target (max abs error <= 1e-12) it is returned unchanged, so
/// project(I, F_a(I)) == I bitwise. Throws ProjectionError for targets
/// outside [0, 1].
Tensor project(const Tensor& x_img, const AttributeVector& target, ProjectionMode mode = ProjectionMode::kRerender,
               double tolerance = 1e-4);

using ImageOperator = std::function<Tensor(const Tensor&)>;

struct CompositionReport {
  double loss_ps = 0.0;  // L_attr(P(S(I)))
  double loss_sp = 0.0;  // L_attr(S(P(I)))
  bool holds = false;    // loss_ps <= loss_sp
};

/// Compares both application orders of a style operator and a projector
/// whose reference is F_a(I).
CompositionReport verify_composition(const Tensor& i_img, const ImageOperator& style_op, const Projector& projector);

/// Cosine similarity u·v / (|u| |v|). Throws InputError for zero vectors or
/// mismatched lengths.
double ffc(const Tensor& u, const Tensor& v);

/// Embedding of an attribute vector used for toy FFC scores and as the
/// attention identity code: [2a - 1; 1], length kAttributeCount + 1. The
/// constant entry keeps it nonzero.
Tensor face_embedding(const AttributeVector& a);
IdentityEmbedding identity_embedding(const AttributeVector& a);

inline constexpr std::size_t kFaceEmbeddingDim = kAttributeCount + 1;

}  // namespace stylid
