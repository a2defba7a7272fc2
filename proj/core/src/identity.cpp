#include "stylid/identity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "stylid/error.hpp"
#include "stylid/face_geometry.hpp"

namespace stylid {

namespace {

constexpr double kAlreadyProjected = 1e-12;

AttributeVector raw_attributes(const Tensor& img) {
  return attributes_from_landmarks(measure_geometry(img).centroids);
}

// d(attribute i) / d(landmark coordinate j), coordinates ordered
// (u_0, v_0, u_1, v_1, ...). The landmark map is affine, so unit probes are
// exact up to rounding.
using LandmarkJacobian = std::array<std::array<double, 2 * kLandmarkCount>, kAttributeCount>;

const LandmarkJacobian& landmark_jacobian() {
  static const LandmarkJacobian jac = [] {
    LandmarkJacobian j{};
    std::array<Point, kLandmarkCount> base{};
    const AttributeVector a0 = attributes_from_landmarks(base);
    for (std::size_t c = 0; c < 2 * kLandmarkCount; ++c) {
      auto probe = base;
      (c % 2 == 0 ? probe[c / 2].u : probe[c / 2].v) = 1.0;
      const AttributeVector a1 = attributes_from_landmarks(probe);
      for (std::size_t i = 0; i < kAttributeCount; ++i) j[i][c] = a1[i] - a0[i];
    }
    return j;
  }();
  return jac;
}

Tensor optimize_geometry(const Tensor& x_img, const AttributeVector& target, double tolerance) {
  const std::size_t size = x_img.shape()[1];
  const LandmarkLayout layout(size);
  const double inv_size = 1.0 / static_cast<double>(size);
  const auto& jac = landmark_jacobian();

  Tensor img = x_img;
  auto residual = [&](const Tensor& candidate) {
    const AttributeVector a = raw_attributes(candidate);
    std::array<double, kAttributeCount> r{};
    for (std::size_t i = 0; i < kAttributeCount; ++i) r[i] = a[i] - target[i];
    return r;
  };
  auto loss_of = [](const std::array<double, kAttributeCount>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
  };
  auto max_err = [](const std::array<double, kAttributeCount>& r) {
    double m = 0.0;
    for (double v : r) m = std::max(m, std::abs(v));
    return m;
  };

  auto r = residual(img);
  double loss = loss_of(r);
  double lr = 0.5;
  for (int iter = 0; iter < 20000 && max_err(r) > 0.1 * tolerance; ++iter) {
    const GeometryMeasurement m = measure_geometry(img);
    // dL/d(landmark coordinate)
    std::array<double, 2 * kLandmarkCount> d_coord{};
    for (std::size_t c = 0; c < d_coord.size(); ++c)
      for (std::size_t i = 0; i < kAttributeCount; ++i) d_coord[c] += 2.0 * r[i] * jac[i][c];

    Tensor grad(img.shape());
    for (std::size_t k = 0; k < kLandmarkCount; ++k) {
      const auto& w = layout.window(k);
      const double cu = m.centroids[k].u * size - 0.5, cv = m.centroids[k].v * size - 0.5;
      for (std::size_t row = w.row0; row <= w.row1; ++row) {
        for (std::size_t col = w.col0; col <= w.col1; ++col) {
          const double du = (static_cast<double>(col) - cu) * inv_size / m.masses[k];
          const double dv = (static_cast<double>(row) - cv) * inv_size / m.masses[k];
          grad(kGeometryChannel, row, col) = d_coord[2 * k] * du + d_coord[2 * k + 1] * dv;
        }
      }
    }

    // Backtracking step: accept the first step size that lowers the loss.
    bool improved = false;
    for (int tries = 0; tries < 40; ++tries) {
      Tensor candidate = img;
      for (std::size_t i = 0; i < candidate.size(); ++i) candidate[i] -= lr * grad[i];
      const auto cr = residual(candidate);
      const double cl = loss_of(cr);
      if (cl < loss) {
        img = std::move(candidate);
        r = cr;
        loss = cl;
        lr *= 1.5;
        improved = true;
        break;
      }
      lr *= 0.5;
    }
    if (!improved) break;
  }
  if (max_err(r) > tolerance) {
    throw ProjectionError("optimization-based projection stalled at max attribute error " +
                          std::to_string(max_err(r)));
  }
  return img;
}

}  // namespace

AttributeVector extract_attributes(const Tensor& img) {
  AttributeVector a = raw_attributes(img);
  for (auto& v : a.values) {
    if (!std::isfinite(v)) throw ExtractionError("non-finite landmark measurement");
    v = std::clamp(v, 0.0, 1.0);
  }
  return a;
}

double attr_loss(const Tensor& x_img, const Tensor& i_img) {
  return squared_distance(extract_attributes(x_img), extract_attributes(i_img));
}

Tensor project(const Tensor& x_img, const AttributeVector& target, ProjectionMode mode, double tolerance) {
  require_face_image(x_img, "project");
  if (!target.in_range()) throw ProjectionError("projection target lies outside [0, 1]");
  try {
    if (max_abs_diff(extract_attributes(x_img), target) <= kAlreadyProjected) return x_img;
  } catch (const ExtractionError&) {
    if (mode == ProjectionMode::kOptimize) throw ProjectionError("optimize-mode projection needs visible landmarks");
  }
  if (mode == ProjectionMode::kOptimize) return optimize_geometry(x_img, target, tolerance);
  Tensor out = x_img;
  draw_geometry(out, target);
  return out;
}

Tensor Projector::apply(const Tensor& x_img) const { return project(x_img, reference, mode, tolerance); }

CompositionReport verify_composition(const Tensor& i_img, const ImageOperator& style_op, const Projector& projector) {
  CompositionReport rep;
  const Tensor ps = projector.apply(style_op(i_img));
  const Tensor sp = style_op(projector.apply(i_img));
  rep.loss_ps = attr_loss(ps, i_img);
  rep.loss_sp = attr_loss(sp, i_img);
  rep.holds = rep.loss_ps <= rep.loss_sp;
  return rep;
}

double ffc(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size()) {
    throw InputError("ffc: embeddings differ in length (" + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()) + ")");
  }
  const double nu = frobenius_norm(u), nv = frobenius_norm(v);
  if (nu == 0.0 || nv == 0.0) throw InputError("ffc: similarity is undefined for a zero vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

Tensor face_embedding(const AttributeVector& a) {
  std::vector<double> e(kFaceEmbeddingDim, 1.0);
  for (std::size_t i = 0; i < kAttributeCount; ++i) e[i] = 2.0 * a[i] - 1.0;
  return Tensor::vector(std::move(e));
}

IdentityEmbedding identity_embedding(const AttributeVector& a) { return {face_embedding(a)}; }

}  // namespace stylid
