#pragma once

#include <cstddef>
#include <vector>

#include "stylid/rng.hpp"
#include "stylid/tensor.hpp"

namespace stylid {

enum class Activation { kSoftplus, kIdentity };

/// Per-position affine map followed by a pointwise nonlinearity:
/// F_out = act(W · F_in + b·1^T), with F laid out channels × positions.
struct FeatureLayer {
  Tensor weight;  // c_out × c_in
  Tensor bias;    // c_out
  Activation activation = Activation::kSoftplus;
};

/// Fixed (seeded, never trained) smooth feature network phi.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(std::vector<FeatureLayer> layers);

  /// Softplus layers with the given channel widths; widths[0] is the input
  /// channel count.
  static FeatureExtractor random(const std::vector<std::size_t>& widths, RngStream& rng, double scale = 0.5);
  /// A single identity-activation layer with W = I, b = 0.
  static FeatureExtractor identity(std::size_t channels);

  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t input_channels() const { return layers_.front().weight.cols(); }
  const FeatureLayer& layer(std::size_t i) const { return layers_.at(i); }

  /// Features of every layer for an image. Images are either c×p matrices
  /// or {c, h, w} / {h, w} tensors (the latter read as one channel).
  std::vector<Tensor> features(const Tensor& img) const;

 private:
  std::vector<FeatureLayer> layers_;
};

/// G = F·F^T over positions; not normalized.
Tensor gram(const Tensor& features);

struct StyleLossConfig {
  double lambda_c = 1.0;
  double lambda_s = 1.0;
  std::size_t content_layer = 0;

  void validate() const;
};

/// sum_l ||G(phi_l(x)) - G(phi_l(s))||_F^2 over every layer, unit weights.
double style_loss(const Tensor& x, const Tensor& s, const FeatureExtractor& phi);

/// ||phi_l(x) - phi_l(c)||^2 at one layer. Throws ConfigError for a bad index.
double content_loss(const Tensor& x, const Tensor& c_img, const FeatureExtractor& phi, std::size_t layer);

double total_loss(const Tensor& x, const Tensor& c_img, const Tensor& s, const StyleLossConfig& cfg,
                  const FeatureExtractor& phi);

/// Analytic dL_total/dx by reverse-mode chain rule through phi and the Gram
/// matrices. Same shape as x.
Tensor total_loss_grad(const Tensor& x, const Tensor& c_img, const Tensor& s, const StyleLossConfig& cfg,
                       const FeatureExtractor& phi);

}  // namespace stylid
