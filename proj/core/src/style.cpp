#include "stylid/style.hpp"

#include <cmath>
#include <string>

#include "stylid/error.hpp"

namespace stylid {

namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

Tensor as_channels(const Tensor& img, std::size_t channels) {
  Tensor m;
  if (img.rank() == 2 && img.rows() == channels) {
    m = img;
  } else if (img.rank() == 3) {
    m = img.reshaped({img.shape()[0], img.shape()[1] * img.shape()[2]});
  } else if (img.rank() == 2 && channels == 1) {
    m = img.reshaped({1, img.size()});
  } else {
    m = img.reshaped({channels, img.size() / channels});
  }
  if (m.rows() != channels) {
    throw ShapeError("feature extractor expects " + std::to_string(channels) + " channels, got image " +
                     shape_string(img.shape()));
  }
  return m;
}

struct LayerTrace {
  Tensor pre;   // W·F + b
  Tensor post;  // act(pre)
};

std::vector<LayerTrace> run(const std::vector<FeatureLayer>& layers, const Tensor& input) {
  std::vector<LayerTrace> out;
  out.reserve(layers.size());
  Tensor cur = input;
  for (const auto& layer : layers) {
    Tensor pre = matmul(layer.weight, cur);
    for (std::size_t i = 0; i < pre.rows(); ++i)
      for (std::size_t j = 0; j < pre.cols(); ++j) pre(i, j) += layer.bias[i];
    Tensor post = pre;
    if (layer.activation == Activation::kSoftplus) {
      for (auto& v : post.values()) v = softplus(v);
    }
    cur = post;
    out.push_back({std::move(pre), std::move(post)});
  }
  return out;
}

}  // namespace

FeatureExtractor::FeatureExtractor(std::vector<FeatureLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("feature extractor needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rank() != 2 || l.bias.size() != l.weight.rows()) throw ShapeError("malformed feature layer");
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows()) {
      throw ShapeError("feature layer " + std::to_string(i) + " input does not match previous output");
    }
  }
}

FeatureExtractor FeatureExtractor::random(const std::vector<std::size_t>& widths, RngStream& rng, double scale) {
  if (widths.size() < 2) throw ConfigError("random extractor needs input and at least one layer width");
  std::vector<FeatureLayer> layers;
  for (std::size_t i = 1; i < widths.size(); ++i) {
    const double s = scale / std::sqrt(static_cast<double>(widths[i - 1]));
    layers.push_back({gaussian(rng, {widths[i], widths[i - 1]}) * s, gaussian(rng, {widths[i]}) * 0.1,
                      Activation::kSoftplus});
  }
  return FeatureExtractor(std::move(layers));
}

FeatureExtractor FeatureExtractor::identity(std::size_t channels) {
  return FeatureExtractor({{Tensor::identity(channels), Tensor({channels}), Activation::kIdentity}});
}

std::vector<Tensor> FeatureExtractor::features(const Tensor& img) const {
  std::vector<Tensor> out;
  for (auto& tr : run(layers_, as_channels(img, input_channels()))) out.push_back(std::move(tr.post));
  return out;
}

Tensor gram(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("gram expects a channels x positions matrix");
  return matmul(features, transpose(features));
}

void StyleLossConfig::validate() const {
  if (!(lambda_c >= 0.0) || !(lambda_s >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

double style_loss(const Tensor& x, const Tensor& s, const FeatureExtractor& phi) {
  require_same_shape(x, s, "style_loss");
  const auto fx = phi.features(x), fs = phi.features(s);
  double total = 0.0;
  for (std::size_t l = 0; l < fx.size(); ++l) total += squared_norm(gram(fx[l]) - gram(fs[l]));
  return total;
}

double content_loss(const Tensor& x, const Tensor& c_img, const FeatureExtractor& phi, std::size_t layer) {
  if (layer >= phi.layer_count()) {
    throw ConfigError("content layer " + std::to_string(layer) + " out of range for " +
                      std::to_string(phi.layer_count()) + " layers");
  }
  require_same_shape(x, c_img, "content_loss");
  return squared_norm(phi.features(x)[layer] - phi.features(c_img)[layer]);
}

double total_loss(const Tensor& x, const Tensor& c_img, const Tensor& s, const StyleLossConfig& cfg,
                  const FeatureExtractor& phi) {
  cfg.validate();
  return cfg.lambda_c * content_loss(x, c_img, phi, cfg.content_layer) + cfg.lambda_s * style_loss(x, s, phi);
}

Tensor total_loss_grad(const Tensor& x, const Tensor& c_img, const Tensor& s, const StyleLossConfig& cfg,
                       const FeatureExtractor& phi) {
  cfg.validate();
  if (cfg.content_layer >= phi.layer_count()) throw ConfigError("content layer out of range");
  require_same_shape(x, c_img, "total_loss_grad");
  require_same_shape(x, s, "total_loss_grad");

  std::vector<FeatureLayer> layers;
  for (std::size_t i = 0; i < phi.layer_count(); ++i) layers.push_back(phi.layer(i));
  const Tensor input = as_channels(x, phi.input_channels());
  const auto tx = run(layers, input);
  const auto fc = phi.features(c_img);
  const auto fs = phi.features(s);

  // dL/dF_l from each layer's own terms.
  std::vector<Tensor> d_post(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor& f = tx[l].post;
    // d||G - Gs||^2 / dF = 4 (G - Gs) F for symmetric G.
    d_post[l] = matmul(gram(f) - gram(fs[l]), f) * (4.0 * cfg.lambda_s);
    if (l == cfg.content_layer) d_post[l] += (f - fc[l]) * (2.0 * cfg.lambda_c);
  }

  Tensor carry;  // dL/dF_l coming from layers above l
  for (std::size_t li = layers.size(); li-- > 0;) {
    Tensor d = d_post[li];
    if (!carry.empty()) d += carry;
    Tensor d_pre = d;
    if (layers[li].activation == Activation::kSoftplus) {
      for (std::size_t i = 0; i < d_pre.size(); ++i) d_pre[i] *= sigmoid(tx[li].pre[i]);
    }
    carry = matmul(transpose(layers[li].weight), d_pre);
  }
  return carry.reshaped(x.shape());
}

}  // namespace stylid
