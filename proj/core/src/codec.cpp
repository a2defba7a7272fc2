#include "stylid/codec.hpp"

#include <cmath>

#include "stylid/error.hpp"

namespace stylid {

LatentCodec::LatentCodec(Tensor encoder, Shape image_shape, Shape latent_shape)
    : enc_(std::move(encoder)), image_shape_(std::move(image_shape)), latent_shape_(std::move(latent_shape)) {
  if (enc_.rank() != 2) throw ShapeError("codec encoder must be a matrix");
  const std::size_t z = enc_.rows(), n = enc_.cols();
  if (z > n) throw ShapeError("codec latent dimension exceeds input dimension");
  if (shape_volume(image_shape_) != n || shape_volume(latent_shape_) != z) {
    throw ShapeError("codec shapes " + shape_string(image_shape_) + " -> " + shape_string(latent_shape_) +
                     " do not match encoder " + shape_string(enc_.shape()));
  }
  dec_ = transpose(enc_);
  const Tensor gram = matmul(enc_, dec_);
  for (std::size_t i = 0; i < z; ++i) {
    for (std::size_t j = 0; j < z; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(gram(i, j) - want) > 1e-9) throw ConfigError("codec encoder rows are not orthonormal");
    }
  }
}

Tensor encode(const Tensor& img, const LatentCodec& codec) {
  if (img.size() != codec.input_dim()) {
    throw ShapeError("encode: image " + shape_string(img.shape()) + " does not match codec input of " +
                     std::to_string(codec.input_dim()));
  }
  const Tensor flat = img.reshaped({codec.input_dim(), 1});
  return matmul(codec.encoder(), flat).reshaped(codec.latent_shape());
}

Tensor decode(const Tensor& z, const LatentCodec& codec) {
  if (z.size() != codec.latent_dim()) {
    throw ShapeError("decode: latent " + shape_string(z.shape()) + " does not match codec latent of " +
                     std::to_string(codec.latent_dim()));
  }
  const Tensor flat = z.reshaped({codec.latent_dim(), 1});
  return matmul(codec.decoder(), flat).reshaped(codec.image_shape());
}

}  // namespace stylid
