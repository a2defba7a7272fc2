#pragma once

#include "stylid/tensor.hpp"

namespace stylid {

/// Linear latent codec with orthonormal encoder rows; the decoder is the
/// encoder's transpose, so encode(decode(z)) == z and decode(encode(x)) is the
/// orthogonal projection of x onto the row space.
class LatentCodec {
 public:
  /// `encoder` is z×n with orthonormal rows (checked to 1e-9). Images of
  /// `image_shape` (volume n) map to latents of `latent_shape` (volume z).
  LatentCodec(Tensor encoder, Shape image_shape, Shape latent_shape);

  const Tensor& encoder() const noexcept { return enc_; }
  const Tensor& decoder() const noexcept { return dec_; }
  const Shape& image_shape() const noexcept { return image_shape_; }
  const Shape& latent_shape() const noexcept { return latent_shape_; }
  std::size_t input_dim() const noexcept { return enc_.shape()[1]; }
  std::size_t latent_dim() const noexcept { return enc_.shape()[0]; }

 private:
  Tensor enc_;
  Tensor dec_;
  Shape image_shape_;
  Shape latent_shape_;
};

Tensor encode(const Tensor& img, const LatentCodec& codec);
Tensor decode(const Tensor& z, const LatentCodec& codec);

}  // namespace stylid
