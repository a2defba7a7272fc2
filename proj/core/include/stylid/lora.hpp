#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stylid/attention.hpp"
#include "stylid/rng.hpp"
#include "stylid/tensor.hpp"

namespace stylid {

/// Low-rank update W~ = W + alpha·A·B with A d×r and B r×k.
struct LoRAAdapter {
  Tensor a;
  Tensor b;
  double alpha = 1.0;

  std::size_t rank() const { return a.cols(); }
  std::size_t in_dim() const { return a.rows(); }
  std::size_t out_dim() const { return b.cols(); }
  void validate() const;

  /// A ~ N(0, init_scale^2), B = 0, so the merged weight starts equal to W.
  static LoRAAdapter init(std::size_t in_dim, std::size_t out_dim, std::size_t rank, double alpha, RngStream& rng,
                          double init_scale = 0.1);

  Tensor delta() const;  // alpha·A·B
};

/// W + alpha·A·B. Throws ShapeError if the adapter does not fit W.
Tensor merge(const Tensor& w, const LoRAAdapter& adapter);

/// One optional adapter per attention projection.
struct AdapterSet {
  std::optional<LoRAAdapter> q, k, v;

  bool empty() const noexcept { return !q && !k && !v; }
};

AttentionWeights apply_to_attention(const AttentionWeights& w, const AdapterSet& adapters);
ExtendedAttentionWeights apply_to_attention(const ExtendedAttentionWeights& w, const AdapterSet& adapters);

/// Hyperparameters for adapter training. The library default rank/alpha are
/// desk-scale; rank 64 / alpha 128 are accepted as the full-scale setting.
struct LoraTrainConfig {
  std::size_t rank = 4;
  double alpha = 8.0;
  double lr = 0.05;
  int steps = 200;
  bool target_q = true, target_k = true, target_v = true;
  std::uint64_t seed = 0;
  double init_scale = 0.1;

  void validate() const;
};

/// Text serialization of an adapter set. One block per target:
///   adapter,<q|k|v>,<rank>,<alpha>
///   a,<rows>,<cols>,<values...>
///   b,<rows>,<cols>,<values...>
/// Values are written with 17 significant digits so reads are exact.
void write_adapters(std::ostream& os, const AdapterSet& adapters);
AdapterSet read_adapters(std::istream& is);

}  // namespace stylid
