#pragma once

#include <cstddef>

#include "stylid/rng.hpp"
#include "stylid/tensor.hpp"

namespace stylid {

/// Single-head projection weights, each d_model×d.
struct AttentionWeights {
  Tensor w_q, w_k, w_v;

  std::size_t model_dim() const { return w_q.rows(); }
  std::size_t head_dim() const { return w_q.cols(); }
  void validate() const;

  static AttentionWeights zeros(std::size_t model_dim, std::size_t head_dim);
  static AttentionWeights random(std::size_t model_dim, std::size_t head_dim, RngStream& rng, double scale);
};

/// Identity-augmented weights: the block matrices [W_q; U_q] and [W_k; U_k]
/// acting on [x; id]. U_q and U_k are d_id×d.
struct ExtendedAttentionWeights {
  AttentionWeights base;
  Tensor u_q, u_k;

  std::size_t identity_dim() const { return u_q.rows(); }
  void validate() const;

  static ExtendedAttentionWeights from_base(AttentionWeights base, std::size_t identity_dim);
};

/// Identity code shared by every token of an image (and by every image of
/// the same subject).
struct IdentityEmbedding {
  Tensor values;

  std::size_t dim() const noexcept { return values.size(); }
  static IdentityEmbedding zeros(std::size_t dim) { return {Tensor({dim})}; }
};

/// softmax(Q K^T / sqrt(d)) V with Q, K, V = tokens · W_{q,k,v}.
Tensor self_attention(const Tensor& tokens, const AttentionWeights& w);

/// Q' = tokens·W_q + 1·(id·U_q), K' = tokens·W_k + 1·(id·U_k), V unchanged.
/// Equal to multiplying each concatenated row [x; id] by the block weights.
Tensor identity_self_attention(const Tensor& tokens, const IdentityEmbedding& id, const ExtendedAttentionWeights& w);

/// Queries from `tokens` (W_q is d_model×d), keys and values from
/// `cond_tokens` (W_k, W_v are d_c×d).
Tensor cross_attention(const Tensor& tokens, const Tensor& cond_tokens, const AttentionWeights& w);

/// Post-softmax n×n attention matrix, without applying V.
Tensor attention_map(const Tensor& tokens, const AttentionWeights& w);
Tensor attention_map(const Tensor& tokens, const IdentityEmbedding& id, const ExtendedAttentionWeights& w);

/// Mean over query rows of the attention mass that lands on key columns
/// [0, face_tokens).
double face_attention_mass(const Tensor& attention, std::size_t face_tokens);

// Building blocks shared with the denoiser's backward pass.

struct AttentionTrace {
  Tensor queries, keys, values, probs, output;
};

AttentionTrace attend(Tensor queries, Tensor keys, Tensor values);

struct AttentionGrads {
  Tensor d_queries, d_keys, d_values;
};

AttentionGrads attend_backward(const AttentionTrace& trace, const Tensor& d_output);

/// Query and key projections with the identity rows folded in.
Tensor identity_queries(const Tensor& tokens, const IdentityEmbedding& id, const ExtendedAttentionWeights& w);
Tensor identity_keys(const Tensor& tokens, const IdentityEmbedding& id, const ExtendedAttentionWeights& w);

}  // namespace stylid
