#include "stylid/attention.hpp"

#include <cmath>
#include <string>

#include "stylid/error.hpp"

namespace stylid {

namespace {

void require_tokens(const Tensor& tokens, std::size_t dim, const char* what) {
  if (tokens.rank() != 2 || tokens.cols() != dim) {
    throw ShapeError(std::string(what) + ": tokens " + shape_string(tokens.shape()) +
                     " do not match projection input dimension " + std::to_string(dim));
  }
}

void require_identity(const IdentityEmbedding& id, const ExtendedAttentionWeights& w) {
  if (id.dim() != w.identity_dim()) {
    throw ShapeError("identity embedding of length " + std::to_string(id.dim()) +
                     " does not match identity weights " + shape_string(w.u_q.shape()));
  }
}

Tensor identity_bias(const IdentityEmbedding& id, const Tensor& u) {
  return matmul(id.values.reshaped({1, id.dim()}), u);
}

}  // namespace

void AttentionWeights::validate() const {
  if (w_q.rank() != 2 || w_k.rank() != 2 || w_v.rank() != 2) throw ShapeError("attention weights must be matrices");
  if (w_q.cols() != w_k.cols() || w_q.cols() != w_v.cols()) {
    throw ShapeError("attention projections must share the head dimension: " + shape_string(w_q.shape()) + ", " +
                     shape_string(w_k.shape()) + ", " + shape_string(w_v.shape()));
  }
}

AttentionWeights AttentionWeights::zeros(std::size_t model_dim, std::size_t head_dim) {
  return {Tensor({model_dim, head_dim}), Tensor({model_dim, head_dim}), Tensor({model_dim, head_dim})};
}

AttentionWeights AttentionWeights::random(std::size_t model_dim, std::size_t head_dim, RngStream& rng, double scale) {
  return {gaussian(rng, {model_dim, head_dim}) * scale, gaussian(rng, {model_dim, head_dim}) * scale,
          gaussian(rng, {model_dim, head_dim}) * scale};
}

void ExtendedAttentionWeights::validate() const {
  base.validate();
  if (u_q.rank() != 2 || u_k.rank() != 2 || u_q.shape() != u_k.shape() || u_q.cols() != base.head_dim()) {
    throw ShapeError("identity blocks " + shape_string(u_q.shape()) + ", " + shape_string(u_k.shape()) +
                     " must be d_id x " + std::to_string(base.head_dim()));
  }
}

ExtendedAttentionWeights ExtendedAttentionWeights::from_base(AttentionWeights base, std::size_t identity_dim) {
  const std::size_t d = base.head_dim();
  return {std::move(base), Tensor({identity_dim, d}), Tensor({identity_dim, d})};
}

AttentionTrace attend(Tensor queries, Tensor keys, Tensor values) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
  Tensor logits = matmul(queries, transpose(keys));
  logits *= scale;
  Tensor probs = softmax_rows(logits);
  Tensor output = matmul(probs, values);
  return {std::move(queries), std::move(keys), std::move(values), std::move(probs), std::move(output)};
}

AttentionGrads attend_backward(const AttentionTrace& tr, const Tensor& d_output) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(tr.queries.cols()));
  Tensor d_values = matmul(transpose(tr.probs), d_output);
  Tensor d_probs = matmul(d_output, transpose(tr.values));
  Tensor d_logits(tr.probs.shape());
  const std::size_t n = tr.probs.rows(), m = tr.probs.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < m; ++j) inner += d_probs(i, j) * tr.probs(i, j);
    for (std::size_t j = 0; j < m; ++j) d_logits(i, j) = tr.probs(i, j) * (d_probs(i, j) - inner) * scale;
  }
  Tensor d_queries = matmul(d_logits, tr.keys);
  Tensor d_keys = matmul(transpose(d_logits), tr.queries);
  return {std::move(d_queries), std::move(d_keys), std::move(d_values)};
}

Tensor identity_queries(const Tensor& tokens, const IdentityEmbedding& id, const ExtendedAttentionWeights& w) {
  return add_row(matmul(tokens, w.base.w_q), identity_bias(id, w.u_q));
}

Tensor identity_keys(const Tensor& tokens, const IdentityEmbedding& id, const ExtendedAttentionWeights& w) {
  return add_row(matmul(tokens, w.base.w_k), identity_bias(id, w.u_k));
}

Tensor self_attention(const Tensor& tokens, const AttentionWeights& w) {
  w.validate();
  require_tokens(tokens, w.model_dim(), "self_attention");
  return attend(matmul(tokens, w.w_q), matmul(tokens, w.w_k), matmul(tokens, w.w_v)).output;
}

Tensor identity_self_attention(const Tensor& tokens, const IdentityEmbedding& id, const ExtendedAttentionWeights& w) {
  w.validate();
  require_tokens(tokens, w.base.model_dim(), "identity_self_attention");
  require_identity(id, w);
  return attend(identity_queries(tokens, id, w), identity_keys(tokens, id, w), matmul(tokens, w.base.w_v)).output;
}

Tensor cross_attention(const Tensor& tokens, const Tensor& cond_tokens, const AttentionWeights& w) {
  w.validate();
  if (w.w_k.rows() != w.w_v.rows()) throw ShapeError("cross_attention: key and value maps must share input dimension");
  require_tokens(tokens, w.w_q.rows(), "cross_attention");
  require_tokens(cond_tokens, w.w_k.rows(), "cross_attention (conditioning)");
  return attend(matmul(tokens, w.w_q), matmul(cond_tokens, w.w_k), matmul(cond_tokens, w.w_v)).output;
}

Tensor attention_map(const Tensor& tokens, const AttentionWeights& w) {
  w.validate();
  require_tokens(tokens, w.model_dim(), "attention_map");
  const Tensor q = matmul(tokens, w.w_q), k = matmul(tokens, w.w_k);
  Tensor logits = matmul(q, transpose(k)) * (1.0 / std::sqrt(static_cast<double>(w.head_dim())));
  return softmax_rows(logits);
}

Tensor attention_map(const Tensor& tokens, const IdentityEmbedding& id, const ExtendedAttentionWeights& w) {
  w.validate();
  require_tokens(tokens, w.base.model_dim(), "attention_map");
  require_identity(id, w);
  const Tensor q = identity_queries(tokens, id, w), k = identity_keys(tokens, id, w);
  Tensor logits = matmul(q, transpose(k)) * (1.0 / std::sqrt(static_cast<double>(w.base.head_dim())));
  return softmax_rows(logits);
}

double face_attention_mass(const Tensor& attention, std::size_t face_tokens) {
  if (attention.rank() != 2 || face_tokens > attention.cols()) throw ShapeError("face_attention_mass: bad shapes");
  double total = 0.0;
  for (std::size_t i = 0; i < attention.rows(); ++i)
    for (std::size_t j = 0; j < face_tokens; ++j) total += attention(i, j);
  return total / static_cast<double>(attention.rows());
}

}  // namespace stylid
