#include "stylid/denoiser.hpp"

#include <cmath>
#include <string>

#include "stylid/error.hpp"

namespace stylid {

std::array<double, kTimeBasis> time_features(int t, int horizon) {
  const double tau = static_cast<double>(t) / static_cast<double>(horizon);
  return {1.0, tau, tau * tau};
}

DenoiserModel::DenoiserModel(DenoiserConfig config)
    : config_(config),
      attention_(ExtendedAttentionWeights::from_base(AttentionWeights::zeros(config.token_width, config.head_dim),
                                                     config.identity_dim)),
      cond_w_({config.cond_dim, config.token_width}),
      cond_b_({config.token_width}) {
  if (config.token_count == 0 || config.token_width == 0 || config.head_dim == 0 || config.cond_dim == 0 ||
      config.identity_dim == 0 || config.horizon < 1) {
    throw ConfigError("denoiser dimensions must be positive");
  }
  for (std::size_t k = 0; k < kTimeBasis; ++k) {
    head_w_[k] = Tensor({config.feature_size(), config.latent_size()});
    head_b_[k] = Tensor({config.latent_size()});
  }
}

DenoiserModel DenoiserModel::random(const DenoiserConfig& config, RngStream& rng, double attention_scale) {
  DenoiserModel m(config);
  m.attention_.base = AttentionWeights::random(config.token_width, config.head_dim, rng, attention_scale);
  m.cond_w_ = gaussian(rng, {config.cond_dim, config.token_width}) * 0.1;
  const double head_scale = 0.1 / std::sqrt(static_cast<double>(config.feature_size()));
  m.head_w_[0] = gaussian(rng, {config.feature_size(), config.latent_size()}) * head_scale;
  return m;
}

DenoiserModel DenoiserModel::with_identity(IdentityEmbedding id) const {
  if (id.dim() != config_.identity_dim) {
    throw ShapeError("identity embedding has length " + std::to_string(id.dim()) + ", model expects " +
                     std::to_string(config_.identity_dim));
  }
  DenoiserModel m = *this;
  m.identity_ = std::move(id);
  return m;
}

DenoiserModel DenoiserModel::without_identity() const {
  DenoiserModel m = *this;
  m.identity_.reset();
  return m;
}

Tensor DenoiserModel::tokens_with_cond(const Tensor& x_t, const Tensor& cond) const {
  if (x_t.size() != config_.latent_size()) {
    throw ShapeError("denoiser expects a latent of " + std::to_string(config_.latent_size()) + " values, got " +
                     shape_string(x_t.shape()));
  }
  if (cond.size() != config_.cond_dim) {
    throw ShapeError("denoiser expects conditioning of length " + std::to_string(config_.cond_dim) + ", got " +
                     shape_string(cond.shape()));
  }
  const Tensor tokens = x_t.reshaped({config_.token_count, config_.token_width});
  const Tensor c_tok = add_row(matmul(cond.reshaped({1, config_.cond_dim}), cond_w_), cond_b_);
  return add_row(tokens, c_tok);
}

namespace {

struct Forward {
  Tensor h;
  AttentionTrace trace;
  Tensor features;  // 1×F
  std::array<double, kTimeBasis> phi;
  Tensor eps;  // flat latent
};

}  // namespace

struct DenoiserBackprop {
  static Forward run(const DenoiserModel& m, const Tensor& x_t, int t, const Tensor& cond,
                     const std::optional<IdentityEmbedding>& id) {
    const auto& cfg = m.config_;
    Forward f;
    f.h = m.tokens_with_cond(x_t, cond);
    if (id) {
      f.trace = attend(identity_queries(f.h, *id, m.attention_), identity_keys(f.h, *id, m.attention_),
                       matmul(f.h, m.attention_.base.w_v));
    } else {
      f.trace = attend(matmul(f.h, m.attention_.base.w_q), matmul(f.h, m.attention_.base.w_k),
                       matmul(f.h, m.attention_.base.w_v));
    }
    const std::size_t na = cfg.token_count * cfg.head_dim;
    f.features = Tensor({1, cfg.feature_size()});
    for (std::size_t i = 0; i < na; ++i) f.features[i] = f.trace.output[i];
    for (std::size_t i = 0; i < f.h.size(); ++i) f.features[na + i] = f.h[i];

    f.phi = time_features(t, cfg.horizon);
    f.eps = Tensor({1, cfg.latent_size()});
    for (std::size_t k = 0; k < kTimeBasis; ++k) {
      if (f.phi[k] == 0.0) continue;
      Tensor part = add_row(matmul(f.features, m.head_w_[k]), m.head_b_[k]);
      f.eps += part * f.phi[k];
    }
    return f;
  }

  // Accumulates d(loss)/d(params) given d(loss)/d(eps) into grads.
  static void backward(const DenoiserModel& m, const Forward& f, const Tensor& cond,
                       const std::optional<IdentityEmbedding>& id, const Tensor& d_eps, std::vector<Tensor>& grads) {
    const auto& cfg = m.config_;
    Tensor d_features({1, cfg.feature_size()});
    for (std::size_t k = 0; k < kTimeBasis; ++k) {
      if (f.phi[k] == 0.0) continue;
      const Tensor scaled = d_eps * f.phi[k];
      grads[kParamHeadW0 + k] += matmul(transpose(f.features), scaled);
      grads[kParamHeadB0 + k] += scaled.reshaped({cfg.latent_size()});
      d_features += matmul(scaled, transpose(m.head_w_[k]));
    }
    const std::size_t na = cfg.token_count * cfg.head_dim;
    Tensor d_attn({cfg.token_count, cfg.head_dim});
    Tensor d_h({cfg.token_count, cfg.token_width});
    for (std::size_t i = 0; i < na; ++i) d_attn[i] = d_features[i];
    for (std::size_t i = 0; i < d_h.size(); ++i) d_h[i] = d_features[na + i];

    const AttentionGrads g = attend_backward(f.trace, d_attn);
    const auto& w = m.attention_;
    const Tensor h_t = transpose(f.h);
    grads[kParamWq] += matmul(h_t, g.d_queries);
    grads[kParamWk] += matmul(h_t, g.d_keys);
    grads[kParamWv] += matmul(h_t, g.d_values);
    if (id) {
      const Tensor id_col = id->values.reshaped({id->dim(), 1});
      grads[kParamUq] += matmul(id_col, column_sums(g.d_queries));
      grads[kParamUk] += matmul(id_col, column_sums(g.d_keys));
    }
    d_h += matmul(g.d_queries, transpose(w.base.w_q));
    d_h += matmul(g.d_keys, transpose(w.base.w_k));
    d_h += matmul(g.d_values, transpose(w.base.w_v));

    const Tensor d_ctok = column_sums(d_h);
    grads[kParamCondW] += matmul(cond.reshaped({cfg.cond_dim, 1}), d_ctok);
    grads[kParamCondB] += d_ctok.reshaped({cfg.token_width});
  }
};

Tensor DenoiserModel::predict_noise(const Tensor& x_t, int t, const Tensor& cond) const {
  return DenoiserBackprop::run(*this, x_t, t, cond, identity_).eps.reshaped(x_t.shape());
}

Tensor DenoiserModel::attention_map_for(const Tensor& x_t, const Tensor& cond) const {
  const Tensor h = tokens_with_cond(x_t, cond);
  return identity_ ? attention_map(h, *identity_, attention_) : attention_map(h, attention_.base);
}

std::vector<Tensor*> DenoiserModel::parameters() {
  std::vector<Tensor*> p = {&attention_.base.w_q, &attention_.base.w_k, &attention_.base.w_v,
                            &attention_.u_q,      &attention_.u_k,      &cond_w_,
                            &cond_b_};
  for (auto& w : head_w_) p.push_back(&w);
  for (auto& b : head_b_) p.push_back(&b);
  return p;
}

std::vector<const Tensor*> DenoiserModel::parameters() const {
  auto mut = const_cast<DenoiserModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

namespace {

const std::optional<IdentityEmbedding>& identity_for(const DenoiserModel& m, const TrainingExample& ex) {
  return ex.identity ? ex.identity : m.identity();
}

}  // namespace

double mean_noise_loss(const DenoiserModel& model, const std::vector<TrainingExample>& batch) {
  if (batch.empty()) throw ConfigError("empty training batch");
  double total = 0.0;
  for (const auto& ex : batch) {
    const Forward f = DenoiserBackprop::run(model, ex.latent, ex.step, ex.cond, identity_for(model, ex));
    double s = 0.0;
    for (std::size_t i = 0; i < f.eps.size(); ++i) {
      const double e = f.eps[i] - ex.target[i];
      s += e * e;
    }
    total += s / static_cast<double>(model.config().latent_size());
  }
  return total / static_cast<double>(batch.size());
}

DenoiserGradients noise_loss_gradients(const DenoiserModel& model, const std::vector<TrainingExample>& batch) {
  if (batch.empty()) throw ConfigError("empty training batch");
  DenoiserGradients out;
  for (const Tensor* p : model.parameters()) out.grads.emplace_back(p->shape());
  const double norm = 1.0 / static_cast<double>(model.config().latent_size() * batch.size());
  for (const auto& ex : batch) {
    if (ex.target.size() != model.config().latent_size()) throw ShapeError("training target has the wrong size");
    const auto& id = identity_for(model, ex);
    const Forward f = DenoiserBackprop::run(model, ex.latent, ex.step, ex.cond, id);
    Tensor d_eps({1, model.config().latent_size()});
    double s = 0.0;
    for (std::size_t i = 0; i < f.eps.size(); ++i) {
      const double e = f.eps[i] - ex.target[i];
      s += e * e;
      d_eps[i] = 2.0 * e * norm;
    }
    out.loss += s * norm;
    DenoiserBackprop::backward(model, f, ex.cond, id, d_eps, out.grads);
  }
  return out;
}

}  // namespace stylid
