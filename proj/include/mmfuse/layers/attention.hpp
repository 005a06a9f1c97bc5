#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmfuse/core/ops.hpp"
#include "mmfuse/core/parameter.hpp"

namespace mmfuse {

struct AttentionResult {
  Tensor output;   // same shape as the query input
  Tensor weights;  // [heads, Lq, Lk], or [B, heads, Lq, Lk] for batched input
};

namespace detail {

// [B, L, d] -> [B, h, L, d/h]
inline Tensor split_heads(const Tensor& x, std::size_t heads) {
  const auto& s = x.shape();
  return permute(reshape(x, {s[0], s[1], heads, s[2] / heads}), {0, 2, 1, 3});
}

// [B, h, L, dk] -> [B, L, h*dk]
inline Tensor merge_heads(const Tensor& x) {
  const auto& s = x.shape();
  return reshape(permute(x, {0, 2, 1, 3}), {s[0], s[2], s[1] * s[3]});
}

// Already-projected q [B, Lq, d], k/v [B, Lk, d]. Per head:
// softmax(q_h k_h^T / sqrt(d_k)) v_h, heads concatenated back to d.
inline AttentionResult scaled_dot_product(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads) {
  const std::size_t d = q.shape().back();
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d / heads));
  Tensor qh = split_heads(q, heads), kh = split_heads(k, heads), vh = split_heads(v, heads);
  Tensor w = softmax_last_axis(scale(matmul(qh, transpose(kh)), inv_scale));
  return {merge_heads(matmul(w, vh)), w};
}

}  // namespace detail

// Multi-head attention with bias-free Q/K/V projections and a biased output
// projection. Inputs are [L, d_model] or batched [B, L, d_model].
class MultiHeadAttention {
public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t d_model, std::size_t heads, Rng& rng) : heads_(heads) {
    if (heads == 0 || d_model % heads != 0)
      throw std::invalid_argument("MultiHeadAttention: heads (" + std::to_string(heads) + ") must divide d_model (" +
                                  std::to_string(d_model) + ")");
    w_q = init_uniform({d_model, d_model}, d_model, rng);
    w_k = init_uniform({d_model, d_model}, d_model, rng);
    w_v = init_uniform({d_model, d_model}, d_model, rng);
    w_o = init_uniform({d_model, d_model}, d_model, rng);
    b_o = init_uniform({d_model}, d_model, rng);
  }

  std::size_t d_model() const { return w_q.dim(0); }
  std::size_t heads() const { return heads_; }

  AttentionResult forward(const Tensor& query, const Tensor& key, const Tensor& value) const {
    for (const Tensor* t : {&query, &key, &value}) {
      if ((t->rank() != 2 && t->rank() != 3) || t->shape().back() != d_model())
        throw DimensionError("attention: input " + shape_str(t->shape()) + " vs d_model " + std::to_string(d_model()));
    }
    const bool batched = query.rank() == 3;
    auto lift = [&](const Tensor& t) { return batched ? t : reshape(t, {1, t.dim(0), t.dim(1)}); };
    auto r = detail::scaled_dot_product(matmul(lift(query), w_q), matmul(lift(key), w_k), matmul(lift(value), w_v), heads_);
    Tensor out = add(matmul(r.output, w_o), b_o);
    if (!batched) {
      out = reshape(out, query.shape());
      const auto& ws = r.weights.shape();
      r.weights = reshape(r.weights, {ws[1], ws[2], ws[3]});
    }
    return {out, r.weights};
  }

  void append_parameters(ParameterList& out, const std::string& prefix) const {
    out.push_back({join_name(prefix, "w_q"), w_q, true});
    out.push_back({join_name(prefix, "w_k"), w_k, true});
    out.push_back({join_name(prefix, "w_v"), w_v, true});
    out.push_back({join_name(prefix, "w_o"), w_o, true});
    out.push_back({join_name(prefix, "b_o"), b_o, false});
  }

  Tensor w_q, w_k, w_v, w_o, b_o;

private:
  std::size_t heads_ = 1;
};

inline AttentionResult attention(const Tensor& q, const Tensor& k, const Tensor& v, const MultiHeadAttention& mha) {
  return mha.forward(q, k, v);
}

// Temporal attention: self-attention along time within one modality, one
// projection set shared over all timesteps. x is [T, d] or [M, T, d] (each
// modality attended independently).
inline AttentionResult tma(const Tensor& x, const MultiHeadAttention& mha) { return mha.forward(x, x, x); }

// Multimodal attention: at every timestep, each modality's vector is projected
// by that modality's own W_Q/W_K/W_V, then attention runs across the M
// modalities. One output projection is shared by all modalities.
class MultimodalAttention {
public:
  MultimodalAttention() = default;
  MultimodalAttention(std::size_t modalities, std::size_t d_model, std::size_t heads, Rng& rng) : heads_(heads) {
    if (modalities == 0) throw std::invalid_argument("MultimodalAttention: need at least one modality");
    if (heads == 0 || d_model % heads != 0)
      throw std::invalid_argument("MultimodalAttention: heads must divide d_model");
    w_q = init_uniform({modalities, d_model, d_model}, d_model, rng);
    w_k = init_uniform({modalities, d_model, d_model}, d_model, rng);
    w_v = init_uniform({modalities, d_model, d_model}, d_model, rng);
    w_o = init_uniform({d_model, d_model}, d_model, rng);
    b_o = init_uniform({d_model}, d_model, rng);
  }

  std::size_t modalities() const { return w_q.dim(0); }
  std::size_t d_model() const { return w_q.dim(1); }
  std::size_t heads() const { return heads_; }

  // x [M, T, d] -> output [M, T, d], weights [T, heads, M, M].
  // A single timestep may be passed as [M, d]; weights are then [heads, M, M].
  AttentionResult forward(const Tensor& x) const {
    const bool single = x.rank() == 2;
    if ((x.rank() != 2 && x.rank() != 3) || x.dim(0) != modalities() || x.shape().back() != d_model())
      throw DimensionError("mma: input " + shape_str(x.shape()) + " but configured for " + std::to_string(modalities()) +
                           " modalities of width " + std::to_string(d_model()));
    Tensor xm = single ? reshape(x, {x.dim(0), 1, x.dim(1)}) : x;
    // Per-modality projections as one batched product over the modality axis.
    auto by_time = [](const Tensor& t) { return permute(t, {1, 0, 2}); };
    Tensor q = by_time(matmul(xm, w_q));
    Tensor k = by_time(matmul(xm, w_k));
    Tensor v = by_time(matmul(xm, w_v));
    auto r = detail::scaled_dot_product(q, k, v, heads_);
    Tensor out = permute(add(matmul(r.output, w_o), b_o), {1, 0, 2});
    if (single) {
      out = reshape(out, x.shape());
      const auto& ws = r.weights.shape();
      r.weights = reshape(r.weights, {ws[1], ws[2], ws[3]});
    }
    return {out, r.weights};
  }

  void append_parameters(ParameterList& out, const std::string& prefix) const {
    out.push_back({join_name(prefix, "w_q"), w_q, true});
    out.push_back({join_name(prefix, "w_k"), w_k, true});
    out.push_back({join_name(prefix, "w_v"), w_v, true});
    out.push_back({join_name(prefix, "w_o"), w_o, true});
    out.push_back({join_name(prefix, "b_o"), b_o, false});
  }

  Tensor w_q, w_k, w_v;  // [M, d, d]
  Tensor w_o, b_o;

private:
  std::size_t heads_ = 1;
};

inline AttentionResult mma(const Tensor& x, const MultimodalAttention& layer) { return layer.forward(x); }

}  // namespace mmfuse
