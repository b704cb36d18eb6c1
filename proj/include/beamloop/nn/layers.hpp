// SPDX-License-Identifier: Apache-2.0
//
// Composite layers built from the primitive ops: multi-head attention,
// feed-forward blocks and the selective state-space mixer.
#pragma once

#include "beamloop/nn/conv.hpp"
#include "beamloop/nn/ops.hpp"

namespace beamloop::nn {

template <typename S>
struct MhaWeights {
  Tensor<S> wq, bq, wk, bk, wv, bv, wo, bo;
};

namespace detail {

template <typename S>
Tensor<S> split_heads(const Tensor<S>& x, std::size_t heads) {
  // [B,T,d] -> [B*h, T, d/h]
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  auto r = reshape(x, {b, t, heads, d / heads});
  auto p = permute(r, {0, 2, 1, 3});
  return reshape(p, {b * heads, t, d / heads});
}

template <typename S>
Tensor<S> merge_heads(const Tensor<S>& x, std::size_t batch, std::size_t heads) {
  // [B*h, T, dh] -> [B, T, d]
  const std::size_t t = x.dim(1), dh = x.dim(2);
  auto r = reshape(x, {batch, heads, t, dh});
  auto p = permute(r, {0, 2, 1, 3});
  return reshape(p, {batch, t, heads * dh});
}

} // namespace detail

/// Scaled dot-product attention with per-head projections and an output
/// projection: softmax(Q K^T / sqrt(d_head)) V per head, heads
/// concatenated, then W_O. Inputs may be [T,d] or [B,T,d].
template <typename S>
Tensor<S> multi_head_attention(const Tensor<S>& query, const Tensor<S>& key,
                               const Tensor<S>& value, const MhaWeights<S>& w,
                               std::size_t heads) {
  const bool batched = query.rank() == 3;
  auto lift = [&](const Tensor<S>& t) {
    return batched ? t : reshape(t, {1, t.dim(0), t.dim(1)});
  };
  auto q_in = lift(query), k_in = lift(key), v_in = lift(value);
  const std::size_t d = q_in.dim(2);
  if (heads == 0 || d % heads != 0)
    throw std::invalid_argument("multi_head_attention: indivisible-heads");
  const std::size_t batch = q_in.dim(0);
  const std::size_t dh = d / heads;

  auto qh = detail::split_heads(linear(q_in, w.wq, w.bq), heads);
  auto kh = detail::split_heads(linear(k_in, w.wk, w.bk), heads);
  auto vh = detail::split_heads(linear(v_in, w.wv, w.bv), heads);

  auto scores = scale(bmm_nt(qh, kh), S(1.0 / std::sqrt(static_cast<double>(dh))));
  auto attn = softmax_last(scores);
  auto ctx = detail::merge_heads(bmm(attn, vh), batch, heads);
  auto out = linear(ctx, w.wo, w.bo);
  return batched ? out : reshape(out, {out.dim(1), out.dim(2)});
}

template <typename S>
struct FfnWeights {
  Tensor<S> w1, b1, w2, b2; // inner dim 4d, ReLU
};

template <typename S>
Tensor<S> feed_forward(const Tensor<S>& x, const FfnWeights<S>& w) {
  return linear(relu(linear(x, w.w1, w.b1)), w.w2, w.b2);
}

template <typename S>
struct LayerNormWeights {
  Tensor<S> gamma, beta;
};

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const LayerNormWeights<S>& w) {
  return layer_norm(x, w.gamma, w.beta);
}

/// Selective state-space mixer. Both the drive u(x) and the step size
/// delta(x) are linear in the input, making the decay input-dependent:
///   a_t = exp(-softplus(delta_t)),  s_t = a_t s_{t-1} + (1 - a_t) u_t,
///   y_t = c * s_t + skip * x_t   (per channel).
template <typename S>
struct SsmWeights {
  Tensor<S> w_u, b_u;         // input drive
  Tensor<S> w_delta, b_delta; // step size
  Tensor<S> out_scale;        // c, per channel
  Tensor<S> skip;             // residual passthrough, per channel
};

template <typename S>
Tensor<S> selective_ssm_scan(const Tensor<S>& x, const SsmWeights<S>& w) {
  auto u = linear(x, w.w_u, w.b_u);
  auto delta = linear(x, w.w_delta, w.b_delta);
  auto decay = exp(scale(softplus(delta), S(-1)));
  auto s = scan_ema(decay, u);
  return add(mul(s, w.out_scale), mul(x, w.skip));
}

} // namespace beamloop::nn
