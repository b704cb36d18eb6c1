// SPDX-License-Identifier: Apache-2.0
//
// im2col-backed 2D convolution (NHWC), global average pooling and the
// 4-stage residual conv backbone used as the per-frame feature extractor.
#pragma once

#include "beamloop/nn/ops.hpp"

namespace beamloop::nn {

namespace detail {

// Gather conv patches: cols has one row per output pixel, laid out
// [kh*kw*C] with zero padding outside the input.
template <typename S>
void im2col_nhwc(const S* x, std::size_t batch, std::size_t h, std::size_t w, std::size_t c,
                 std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
                 std::size_t oh, std::size_t ow, S* cols) {
  const std::size_t patch = kh * kw * c;
  for (std::size_t b = 0; b < batch; ++b) {
    const S* xb = x + b * h * w * c;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        S* row = cols + ((b * oh + oy) * ow + ox) * patch;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            S* dst = row + (ky * kw + kx) * c;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix < 0 ||
                ix >= static_cast<std::ptrdiff_t>(w)) {
              for (std::size_t j = 0; j < c; ++j) dst[j] = S(0);
            } else {
              const S* src = xb + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * c;
              for (std::size_t j = 0; j < c; ++j) dst[j] = src[j];
            }
          }
        }
      }
    }
  }
}

// Scatter-add of patch gradients back onto the input image.
template <typename S>
void col2im_nhwc(const S* cols, std::size_t batch, std::size_t h, std::size_t w, std::size_t c,
                 std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
                 std::size_t oh, std::size_t ow, S* dx) {
  const std::size_t patch = kh * kw * c;
  for (std::size_t b = 0; b < batch; ++b) {
    S* xb = dx + b * h * w * c;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const S* row = cols + ((b * oh + oy) * ow + ox) * patch;
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const S* src = row + (ky * kw + kx) * c;
            S* dst = xb + (static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)) * c;
            for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
          }
        }
      }
    }
  }
}

} // namespace detail

/// 2D convolution on NHWC tensors. x [B,H,W,C], w [O,kh,kw,C], b [O].
/// im2col buffers are rebuilt in the backward pass rather than cached.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                 std::size_t stride, std::size_t pad) {
  if (x.rank() != 4 || w.rank() != 4 || b.rank() != 1)
    throw std::invalid_argument("conv2d: expected x[B,H,W,C], w[O,kh,kw,C], b[O]");
  const std::size_t batch = x.dim(0), h = x.dim(1), wdt = x.dim(2), c = x.dim(3);
  const std::size_t o_ch = w.dim(0), kh = w.dim(1), kw = w.dim(2);
  if (w.dim(3) != c || b.dim(0) != o_ch)
    throw std::invalid_argument("conv2d: shape-mismatch x" + shape_str(x.shape()) + " w" +
                                shape_str(w.shape()));
  if (h + 2 * pad < kh || wdt + 2 * pad < kw)
    throw std::invalid_argument("conv2d: input-too-small for kernel");
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (wdt + 2 * pad - kw) / stride + 1;
  const std::size_t rows = batch * oh * ow;
  const std::size_t patch = kh * kw * c;

  std::vector<S> cols(rows * patch);
  detail::im2col_nhwc(x.values().data(), batch, h, wdt, c, kh, kw, stride, pad, oh, ow,
                      cols.data());
  auto out = Tensor<S>::zeros({batch, oh, ow, o_ch});
  gemm_nt(rows, o_ch, patch, cols.data(), w.values().data(), out.values().data());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < o_ch; ++j) out.values()[r * o_ch + j] += b.values()[j];

  attach_backward(out, {x, w, b},
                  [xn = x.node().get(), wn = w.node().get(), bn = b.node().get(), batch, h,
                   wdt, c, kh, kw, stride, pad, oh, ow, rows, patch, o_ch](auto& o) {
    std::vector<S> cols2(rows * patch);
    detail::im2col_nhwc(xn->value.data(), batch, h, wdt, c, kh, kw, stride, pad, oh, ow,
                        cols2.data());
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < o_ch; ++j) bn->grad[j] += o.grad[r * o_ch + j];
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      gemm_tn(o_ch, patch, rows, o.grad.data(), cols2.data(), wn->grad.data());
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      std::vector<S> dcols(rows * patch, S(0));
      gemm_nn(rows, patch, o_ch, o.grad.data(), wn->value.data(), dcols.data());
      detail::col2im_nhwc(dcols.data(), batch, h, wdt, c, kh, kw, stride, pad, oh, ow,
                          xn->grad.data());
    }
  });
  return out;
}

/// Mean over the spatial axes: [B,H,W,C] -> [B,C].
template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
  if (x.rank() != 4) throw std::invalid_argument("global_avg_pool: expected [B,H,W,C]");
  const std::size_t batch = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
  auto out = Tensor<S>::zeros({batch, c});
  const S inv = S(1) / static_cast<S>(hw);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t p = 0; p < hw; ++p)
      for (std::size_t j = 0; j < c; ++j)
        out.values()[b * c + j] += x.values()[(b * hw + p) * c + j] * inv;
  attach_backward(out, {x}, [xn = x.node().get(), batch, hw, c, inv](auto& o) {
    xn->ensure_grad();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t j = 0; j < c; ++j)
          xn->grad[(b * hw + p) * c + j] += o.grad[b * c + j] * inv;
  });
  return out;
}

/// One downsampling stage: relu(conv3x3/s2) added to a 1x1/s2 projection
/// of the input, then a second relu.
template <typename S>
struct ConvStageWeights {
  Tensor<S> w, b;       // 3x3 conv
  Tensor<S> proj_w, proj_b; // 1x1 shortcut projection
};

template <typename S>
Tensor<S> conv_stage(const Tensor<S>& x, const ConvStageWeights<S>& sw) {
  auto main = relu(conv2d(x, sw.w, sw.b, 2, 1));
  auto skip = conv2d(x, sw.proj_w, sw.proj_b, 2, 0);
  return relu(add(main, skip));
}

template <typename S>
struct BackboneWeights {
  std::vector<ConvStageWeights<S>> stages; // channels 1->16->32->64->128
};

inline constexpr std::size_t kBackboneFeatureDim = 128;

/// Per-frame feature extractor. Input [B,1,H,W] (grayscale planes), output
/// [B,128]. Requires H, W >= 8 so four stride-2 stages stay well formed.
template <typename S>
Tensor<S> conv_backbone(const Tensor<S>& frames, const BackboneWeights<S>& bw) {
  if (frames.rank() != 4 || frames.dim(1) != 1)
    throw std::invalid_argument("conv_backbone: expected frames of shape [B,1,H,W]");
  const std::size_t h = frames.dim(2), w = frames.dim(3);
  if (h < 8 || w < 8)
    throw std::invalid_argument("conv_backbone: input-too-small, H and W must be >= 8");
  // With a single channel, [B,1,H,W] and [B,H,W,1] share a memory layout.
  auto x = reshape(frames, {frames.dim(0), h, w, 1});
  for (const auto& stage : bw.stages) x = conv_stage(x, stage);
  return global_avg_pool(x);
}

} // namespace beamloop::nn
