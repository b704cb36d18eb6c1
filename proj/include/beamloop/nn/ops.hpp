// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives: elementwise maps, linear projections, batched
// matrix products, layer normalization, softmax / cross-entropy, the
// selective-scan recurrence, dropout and sinusoidal positional encoding.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "beamloop/nn/gemm.hpp"
#include "beamloop/nn/tensor.hpp"

namespace beamloop::nn {

namespace detail {

// `small` must match a suffix of `big` for broadcast arithmetic.
inline void check_suffix(const Shape& big, const Shape& small, const char* op) {
  if (small.size() > big.size())
    throw std::invalid_argument(std::string(op) + ": shape-mismatch " + shape_str(big) +
                                " vs " + shape_str(small));
  for (std::size_t i = 0; i < small.size(); ++i)
    if (small[small.size() - 1 - i] != big[big.size() - 1 - i])
      throw std::invalid_argument(std::string(op) + ": shape-mismatch " + shape_str(big) +
                                  " vs " + shape_str(small));
}

inline void check_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw std::invalid_argument(std::string(op) + ": shape-mismatch " + shape_str(a) +
                                " vs " + shape_str(b));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_suffix(a.shape(), b.shape(), "add");
  const std::size_t bn = b.numel();
  auto out = Tensor<S>::zeros(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i % bn];
  attach_backward(out, {a, b}, [an = a.node().get(), bn_ = b.node().get(), bn](auto& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    }
    if (bn_->requires_grad) {
      bn_->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) bn_->grad[i % bn] += o.grad[i];
    }
  });
  return out;
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same(a.shape(), b.shape(), "sub");
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = a.values()[i] - b.values()[i];
  attach_backward(out, {a, b}, [an = a.node().get(), bn = b.node().get()](auto& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
    }
  });
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_suffix(a.shape(), b.shape(), "mul");
  const std::size_t bn = b.numel();
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.values()[i] = a.values()[i] * b.values()[i % bn];
  attach_backward(out, {a, b}, [an = a.node().get(), bn_ = b.node().get(), bn](auto& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        an->grad[i] += o.grad[i] * bn_->value[i % bn];
    }
    if (bn_->requires_grad) {
      bn_->ensure_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i)
        bn_->grad[i % bn] += o.grad[i] * an->value[i];
    }
  });
  return out;
}

/// out = k * a + c, elementwise with scalar coefficients.
template <typename S>
Tensor<S> affine(const Tensor<S>& a, S k, S c) {
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = k * a.values()[i] + c;
  attach_backward(out, {a}, [an = a.node().get(), k](auto& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += k * o.grad[i];
  });
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S k) {
  return affine(a, k, S(0));
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

template <typename S>
Tensor<S> relu(const Tensor<S>& a) {
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = std::max(S(0), a.values()[i]);
  attach_backward(out, {a}, [an = a.node().get()](auto& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      if (an->value[i] > S(0)) an->grad[i] += o.grad[i];
  });
  return out;
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const S x = a.values()[i];
    out.values()[i] = x >= S(0) ? S(1) / (S(1) + std::exp(-x))
                                : std::exp(x) / (S(1) + std::exp(x));
  }
  attach_backward(out, {a}, [an = a.node().get()](auto& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const S y = o.value[i];
      an->grad[i] += o.grad[i] * y * (S(1) - y);
    }
  });
  return out;
}

template <typename S>
Tensor<S> softplus(const Tensor<S>& a) {
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const S x = a.values()[i];
    out.values()[i] = x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }
  attach_backward(out, {a}, [an = a.node().get()](auto& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const S x = an->value[i];
      const S sig = x >= S(0) ? S(1) / (S(1) + std::exp(-x)) : std::exp(x) / (S(1) + std::exp(x));
      an->grad[i] += o.grad[i] * sig;
    }
  });
  return out;
}

template <typename S>
Tensor<S> exp(const Tensor<S>& a) {
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out.values()[i] = std::exp(a.values()[i]);
  attach_backward(out, {a}, [an = a.node().get()](auto& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * o.value[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions and data movement

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  S acc = S(0);
  for (auto v : a.values()) acc += v;
  auto out = Tensor<S>::scalar(acc);
  attach_backward(out, {a}, [an = a.node().get()](auto& o) {
    an->ensure_grad();
    for (auto& g : an->grad) g += o.grad[0];
  });
  return out;
}

template <typename S>
Tensor<S> mean(const Tensor<S>& a) {
  return scale(sum(a), S(1) / static_cast<S>(a.numel()));
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw std::invalid_argument("reshape: shape-mismatch, cannot view " +
                                shape_str(a.shape()) + " as " + shape_str(shape));
  auto out = Tensor<S>::from_values(std::move(shape), a.values());
  attach_backward(out, {a}, [an = a.node().get()](auto& o) {
    an->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
  });
  return out;
}

template <typename S>
Tensor<S> permute(const Tensor<S>& a, const std::vector<std::size_t>& perm) {
  const auto& in_shape = a.shape();
  if (perm.size() != in_shape.size())
    throw std::invalid_argument("permute: axis list must cover every dimension");
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out_shape[i] = in_shape[perm[i]];

  const std::size_t rank = in_shape.size();
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank - 1; i > 0; --i) in_stride[i - 1] = in_stride[i] * in_shape[i];
  // stride of the output index axes expressed in input offsets
  std::vector<std::size_t> gather(rank);
  for (std::size_t i = 0; i < rank; ++i) gather[i] = in_stride[perm[i]];

  auto out = Tensor<S>::zeros(out_shape);
  const std::size_t n = out.numel();
  std::vector<std::size_t> idx(rank, 0);
  const auto& av = a.values();
  auto& ov = out.values();
  std::size_t src = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ov[i] = av[src];
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      src += gather[ax];
      if (idx[ax] < out_shape[ax]) break;
      src -= gather[ax] * out_shape[ax];
      idx[ax] = 0;
    }
  }
  attach_backward(out, {a},
                  [an = a.node().get(), gather, out_shape, rank](auto& o) {
    an->ensure_grad();
    std::vector<std::size_t> ix(rank, 0);
    std::size_t src = 0;
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      an->grad[src] += o.grad[i];
      for (std::size_t ax = rank; ax-- > 0;) {
        ++ix[ax];
        src += gather[ax];
        if (ix[ax] < out_shape[ax]) break;
        src -= gather[ax] * out_shape[ax];
        ix[ax] = 0;
      }
    }
  });
  return out;
}

template <typename S>
Tensor<S> concat_last(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != b.rank() || a.rank() == 0)
    throw std::invalid_argument("concat_last: rank mismatch");
  for (std::size_t i = 0; i + 1 < a.rank(); ++i)
    if (a.shape()[i] != b.shape()[i])
      throw std::invalid_argument("concat_last: shape-mismatch " + shape_str(a.shape()) +
                                  " vs " + shape_str(b.shape()));
  const std::size_t da = a.shape().back(), db = b.shape().back();
  Shape out_shape = a.shape();
  out_shape.back() = da + db;
  auto out = Tensor<S>::zeros(out_shape);
  const std::size_t rows = a.numel() / da;
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.values().data() + r * da, da, out.values().data() + r * (da + db));
    std::copy_n(b.values().data() + r * db, db, out.values().data() + r * (da + db) + da);
  }
  attach_backward(out, {a, b},
                  [an = a.node().get(), bn = b.node().get(), da, db, rows](auto& o) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < da; ++j)
          an->grad[r * da + j] += o.grad[r * (da + db) + j];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < db; ++j)
          bn->grad[r * db + j] += o.grad[r * (da + db) + da + j];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

/// y = x W^T + b with x of shape [..., in], W [out, in], b [out].
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  if (x.rank() < 1 || w.rank() != 2 || b.rank() != 1)
    throw std::invalid_argument("linear: expected x[...,in], W[out,in], b[out]");
  const std::size_t in = x.shape().back();
  const std::size_t out_dim = w.shape()[0];
  if (w.shape()[1] != in || b.shape()[0] != out_dim)
    throw std::invalid_argument("linear: shape-mismatch x" + shape_str(x.shape()) + " W" +
                                shape_str(w.shape()) + " b" + shape_str(b.shape()));
  const std::size_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  auto out = Tensor<S>::zeros(out_shape);
  gemm_nt(rows, out_dim, in, x.values().data(), w.values().data(), out.values().data());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out_dim; ++o) out.values()[r * out_dim + o] += b.values()[o];

  attach_backward(out, {x, w, b},
                  [xn = x.node().get(), wn = w.node().get(), bn = b.node().get(), rows, in,
                   out_dim](auto& o) {
    if (xn->requires_grad) {
      xn->ensure_grad();
      gemm_nn(rows, in, out_dim, o.grad.data(), wn->value.data(), xn->grad.data());
    }
    if (wn->requires_grad) {
      wn->ensure_grad();
      gemm_tn(out_dim, in, rows, o.grad.data(), xn->value.data(), wn->grad.data());
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < out_dim; ++c) bn->grad[c] += o.grad[r * out_dim + c];
    }
  });
  return out;
}

/// Batched product over the leading axis: [B,m,k] x [B,k,n] -> [B,m,n].
template <typename S>
Tensor<S> bmm(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] ||
      a.shape()[2] != b.shape()[1])
    throw std::invalid_argument("bmm: shape-mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const std::size_t nb = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[2];
  auto out = Tensor<S>::zeros({nb, m, n});
  for (std::size_t i = 0; i < nb; ++i)
    gemm_nn(m, n, k, a.values().data() + i * m * k, b.values().data() + i * k * n,
            out.values().data() + i * m * n);
  attach_backward(out, {a, b},
                  [an = a.node().get(), bn = b.node().get(), nb, m, k, n](auto& o) {
    for (std::size_t i = 0; i < nb; ++i) {
      const S* g = o.grad.data() + i * m * n;
      if (an->requires_grad) {
        an->ensure_grad();
        gemm_nt(m, k, n, g, bn->value.data() + i * k * n, an->grad.data() + i * m * k);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        gemm_tn(k, n, m, an->value.data() + i * m * k, g, bn->grad.data() + i * k * n);
      }
    }
  });
  return out;
}

/// Batched product with the second factor transposed: [B,m,k] x [B,n,k] -> [B,m,n].
template <typename S>
Tensor<S> bmm_nt(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] ||
      a.shape()[2] != b.shape()[2])
    throw std::invalid_argument("bmm_nt: shape-mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const std::size_t nb = a.shape()[0], m = a.shape()[1], k = a.shape()[2], n = b.shape()[1];
  auto out = Tensor<S>::zeros({nb, m, n});
  for (std::size_t i = 0; i < nb; ++i)
    gemm_nt(m, n, k, a.values().data() + i * m * k, b.values().data() + i * n * k,
            out.values().data() + i * m * n);
  attach_backward(out, {a, b},
                  [an = a.node().get(), bn = b.node().get(), nb, m, k, n](auto& o) {
    for (std::size_t i = 0; i < nb; ++i) {
      const S* g = o.grad.data() + i * m * n;
      if (an->requires_grad) {
        an->ensure_grad();
        gemm_nn(m, k, n, g, bn->value.data() + i * n * k, an->grad.data() + i * m * k);
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        gemm_tn(n, k, m, g, an->value.data() + i * m * k, bn->grad.data() + i * n * k);
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Normalization, softmax, loss

/// Layer normalization over the last axis with affine parameters.
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     S eps = S(1e-5)) {
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
    throw std::invalid_argument("layer_norm: affine parameters must have shape [d]");
  const std::size_t rows = x.numel() / d;
  auto out = Tensor<S>::zeros(x.shape());
  auto xhat = std::make_shared<std::vector<S>>(x.numel());
  auto inv_std = std::make_shared<std::vector<S>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x.values().data() + r * d;
    S mu = S(0);
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<S>(d);
    S var = S(0);
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<S>(d);
    const S istd = S(1) / std::sqrt(var + eps);
    (*inv_std)[r] = istd;
    for (std::size_t j = 0; j < d; ++j) {
      const S xh = (xr[j] - mu) * istd;
      (*xhat)[r * d + j] = xh;
      out.values()[r * d + j] = gamma.values()[j] * xh + beta.values()[j];
    }
  }
  attach_backward(out, {x, gamma, beta},
                  [xn = x.node().get(), gn = gamma.node().get(), bn = beta.node().get(),
                   xhat, inv_std, rows, d](auto& o) {
    for (std::size_t r = 0; r < rows; ++r) {
      const S* g = o.grad.data() + r * d;
      const S* xh = xhat->data() + r * d;
      if (gn->requires_grad) {
        gn->ensure_grad();
        for (std::size_t j = 0; j < d; ++j) gn->grad[j] += g[j] * xh[j];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t j = 0; j < d; ++j) bn->grad[j] += g[j];
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        S m1 = S(0), m2 = S(0);
        for (std::size_t j = 0; j < d; ++j) {
          const S dxh = g[j] * gn->value[j];
          m1 += dxh;
          m2 += dxh * xh[j];
        }
        m1 /= static_cast<S>(d);
        m2 /= static_cast<S>(d);
        for (std::size_t j = 0; j < d; ++j) {
          const S dxh = g[j] * gn->value[j];
          xn->grad[r * d + j] += (*inv_std)[r] * (dxh - m1 - xh[j] * m2);
        }
      }
    }
  });
  return out;
}

template <typename S>
Tensor<S> softmax_last(const Tensor<S>& x) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  auto out = Tensor<S>::zeros(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = x.values().data() + r * d;
    S* yr = out.values().data() + r * d;
    S mx = xr[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    S z = S(0);
    for (std::size_t j = 0; j < d; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (std::size_t j = 0; j < d; ++j) yr[j] /= z;
  }
  attach_backward(out, {x}, [xn = x.node().get(), rows, d](auto& o) {
    xn->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const S* y = o.value.data() + r * d;
      const S* g = o.grad.data() + r * d;
      S dot = S(0);
      for (std::size_t j = 0; j < d; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) xn->grad[r * d + j] += y[j] * (g[j] - dot);
    }
  });
  return out;
}

/// Sequence cross-entropy: sum over every [..., K] row of -log p(label).
/// Log-softmax is computed in a numerically stabilized form.
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<std::size_t>& labels) {
  const std::size_t k = logits.shape().back();
  const std::size_t rows = logits.numel() / k;
  if (labels.size() != rows)
    throw std::invalid_argument("cross_entropy: expected one label per logit row");
  for (auto y : labels)
    if (y >= k) throw std::invalid_argument("cross_entropy: label-out-of-range");

  auto probs = std::make_shared<std::vector<S>>(logits.numel());
  S loss = S(0);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* lr = logits.values().data() + r * k;
    S mx = lr[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, lr[j]);
    S z = S(0);
    for (std::size_t j = 0; j < k; ++j) {
      (*probs)[r * k + j] = std::exp(lr[j] - mx);
      z += (*probs)[r * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) (*probs)[r * k + j] /= z;
    loss += std::log(z) + mx - lr[labels[r]];
  }
  auto out = Tensor<S>::scalar(loss);
  attach_backward(out, {logits},
                  [ln = logits.node().get(), probs, labels, rows, k](auto& o) {
    ln->ensure_grad();
    const S g = o.grad[0];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < k; ++j)
        ln->grad[r * k + j] +=
            g * ((*probs)[r * k + j] - (j == labels[r] ? S(1) : S(0)));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Selective-scan recurrence

/// Per-channel causal recurrence s_t = a_t*s_{t-1} + (1-a_t)*u_t with
/// s_0 = 0, applied along the second-to-last axis. `a` must lie in (0,1);
/// it is the input-dependent decay produced upstream.
template <typename S>
Tensor<S> scan_ema(const Tensor<S>& a, const Tensor<S>& u) {
  detail::check_same(a.shape(), u.shape(), "scan_ema");
  if (a.rank() < 2) throw std::invalid_argument("scan_ema: rank must be >= 2");
  const std::size_t d = a.shape().back();
  const std::size_t t_len = a.shape()[a.rank() - 2];
  const std::size_t batch = a.numel() / (d * t_len);
  auto out = Tensor<S>::zeros(a.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const S* ab = a.values().data() + b * t_len * d;
    const S* ub = u.values().data() + b * t_len * d;
    S* sb = out.values().data() + b * t_len * d;
    for (std::size_t t = 0; t < t_len; ++t) {
      const S* prev = t == 0 ? nullptr : sb + (t - 1) * d;
      for (std::size_t j = 0; j < d; ++j) {
        const S sp = prev ? prev[j] : S(0);
        sb[t * d + j] = ab[t * d + j] * sp + (S(1) - ab[t * d + j]) * ub[t * d + j];
      }
    }
  }
  attach_backward(out, {a, u},
                  [an = a.node().get(), un = u.node().get(), batch, t_len, d](auto& o) {
    if (an->requires_grad) an->ensure_grad();
    if (un->requires_grad) un->ensure_grad();
    std::vector<S> carry(d);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t base = b * t_len * d;
      std::fill(carry.begin(), carry.end(), S(0));
      for (std::size_t t = t_len; t-- > 0;) {
        for (std::size_t j = 0; j < d; ++j) {
          const std::size_t i = base + t * d + j;
          const S total = o.grad[i] + carry[j];
          const S sp = t == 0 ? S(0) : o.value[base + (t - 1) * d + j];
          if (an->requires_grad) an->grad[i] += total * (sp - un->value[i]);
          if (un->requires_grad) un->grad[i] += total * (S(1) - an->value[i]);
          carry[j] = total * an->value[i];
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Dropout and positional encoding

/// Inverted dropout. Identity when not training or rate is zero.
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double rate, std::mt19937_64& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  auto mask = std::make_shared<std::vector<S>>(x.numel());
  std::bernoulli_distribution keep(1.0 - rate);
  const S inv = S(1.0 / (1.0 - rate));
  auto out = Tensor<S>::zeros(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    (*mask)[i] = keep(rng) ? inv : S(0);
    out.values()[i] = x.values()[i] * (*mask)[i];
  }
  attach_backward(out, {x}, [xn = x.node().get(), mask](auto& o) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i] * (*mask)[i];
  });
  return out;
}

/// Sinusoidal positional encoding: PE[t,2i]=sin(t/10000^{2i/d}),
/// PE[t,2i+1]=cos(same). Constant, never differentiated.
template <typename S>
Tensor<S> positional_encoding(std::size_t t_len, std::size_t d) {
  if (d % 2 != 0) throw std::invalid_argument("positional_encoding: odd-d");
  auto out = Tensor<S>::zeros({t_len, d});
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t i = 0; i < d / 2; ++i) {
      const double rate = std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(d));
      const double arg = static_cast<double>(t) / rate;
      out.values()[t * d + 2 * i] = static_cast<S>(std::sin(arg));
      out.values()[t * d + 2 * i + 1] = static_cast<S>(std::cos(arg));
    }
  }
  return out;
}

} // namespace beamloop::nn
