// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace beamloop::nn {

// Row-major matrix kernels. All accumulate into C so backward passes can
// sum gradients in place; zero C first for a plain product.

// C[M,N] += A[M,K] * B[K,N]
template <typename S>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const S* __restrict a,
             const S* __restrict b, S* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    const S* ai = a + i * k;
    S* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const S av = ai[p];
      const S* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
template <typename S>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const S* __restrict a,
             const S* __restrict b, S* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    const S* ai = a + i * k;
    S* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const S* bj = b + j * k;
      S acc = S(0);
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
template <typename S>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const S* __restrict a,
             const S* __restrict b, S* __restrict c) {
  for (std::size_t p = 0; p < k; ++p) {
    const S* ap = a + p * m;
    const S* bp = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const S av = ap[i];
      S* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

} // namespace beamloop::nn
