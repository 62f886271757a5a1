#pragma once

// Row-major dense kernels. Every output element is accumulated over the inner
// index in ascending order, so results are bit-identical to a plain triple
// loop when the build disables floating-point contraction.

#include <cstddef>
#include <span>
#include <vector>

namespace igt::detail {

/// C[m×n] += A[m×k] · B[k×n]
template <typename T>
void gemm_nn_acc(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a,
                 std::span<const T> b, std::span<T> c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    const T* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = arow[p];
      if (aip == T(0)) continue;
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

/// C[k×n] += Aᵀ · B where A is m×k and B is m×n.
template <typename T>
void gemm_tn_acc(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a,
                 std::span<const T> b, std::span<T> c) {
  for (std::size_t r = 0; r < m; ++r) {
    const T* arow = a.data() + r * k;
    const T* brow = b.data() + r * n;
    for (std::size_t i = 0; i < k; ++i) {
      const T ari = arow[i];
      if (ari == T(0)) continue;
      T* crow = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += ari * brow[j];
    }
  }
}

template <typename T>
std::vector<T> transposed(std::size_t rows, std::size_t cols, std::span<const T> a) {
  std::vector<T> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
  return out;
}

/// C[m×n] += A[m×k] · Bᵀ where B is n×k.
template <typename T>
void gemm_nt_acc(std::size_t m, std::size_t k, std::size_t n, std::span<const T> a,
                 std::span<const T> b, std::span<T> c) {
  const std::vector<T> bt = transposed<T>(n, k, b);
  gemm_nn_acc<T>(m, k, n, a, bt, c);
}

}  // namespace igt::detail
