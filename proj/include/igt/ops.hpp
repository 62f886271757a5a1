#pragma once

// Differentiable primitives. No implicit broadcasting: binary element-wise
// ops require equal shapes, scalars are explicit arguments, and the only
// row-broadcast is the named add_row used for biases.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "igt/detail/gemm.hpp"
#include "igt/tensor.hpp"

namespace igt {

namespace detail {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
}

template <typename T, typename F, typename DF>
Tensor<T> unary(OpKind op, const Tensor<T>& a, F f, DF df_from_x_y) {
  std::vector<T> out(a.size());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  return make_result<T>(op, a.rows(), a.cols(), std::move(out), {a}, [df_from_x_y](Node<T>& n) {
    T* ga = input_grad(n, 0);
    if (!ga) return;
    const auto& x = input_node(n, 0).value;
    for (std::size_t i = 0; i < n.value.size(); ++i) ga[i] += n.grad[i] * df_from_x_y(x[i], n.value[i]);
  });
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ, " + a.shape() + " x " + b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<T> out(m * n, T(0));
  detail::gemm_nn_acc<T>(m, k, n, a.data(), b.data(), out);
  return make_result<T>(OpKind::MatMul, m, n, std::move(out), {a, b}, [m, k, n](Node<T>& node) {
    const auto& av = input_node(node, 0).value;
    const auto& bv = input_node(node, 1).value;
    if (T* ga = input_grad(node, 0))
      detail::gemm_nt_acc<T>(m, n, k, node.grad, bv, std::span<T>(ga, m * k));
    if (T* gb = input_grad(node, 1))
      detail::gemm_tn_acc<T>(m, k, n, av, node.grad, std::span<T>(gb, k * n));
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  const std::size_t r = a.rows(), c = a.cols();
  return make_result<T>(OpKind::Transpose, c, r, detail::transposed<T>(r, c, a.data()), {a},
                        [r, c](Node<T>& n) {
                          T* ga = input_grad(n, 0);
                          if (!ga) return;
                          for (std::size_t i = 0; i < r; ++i)
                            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += n.grad[j * r + i];
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("add", a, b);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result<T>(OpKind::Add, a.rows(), a.cols(), std::move(out), {a, b}, [](Node<T>& n) {
    for (std::size_t k = 0; k < 2; ++k)
      if (T* g = input_grad(n, k))
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("sub", a, b);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result<T>(OpKind::Sub, a.rows(), a.cols(), std::move(out), {a, b}, [](Node<T>& n) {
    if (T* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (T* g = input_grad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] -= n.grad[i];
  });
}

/// Hadamard product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("mul", a, b);
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result<T>(OpKind::Mul, a.rows(), a.cols(), std::move(out), {a, b}, [](Node<T>& n) {
    const auto& av = input_node(n, 0).value;
    const auto& bv = input_node(n, 1).value;
    if (T* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * bv[i];
    if (T* g = input_grad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * av[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  return make_result<T>(OpKind::Scale, a.rows(), a.cols(), std::move(out), {a}, [s](Node<T>& n) {
    if (T* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * s;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + s;
  return make_result<T>(OpKind::AddScalar, a.rows(), a.cols(), std::move(out), {a}, [](Node<T>& n) {
    if (T* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
  });
}

/// a[i][j] + row[0][j] for every i. `row` must be 1×cols(a).
template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw DimensionError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                         row.shape() + " for " + a.shape());
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = a.data()[i * c + j] + row.data()[j];
  return make_result<T>(OpKind::AddRow, r, c, std::move(out), {a, row}, [r, c](Node<T>& n) {
    if (T* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    if (T* g = input_grad(n, 1))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) g[j] += n.grad[i * c + j];
  });
}

/// ReLU with subgradient 0 at 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  return detail::unary<T>(
      OpKind::Relu, a, [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return detail::unary<T>(
      OpKind::Tanh, a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return detail::unary<T>(
      OpKind::Exp, a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

/// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<T> out(a.size());
  const auto x = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    const T* xi = x.data() + i * c;
    T* yi = out.data() + i * c;
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, xi[j]);
    T z = 0;
    for (std::size_t j = 0; j < c; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      z += yi[j];
    }
    for (std::size_t j = 0; j < c; ++j) yi[j] /= z;
  }
  return make_result<T>(OpKind::SoftmaxRows, r, c, std::move(out), {a}, [r, c](Node<T>& n) {
    T* g = input_grad(n, 0);
    if (!g) return;
    for (std::size_t i = 0; i < r; ++i) {
      const T* y = n.value.data() + i * c;
      const T* gy = n.grad.data() + i * c;
      T dot = 0;
      for (std::size_t j = 0; j < c; ++j) dot += y[j] * gy[j];
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - dot);
    }
  });
}

/// Sum of all entries as a 1×1 tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  return make_result<T>(OpKind::Sum, 1, 1, std::vector<T>{s}, {a}, [](Node<T>& n) {
    T* g = input_grad(n, 0);
    if (!g) return;
    const std::size_t len = input_node(n, 0).value.size();
    for (std::size_t i = 0; i < len; ++i) g[i] += n.grad[0];
  });
}

/// Columns [begin, end).
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols())
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of bounds for " + a.shape());
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  std::vector<T> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(a.data().data() + i * c + begin, w, out.data() + i * w);
  return make_result<T>(OpKind::SliceCols, r, w, std::move(out), {a}, [r, c, w, begin](Node<T>& n) {
    T* g = input_grad(n, 0);
    if (!g) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += n.grad[i * w + j];
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r)
      throw DimensionError("concat_cols: row mismatch " + parts.front().shape() + " vs " + p.shape());
    offsets.push_back(total);
    total += p.cols();
  }
  std::vector<T> out(r * total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = parts[k].cols();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(parts[k].data().data() + i * w, w, out.data() + i * total + offsets[k]);
  }
  return make_result<T>(OpKind::ConcatCols, r, total, std::move(out), parts,
                        [r, total, offsets](Node<T>& n) {
                          for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                            T* g = input_grad(n, k);
                            if (!g) continue;
                            const std::size_t w = n.inputs[k]->cols;
                            for (std::size_t i = 0; i < r; ++i)
                              for (std::size_t j = 0; j < w; ++j)
                                g[i * w + j] += n.grad[i * total + offsets[k] + j];
                          }
                        });
}

template <typename T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

}  // namespace igt
