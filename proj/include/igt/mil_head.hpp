#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "igt/layers.hpp"

namespace igt {

/// Attention-MIL scorer: score_i = w·tanh(V·h_i).
template <typename T>
struct PoolingParams {
  Tensor<T> v_att;  // d×d_att
  Tensor<T> w_att;  // d_att×1
};

template <typename T>
struct ClassifierParams {
  Linear<T> fc1;  // d → d/2
  Linear<T> fc2;  // d/2 → C
};

template <typename T>
struct PoolResult {
  Tensor<T> h_bag;  // 1×d
  Tensor<T> alpha;  // N×1
};

template <typename T>
PoolResult<T> attention_pool(const Tensor<T>& h, const PoolingParams<T>& p) {
  if (h.rows() == 0) throw DimensionError("attention_pool: empty bag");
  const Tensor<T> scores = matmul(tanh(matmul(h, p.v_att)), p.w_att);  // N×1
  Tensor<T> alpha = transpose(softmax_rows(transpose(scores)));
  Tensor<T> h_bag = matmul(transpose(alpha), h);
  return {std::move(h_bag), std::move(alpha)};
}

/// Bag logits (no softmax).
template <typename T>
Tensor<T> classify(const Tensor<T>& h_bag, const ClassifierParams<T>& p) {
  return linear(relu(linear(h_bag, p.fc1)), p.fc2);
}

/// -log softmax(logits)[label] for a 1×C row of logits.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t label) {
  if (logits.rows() != 1) throw DimensionError("cross_entropy: expected 1xC logits, got " + logits.shape());
  const std::size_t c = logits.cols();
  if (label >= c)
    throw ContractError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                        std::to_string(c) + " classes");
  const auto z = logits.data();
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : z) mx = std::max(mx, v);
  T s = 0;
  for (T v : z) s += std::exp(v - mx);
  const T lse = mx + std::log(s);
  const T loss = lse - z[label];
  return make_result<T>(OpKind::CrossEntropy, 1, 1, std::vector<T>{loss}, {logits}, [c, label, lse](Node<T>& n) {
    T* g = input_grad(n, 0);
    if (!g) return;
    const auto& z = input_node(n, 0).value;
    for (std::size_t j = 0; j < c; ++j) {
      const T p = std::exp(z[j] - lse);
      g[j] += n.grad[0] * (p - (j == label ? T(1) : T(0)));
    }
  });
}

/// Softmax of a logits row, returned as plain values.
template <typename T>
std::vector<T> softmax_values(std::span<const T> z) {
  T mx = -std::numeric_limits<T>::infinity();
  for (T v : z) mx = std::max(mx, v);
  std::vector<T> p(z.size());
  T s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - mx));
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace igt
