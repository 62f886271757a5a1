#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "igt/attention.hpp"
#include "igt/graph.hpp"
#include "igt/ops.hpp"

namespace igt {

/// Affine map x·W + b with W stored in×out and b as a 1×out row.
template <typename T>
struct Linear {
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Linear<T>& l) {
  return add_row(matmul(x, l.weight), l.bias);
}

/// ReLU(h·W + b): maps raw instance features to the model width.
template <typename T>
Tensor<T> input_projection(const Tensor<T>& h, const Linear<T>& proj) {
  return relu(linear(h, proj));
}

template <typename T>
struct GenConvParams {
  Linear<T> mlp1;  // d×d
  Linear<T> mlp2;  // d×d
  T beta = T(1);
  T epsilon = T(1e-7);
};

/// Per node u and channel c:
///   m_uvc = ReLU(h_vc) + eps
///   out_uc = Σ_v softmax_v(beta · m_uvc) · m_uvc   (0 when u has no neighbors)
/// Weights are normalized per channel over the neighbors of u.
template <typename T>
Tensor<T> neighbor_softmax_aggregate(const Tensor<T>& h, const Csr& adj, T beta, T epsilon) {
  const std::size_t n = h.rows(), d = h.cols();
  if (adj.n_nodes() != n)
    throw DimensionError("neighbor aggregation: adjacency has " + std::to_string(adj.n_nodes()) +
                         " nodes, features have " + std::to_string(n));
  const T* x = h.data().data();
  const auto msg = [epsilon](T v) { return (v > T(0) ? v : T(0)) + epsilon; };

  std::vector<T> out(n * d, T(0));
  std::vector<T> mx(d), den(d);
  for (std::size_t u = 0; u < n; ++u) {
    const auto nb = adj.neighbors(u);
    if (nb.empty()) continue;
    std::fill(mx.begin(), mx.end(), -std::numeric_limits<T>::infinity());
    for (auto v : nb)
      for (std::size_t c = 0; c < d; ++c) mx[c] = std::max(mx[c], beta * msg(x[v * d + c]));
    std::fill(den.begin(), den.end(), T(0));
    T* num = out.data() + u * d;
    for (auto v : nb)
      for (std::size_t c = 0; c < d; ++c) {
        const T m = msg(x[v * d + c]);
        const T w = std::exp(beta * m - mx[c]);
        den[c] += w;
        num[c] += w * m;
      }
    for (std::size_t c = 0; c < d; ++c) num[c] /= den[c];
  }

  auto backward = [adj, n, d, beta, msg](Node<T>& node) {
    T* gh = input_grad(node, 0);
    if (!gh) return;
    const T* x = input_node(node, 0).value.data();
    std::vector<T> mx(d), den(d);
    for (std::size_t u = 0; u < n; ++u) {
      const auto nb = adj.neighbors(u);
      if (nb.empty()) continue;
      std::fill(mx.begin(), mx.end(), -std::numeric_limits<T>::infinity());
      for (auto v : nb)
        for (std::size_t c = 0; c < d; ++c) mx[c] = std::max(mx[c], beta * msg(x[v * d + c]));
      std::fill(den.begin(), den.end(), T(0));
      for (auto v : nb)
        for (std::size_t c = 0; c < d; ++c) den[c] += std::exp(beta * msg(x[v * d + c]) - mx[c]);
      const T* g = node.grad.data() + u * d;
      const T* s = node.value.data() + u * d;
      // d out_u / d m_v = w_v (1 + beta (m_v - out_u)), then through the ReLU
      for (auto v : nb)
        for (std::size_t c = 0; c < d; ++c) {
          if (!(x[v * d + c] > T(0))) continue;
          const T m = msg(x[v * d + c]);
          const T w = std::exp(beta * m - mx[c]) / den[c];
          gh[v * d + c] += g[c] * w * (T(1) + beta * (m - s[c]));
        }
    }
  };
  return make_result<T>(OpKind::NeighborSoftmaxAggregate, n, d, std::move(out), {h}, std::move(backward));
}

/// Softmax weights of the aggregation above: entry [e*d + c] belongs to the
/// CSR entry e (edge u->v) and channel c.
template <typename T>
std::vector<T> neighbor_softmax_weights(const Tensor<T>& h, const Csr& adj, T beta, T epsilon) {
  const std::size_t n = h.rows(), d = h.cols();
  if (adj.n_nodes() != n) throw DimensionError("neighbor weights: adjacency and features disagree on N");
  const T* x = h.data().data();
  const auto msg = [epsilon](T v) { return (v > T(0) ? v : T(0)) + epsilon; };
  std::vector<T> w(adj.n_entries() * d);
  std::vector<T> mx(d), den(d);
  for (std::size_t u = 0; u < n; ++u) {
    const auto nb = adj.neighbors(u);
    if (nb.empty()) continue;
    std::fill(mx.begin(), mx.end(), -std::numeric_limits<T>::infinity());
    for (auto v : nb)
      for (std::size_t c = 0; c < d; ++c) mx[c] = std::max(mx[c], beta * msg(x[v * d + c]));
    std::fill(den.begin(), den.end(), T(0));
    for (std::size_t e = adj.row_offsets[u]; e < adj.row_offsets[u + 1]; ++e)
      for (std::size_t c = 0; c < d; ++c) {
        w[e * d + c] = std::exp(beta * msg(x[adj.col_indices[e] * d + c]) - mx[c]);
        den[c] += w[e * d + c];
      }
    for (std::size_t e = adj.row_offsets[u]; e < adj.row_offsets[u + 1]; ++e)
      for (std::size_t c = 0; c < d; ++c) w[e * d + c] /= den[c];
  }
  return w;
}

/// Generalized graph convolution: MLP(h_u + m_u) with the softmax neighbor
/// aggregate m_u and a two-layer update MLP (ReLU in between).
template <typename T>
Tensor<T> genconv_forward(const Tensor<T>& h, const Csr& adj, const GenConvParams<T>& p) {
  const Tensor<T> m = neighbor_softmax_aggregate(h, adj, p.beta, p.epsilon);
  return linear(relu(linear(add(h, m), p.mlp1)), p.mlp2);
}

enum class BlockMode { Full, NoAttn, NoGcn };

inline std::string_view to_string(BlockMode m) {
  switch (m) {
    case BlockMode::Full: return "full";
    case BlockMode::NoAttn: return "no-attn";
    case BlockMode::NoGcn: return "no-gcn";
  }
  throw ConfigError("unknown block mode");
}

inline BlockMode parse_block_mode(std::string_view s) {
  if (s == "full") return BlockMode::Full;
  if (s == "no-attn") return BlockMode::NoAttn;
  if (s == "no-gcn") return BlockMode::NoGcn;
  throw ConfigError("unknown block mode '" + std::string(s) + "' (expected full, no-attn or no-gcn)");
}

template <typename T>
struct GtiBlockParams {
  GenConvParams<T> gcn;
  AttentionParams<T> attn;
};

/// H' = GENConv(H, A) + Attention(H); either branch can be switched off.
template <typename T>
Tensor<T> gti_block_forward(const Tensor<T>& h, const Csr& adj, const GtiBlockParams<T>& p, BlockMode mode,
                            const AttentionOptions& attn_opt = {}) {
  switch (mode) {
    case BlockMode::Full:
      return add(genconv_forward(h, adj, p.gcn), attention(h, p.attn, attn_opt));
    case BlockMode::NoAttn:
      return genconv_forward(h, adj, p.gcn);
    case BlockMode::NoGcn:
      return attention(h, p.attn, attn_opt);
  }
  throw ConfigError("unknown block mode");
}

}  // namespace igt
