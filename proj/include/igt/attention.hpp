#pragma once

// Multi-head scaled dot-product self-attention, two kernels with identical
// semantics:
//   naive: materializes the N×N weight matrix of each head via autodiff
//          primitives (column slicing into heads, matmul, softmax_rows).
//   tiled: streams key/value blocks with a running max and normalizer per
//          query, so scratch memory depends on the block size and head width
//          only. The backward pass recomputes the weights tile by tile from the
//          saved per-row log-sum-exp.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "igt/ops.hpp"

namespace igt {

/// Scratch accounting reported by the kernels (element counts, not bytes).
struct AttentionStats {
  std::size_t weight_buffer_elements = 0;  // naive: N×N per head
  std::size_t peak_aux_elements = 0;       // tiled: tile scratch
};

template <typename T>
struct AttentionParams {
  Tensor<T> wq, wk, wv, wo;  // each d×d
  std::size_t n_heads = 8;

  std::size_t dim() const { return wq.rows(); }
  std::size_t head_dim() const { return dim() / n_heads; }
};

enum class AttentionKernel { Naive, Tiled };

struct AttentionOptions {
  AttentionKernel kernel = AttentionKernel::Naive;
  std::size_t block = 128;
  AttentionStats* stats = nullptr;
};

namespace detail {

template <typename T>
void check_attention(const Tensor<T>& h, const AttentionParams<T>& p) {
  const std::size_t d = h.cols();
  if (p.n_heads == 0 || d % p.n_heads != 0)
    throw DimensionError("attention: d=" + std::to_string(d) + " not divisible by " +
                         std::to_string(p.n_heads) + " heads");
  for (const Tensor<T>* w : {&p.wq, &p.wk, &p.wv, &p.wo})
    if (w->rows() != d || w->cols() != d)
      throw DimensionError("attention: projection " + w->shape() + " does not match d=" + std::to_string(d));
  if (h.rows() == 0) throw DimensionError("attention: empty input");
}

}  // namespace detail

/// Per head: softmax(Q_h K_hᵀ / √d_q) V_h; heads concatenated and projected by W_O.
template <typename T>
Tensor<T> attention_naive(const Tensor<T>& h, const AttentionParams<T>& p, AttentionStats* stats = nullptr) {
  detail::check_attention(h, p);
  const std::size_t dq = p.head_dim();
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dq));
  const Tensor<T> q = matmul(h, p.wq);
  const Tensor<T> k = matmul(h, p.wk);
  const Tensor<T> v = matmul(h, p.wv);
  std::vector<Tensor<T>> heads;
  heads.reserve(p.n_heads);
  for (std::size_t hd = 0; hd < p.n_heads; ++hd) {
    const std::size_t c0 = hd * dq, c1 = c0 + dq;
    Tensor<T> scores = scale(matmul(slice_cols(q, c0, c1), transpose(slice_cols(k, c0, c1))), inv_sqrt);
    Tensor<T> weights = softmax_rows(scores);
    if (stats) stats->weight_buffer_elements = std::max(stats->weight_buffer_elements, weights.size());
    heads.push_back(matmul(weights, slice_cols(v, c0, c1)));
  }
  return matmul(concat_cols(heads), p.wo);
}

/// The N×N weight matrix of every head, as computed by the naive kernel.
template <typename T>
std::vector<Tensor<T>> attention_weights(const Tensor<T>& h, const AttentionParams<T>& p) {
  detail::check_attention(h, p);
  const std::size_t dq = p.head_dim();
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dq));
  const Tensor<T> q = matmul(h.detach(), p.wq.detach());
  const Tensor<T> k = matmul(h.detach(), p.wk.detach());
  std::vector<Tensor<T>> out;
  for (std::size_t hd = 0; hd < p.n_heads; ++hd) {
    const std::size_t c0 = hd * dq, c1 = c0 + dq;
    out.push_back(softmax_rows(scale(matmul(slice_cols(q, c0, c1), transpose(slice_cols(k, c0, c1))), inv_sqrt)));
  }
  return out;
}

/// Exact attention over pre-projected Q, K, V (each N×d, heads are contiguous
/// column groups of width d/n_heads) using block×block tiles. Returns the
/// concatenated head outputs (before W_O).
template <typename T>
Tensor<T> tiled_attention_core(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               std::size_t n_heads, std::size_t block, AttentionStats* stats = nullptr) {
  if (block == 0) throw ContractError("tiled attention: block must be >= 1");
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() || q.cols() != v.cols())
    throw DimensionError("tiled attention: Q/K/V shapes differ");
  const std::size_t n = q.rows(), d = q.cols(), dq = d / n_heads;
  const std::size_t bs = std::min(block, n);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dq));
  const T* Q = q.data().data();
  const T* K = k.data().data();
  const T* V = v.data().data();

  std::vector<T> out(n * d, T(0));
  std::vector<T> lse(n * n_heads);

  // scratch, sized by the tile only
  std::vector<T> s_tile(bs * bs), kt(dq * bs), row_max(bs), row_sum(bs), acc(bs * dq);
  if (stats)
    stats->peak_aux_elements = std::max(stats->peak_aux_elements,
                                        s_tile.size() + kt.size() + row_max.size() + row_sum.size() + acc.size());

  for (std::size_t hd = 0; hd < n_heads; ++hd) {
    const std::size_t off = hd * dq;
    for (std::size_t i0 = 0; i0 < n; i0 += bs) {
      const std::size_t bq = std::min(bs, n - i0);
      std::fill(row_max.begin(), row_max.end(), -std::numeric_limits<T>::infinity());
      std::fill(row_sum.begin(), row_sum.end(), T(0));
      std::fill(acc.begin(), acc.end(), T(0));
      for (std::size_t j0 = 0; j0 < n; j0 += bs) {
        const std::size_t bk = std::min(bs, n - j0);
        for (std::size_t b = 0; b < bk; ++b)
          for (std::size_t c = 0; c < dq; ++c) kt[c * bk + b] = K[(j0 + b) * d + off + c];
        for (std::size_t a = 0; a < bq; ++a) {
          T* srow = s_tile.data() + a * bk;
          std::fill_n(srow, bk, T(0));
          const T* qrow = Q + (i0 + a) * d + off;
          for (std::size_t c = 0; c < dq; ++c) {
            const T qc = qrow[c];
            const T* krow = kt.data() + c * bk;
            for (std::size_t b = 0; b < bk; ++b) srow[b] += qc * krow[b];
          }
          T tile_max = -std::numeric_limits<T>::infinity();
          for (std::size_t b = 0; b < bk; ++b) {
            srow[b] *= inv_sqrt;
            tile_max = std::max(tile_max, srow[b]);
          }
          const T m_new = std::max(row_max[a], tile_max);
          const T rescale = std::exp(row_max[a] - m_new);
          T* arow = acc.data() + a * dq;
          T tile_sum = 0;
          for (std::size_t c = 0; c < dq; ++c) arow[c] *= rescale;
          for (std::size_t b = 0; b < bk; ++b) {
            const T pb = std::exp(srow[b] - m_new);
            tile_sum += pb;
            const T* vrow = V + (j0 + b) * d + off;
            for (std::size_t c = 0; c < dq; ++c) arow[c] += pb * vrow[c];
          }
          row_sum[a] = row_sum[a] * rescale + tile_sum;
          row_max[a] = m_new;
        }
      }
      for (std::size_t a = 0; a < bq; ++a) {
        T* orow = out.data() + (i0 + a) * d + off;
        const T* arow = acc.data() + a * dq;
        for (std::size_t c = 0; c < dq; ++c) orow[c] = arow[c] / row_sum[a];
        lse[(i0 + a) * n_heads + hd] = row_max[a] + std::log(row_sum[a]);
      }
    }
  }

  auto backward = [n, d, dq, n_heads, bs, inv_sqrt, lse = std::move(lse)](Node<T>& node) {
    const T* Q = input_node(node, 0).value.data();
    const T* K = input_node(node, 1).value.data();
    const T* V = input_node(node, 2).value.data();
    const T* O = node.value.data();
    const T* dO = node.grad.data();
    T* dQ = input_grad(node, 0);
    T* dK = input_grad(node, 1);
    T* dV = input_grad(node, 2);
    std::vector<T> p_tile(bs * bs), dp(bs), rowdot(bs);
    for (std::size_t hd = 0; hd < n_heads; ++hd) {
      const std::size_t off = hd * dq;
      for (std::size_t i0 = 0; i0 < n; i0 += bs) {
        const std::size_t bq = std::min(bs, n - i0);
        for (std::size_t a = 0; a < bq; ++a) {
          T s = 0;
          for (std::size_t c = 0; c < dq; ++c) s += dO[(i0 + a) * d + off + c] * O[(i0 + a) * d + off + c];
          rowdot[a] = s;
        }
        for (std::size_t j0 = 0; j0 < n; j0 += bs) {
          const std::size_t bk = std::min(bs, n - j0);
          for (std::size_t a = 0; a < bq; ++a) {
            const T* qrow = Q + (i0 + a) * d + off;
            const T l = lse[(i0 + a) * n_heads + hd];
            for (std::size_t b = 0; b < bk; ++b) {
              const T* krow = K + (j0 + b) * d + off;
              T s = 0;
              for (std::size_t c = 0; c < dq; ++c) s += qrow[c] * krow[c];
              p_tile[a * bk + b] = std::exp(s * inv_sqrt - l);
            }
          }
          for (std::size_t a = 0; a < bq; ++a) {
            const T* dorow = dO + (i0 + a) * d + off;
            for (std::size_t b = 0; b < bk; ++b) {
              const T pab = p_tile[a * bk + b];
              const T* vrow = V + (j0 + b) * d + off;
              T dpab = 0;
              for (std::size_t c = 0; c < dq; ++c) dpab += dorow[c] * vrow[c];
              if (dV) {
                T* dvrow = dV + (j0 + b) * d + off;
                for (std::size_t c = 0; c < dq; ++c) dvrow[c] += pab * dorow[c];
              }
              const T ds = pab * (dpab - rowdot[a]) * inv_sqrt;
              if (dQ) {
                T* dqrow = dQ + (i0 + a) * d + off;
                const T* krow = K + (j0 + b) * d + off;
                for (std::size_t c = 0; c < dq; ++c) dqrow[c] += ds * krow[c];
              }
              if (dK) {
                T* dkrow = dK + (j0 + b) * d + off;
                const T* qrow = Q + (i0 + a) * d + off;
                for (std::size_t c = 0; c < dq; ++c) dkrow[c] += ds * qrow[c];
              }
            }
          }
        }
      }
    }
  };
  return make_result<T>(OpKind::TiledAttention, n, d, std::move(out), {q, k, v}, std::move(backward));
}

template <typename T>
Tensor<T> attention_tiled(const Tensor<T>& h, const AttentionParams<T>& p, std::size_t block,
                          AttentionStats* stats = nullptr) {
  detail::check_attention(h, p);
  if (block == 0) throw ContractError("attention_tiled: block must be >= 1");
  const Tensor<T> q = matmul(h, p.wq);
  const Tensor<T> k = matmul(h, p.wk);
  const Tensor<T> v = matmul(h, p.wv);
  return matmul(tiled_attention_core(q, k, v, p.n_heads, block, stats), p.wo);
}

template <typename T>
Tensor<T> attention(const Tensor<T>& h, const AttentionParams<T>& p, const AttentionOptions& opt) {
  return opt.kernel == AttentionKernel::Tiled ? attention_tiled(h, p, opt.block, opt.stats)
                                              : attention_naive(h, p, opt.stats);
}

}  // namespace igt
