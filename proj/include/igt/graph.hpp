#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "igt/errors.hpp"
#include "igt/tensor.hpp"

namespace igt {

struct Point2 {
  double x = 0;
  double y = 0;
  bool operator==(const Point2&) const = default;
};

/// Compressed sparse row adjacency. Row u lists the neighbors of node u.
struct Csr {
  std::vector<std::uint32_t> row_offsets{0};
  std::vector<std::uint32_t> col_indices;

  std::size_t n_nodes() const { return row_offsets.size() - 1; }
  std::size_t n_entries() const { return col_indices.size(); }
  std::size_t degree(std::size_t u) const { return row_offsets[u + 1] - row_offsets[u]; }
  std::span<const std::uint32_t> neighbors(std::size_t u) const {
    return {col_indices.data() + row_offsets[u], degree(u)};
  }
  bool has_edge(std::size_t u, std::size_t v) const {
    const auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), static_cast<std::uint32_t>(v));
  }
  bool operator==(const Csr&) const = default;

  /// Rows are sorted and deduplicated; self-loops are dropped.
  static Csr from_adjacency_lists(std::vector<std::vector<std::uint32_t>> lists) {
    Csr csr;
    csr.row_offsets.assign(1, 0);
    for (std::size_t u = 0; u < lists.size(); ++u) {
      auto& row = lists[u];
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      for (auto v : row)
        if (v != u) csr.col_indices.push_back(v);
      csr.row_offsets.push_back(static_cast<std::uint32_t>(csr.col_indices.size()));
    }
    return csr;
  }
};

/// Returns an empty string when `a` is a valid undirected adjacency over n
/// nodes, otherwise a description of the first violation.
inline std::string adjacency_violation(const Csr& a, std::size_t n) {
  if (a.row_offsets.size() != n + 1) return "row_offsets length != N+1";
  if (a.row_offsets.front() != 0 || a.row_offsets.back() != a.col_indices.size())
    return "row_offsets do not span col_indices";
  for (std::size_t u = 0; u < n; ++u) {
    if (a.row_offsets[u] > a.row_offsets[u + 1]) return "row_offsets decrease at row " + std::to_string(u);
    const auto nb = a.neighbors(u);
    for (std::size_t i = 0; i < nb.size(); ++i) {
      if (nb[i] >= n) return "column index out of range in row " + std::to_string(u);
      if (nb[i] == u) return "self-loop at node " + std::to_string(u);
      if (i > 0 && nb[i - 1] >= nb[i]) return "row " + std::to_string(u) + " not strictly sorted";
      if (!a.has_edge(nb[i], u))
        return "asymmetric edge " + std::to_string(u) + "->" + std::to_string(nb[i]);
    }
  }
  return {};
}

enum class KnnSpace { Spatial, Feature };

struct GraphConfig {
  std::size_t k = 8;
  bool symmetrize = true;
  KnnSpace space = KnnSpace::Spatial;
};

namespace detail {

/// k nearest other rows by squared Euclidean distance, ties to lower index.
template <typename DistFn>
std::vector<std::vector<std::uint32_t>> knn_lists(std::size_t n, std::size_t k, DistFn dist) {
  std::vector<std::vector<std::uint32_t>> lists(n);
  std::vector<std::pair<double, std::uint32_t>> cand;
  cand.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) cand.emplace_back(dist(i, j), static_cast<std::uint32_t>(j));
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    lists[i].reserve(2 * k);
    for (std::size_t r = 0; r < k; ++r) lists[i].push_back(cand[r].second);
  }
  return lists;
}

inline Csr finish_knn(std::vector<std::vector<std::uint32_t>> lists, bool symmetrize) {
  if (symmetrize) {
    const std::size_t n = lists.size();
    std::vector<std::vector<std::uint32_t>> reverse(n);
    for (std::size_t i = 0; i < n; ++i)
      for (auto j : lists[i]) reverse[j].push_back(static_cast<std::uint32_t>(i));
    for (std::size_t i = 0; i < n; ++i) lists[i].insert(lists[i].end(), reverse[i].begin(), reverse[i].end());
  }
  return Csr::from_adjacency_lists(std::move(lists));
}

inline void check_knn_size(std::size_t n, std::size_t k) {
  if (k < 1) throw ConfigError("k-NN requires k >= 1");
  if (n <= k)
    throw ConfigError("k-NN requires more than k nodes (N=" + std::to_string(n) +
                      ", k=" + std::to_string(k) + ")");
}

}  // namespace detail

/// Union-symmetrized k-NN graph over 2-D coordinates.
inline Csr knn_adjacency(std::span<const Point2> coords, const GraphConfig& cfg) {
  detail::check_knn_size(coords.size(), cfg.k);
  auto lists = detail::knn_lists(coords.size(), cfg.k, [&](std::size_t i, std::size_t j) {
    const double dx = coords[i].x - coords[j].x, dy = coords[i].y - coords[j].y;
    return dx * dx + dy * dy;
  });
  return detail::finish_knn(std::move(lists), cfg.symmetrize);
}

/// Same construction over feature rows instead of coordinates.
template <typename T>
Csr knn_adjacency_features(const Tensor<T>& features, const GraphConfig& cfg) {
  const std::size_t n = features.rows(), d = features.cols();
  detail::check_knn_size(n, cfg.k);
  const auto f = features.data();
  auto lists = detail::knn_lists(n, cfg.k, [&](std::size_t i, std::size_t j) {
    double s = 0;
    for (std::size_t c = 0; c < d; ++c) {
      const double t = static_cast<double>(f[i * d + c]) - static_cast<double>(f[j * d + c]);
      s += t * t;
    }
    return s;
  });
  return detail::finish_knn(std::move(lists), cfg.symmetrize);
}

/// One bag: node features H, patch coordinates, adjacency A and label.
template <typename T>
struct WsiGraph {
  std::string name;
  Tensor<T> features;
  std::vector<Point2> coords;
  Csr adjacency;
  std::uint32_t label = 0;

  std::size_t n_nodes() const { return features.rows(); }
  std::size_t n_edges() const { return adjacency.n_entries() / 2; }
};

template <typename T>
WsiGraph<T> build_graph(Tensor<T> features, std::vector<Point2> coords, std::uint32_t label,
                        const GraphConfig& cfg, std::string name = "bag") {
  if (features.rows() != coords.size())
    throw IngestionError(name + ": " + std::to_string(features.rows()) + " feature rows but " +
                         std::to_string(coords.size()) + " coordinates");
  WsiGraph<T> g;
  g.adjacency = cfg.space == KnnSpace::Spatial ? knn_adjacency(coords, cfg)
                                               : knn_adjacency_features(features, cfg);
  g.name = std::move(name);
  g.features = std::move(features);
  g.coords = std::move(coords);
  g.label = label;
  return g;
}

inline void check_permutation(std::span<const std::size_t> perm, std::size_t n) {
  if (perm.size() != n)
    throw ContractError("permutation has length " + std::to_string(perm.size()) + ", expected " +
                        std::to_string(n));
  std::vector<bool> hit(n, false);
  for (auto p : perm) {
    if (p >= n || hit[p]) throw ContractError("permutation is not a bijection on 0..N-1");
    hit[p] = true;
  }
}

/// Node i of the result is node perm[i] of `g`.
template <typename T>
WsiGraph<T> permute_graph(const WsiGraph<T>& g, std::span<const std::size_t> perm) {
  const std::size_t n = g.n_nodes(), d = g.features.cols();
  check_permutation(perm, n);
  std::vector<std::uint32_t> inverse(n);
  for (std::size_t i = 0; i < n; ++i) inverse[perm[i]] = static_cast<std::uint32_t>(i);

  WsiGraph<T> out;
  out.name = g.name;
  out.label = g.label;
  std::vector<T> f(n * d);
  const auto src = g.features.data();
  for (std::size_t i = 0; i < n; ++i) std::copy_n(src.data() + perm[i] * d, d, f.data() + i * d);
  out.features = Tensor<T>(n, d, std::move(f));
  out.coords.resize(g.coords.size());
  for (std::size_t i = 0; i < g.coords.size(); ++i) out.coords[i] = g.coords[perm[i]];
  std::vector<std::vector<std::uint32_t>> lists(n);
  for (std::size_t i = 0; i < n; ++i)
    for (auto v : g.adjacency.neighbors(perm[i])) lists[i].push_back(inverse[v]);
  out.adjacency = Csr::from_adjacency_lists(std::move(lists));
  return out;
}

}  // namespace igt
