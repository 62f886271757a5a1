#pragma once

// Synthetic weakly-labelled bags whose labels depend on structure rather than
// on per-instance content.
//
// Every instance is one of five types whose features are a fixed prototype
// (norm 3, mutually orthogonal) plus isotropic Gaussian noise with expected
// norm `noise`. Instances sit on a jittered square patch grid.
//
//   spatial-motif  positive iff some A instance and some B instance are k-NN
//                  neighbours. Negatives hold the same numbers of A and B,
//                  never adjacent, so the bag-level feature distribution is
//                  identical in both classes.
//   long-range     positive iff both C and D occur; in positives every C is at
//                  least `min_hops` graph hops from every D. Negatives hold
//                  signal instances of a single type.
//   hybrid         positive iff both conditions above hold; each negative
//                  satisfies exactly one of them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "igt/bag_io.hpp"
#include "igt/graph.hpp"
#include "igt/rng.hpp"

namespace igt {

enum class InstanceType : std::uint8_t { Background = 0, A = 1, B = 2, C = 3, D = 4 };
inline constexpr std::size_t kNumInstanceTypes = 5;
inline constexpr double kPrototypeNorm = 3.0;
inline constexpr double kPatchSize = 256.0;

enum class SynthTask { SpatialMotif, LongRange, Hybrid };

inline std::string_view to_string(SynthTask t) {
  switch (t) {
    case SynthTask::SpatialMotif: return "spatial-motif";
    case SynthTask::LongRange: return "long-range";
    case SynthTask::Hybrid: return "hybrid";
  }
  return "?";
}

inline SynthTask parse_synth_task(std::string_view s) {
  if (s == "spatial-motif") return SynthTask::SpatialMotif;
  if (s == "long-range") return SynthTask::LongRange;
  if (s == "hybrid") return SynthTask::Hybrid;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected spatial-motif, long-range or hybrid)");
}

struct SynthSpec {
  SynthTask task = SynthTask::SpatialMotif;
  std::size_t n_bags = 500;
  std::size_t n_min = 64;
  std::size_t n_max = 256;
  std::size_t d_in = 64;
  double noise = 1.0;
  std::uint64_t seed = 0;
  std::size_t k = 8;
  // spatial motif: number of A (= number of B) instances per bag
  std::size_t motif_min = 1;
  std::size_t motif_max = 3;
  // long range: total number of C/D instances per bag
  std::size_t signal_min = 2;
  std::size_t signal_max = 8;
  std::size_t min_hops = 4;
  std::size_t max_retries = 200;
  // train/val/test proportions
  double split_train = 6.5;
  double split_val = 1.5;
  double split_test = 2.0;

  void validate() const {
    if (n_min < 16) throw ConfigError("instances per bag must be at least 16");
    if (n_max < n_min) throw ConfigError("n_max < n_min");
    if (d_in < kNumInstanceTypes) throw ConfigError("d_in must be at least 5 to hold the prototypes");
    if (n_bags < 2) throw ConfigError("need at least 2 bags");
    if (k < 1 || k >= n_min) throw ConfigError("k must satisfy 1 <= k < n_min");
    if (motif_min < 1 || motif_max < motif_min) throw ConfigError("invalid motif count range");
    if (signal_min < 2 || signal_max < signal_min) throw ConfigError("signal count range must start at 2 or more");
    if (2 * motif_max + signal_max >= n_min) throw ConfigError("too many signal instances for n_min");
    if (!(noise >= 0)) throw ConfigError("noise must be nonnegative");
    if (!(split_train > 0 && split_val >= 0 && split_test > 0)) throw ConfigError("invalid split ratio");
  }
};

/// Prototype of `t`: kPrototypeNorm along coordinate axis `t`.
inline std::vector<double> prototype(InstanceType t, std::size_t d_in) {
  std::vector<double> p(d_in, 0.0);
  p[static_cast<std::size_t>(t)] = kPrototypeNorm;
  return p;
}

/// `n` distinct cells of a ceil(sqrt(n))² grid, jittered by up to 0.2 cells,
/// in pixel units of kPatchSize.
inline std::vector<Point2> jittered_grid(std::size_t n, Rng& rng) {
  const auto w = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  auto cells = rng.permutation(w * w);
  std::vector<Point2> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cx = static_cast<double>(cells[i] % w), cy = static_cast<double>(cells[i] / w);
    pts[i] = {(cx + 0.5 + rng.uniform(-0.2, 0.2)) * kPatchSize, (cy + 0.5 + rng.uniform(-0.2, 0.2)) * kPatchSize};
  }
  return pts;
}

/// Features for the given instance types.
inline std::vector<float> instance_features(std::span<const InstanceType> types, std::size_t d_in, double noise,
                                            Rng& rng) {
  std::vector<float> f(types.size() * d_in);
  const double sd = noise / std::sqrt(static_cast<double>(d_in));
  for (std::size_t i = 0; i < types.size(); ++i) {
    const auto p = prototype(types[i], d_in);
    for (std::size_t c = 0; c < d_in; ++c)
      f[i * d_in + c] = static_cast<float>(p[c] + (sd > 0 ? rng.normal(0.0, sd) : 0.0));
  }
  return f;
}

/// Graph hop distance from the nearest node in `sources` (max() if unreachable).
inline std::vector<std::size_t> hop_distances(const Csr& adj, std::span<const std::size_t> sources) {
  std::vector<std::size_t> dist(adj.n_nodes(), std::numeric_limits<std::size_t>::max());
  std::deque<std::size_t> q;
  for (auto s : sources) {
    dist[s] = 0;
    q.push_back(s);
  }
  while (!q.empty()) {
    const auto u = q.front();
    q.pop_front();
    for (auto v : adj.neighbors(u))
      if (dist[v] == std::numeric_limits<std::size_t>::max()) {
        dist[v] = dist[u] + 1;
        q.push_back(v);
      }
  }
  return dist;
}

inline std::vector<std::size_t> nodes_of(std::span<const InstanceType> types, InstanceType t) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < types.size(); ++i)
    if (types[i] == t) out.push_back(i);
  return out;
}

/// Generator-side label rules.
inline bool has_adjacent_pair(std::span<const InstanceType> types, const Csr& adj, InstanceType a, InstanceType b) {
  for (auto u : nodes_of(types, a))
    for (auto v : adj.neighbors(u))
      if (types[v] == b) return true;
  return false;
}

inline bool has_both(std::span<const InstanceType> types, InstanceType a, InstanceType b) {
  return std::find(types.begin(), types.end(), a) != types.end() &&
         std::find(types.begin(), types.end(), b) != types.end();
}

namespace detail {

inline std::vector<std::size_t> free_nodes(std::span<const InstanceType> types) {
  return nodes_of(types, InstanceType::Background);
}

/// Places `count` instances of type `t` on random background nodes.
inline bool place_random(std::vector<InstanceType>& types, InstanceType t, std::size_t count, Rng& rng) {
  auto fr = free_nodes(types);
  if (fr.size() < count) return false;
  rng.shuffle(fr.begin(), fr.end());
  for (std::size_t i = 0; i < count; ++i) types[fr[i]] = t;
  return true;
}

/// A/B instances: `m` adjacent A-B pairs (positive), or `m` of each type with
/// no A adjacent to any B (negative).
inline bool place_motif(std::vector<InstanceType>& types, const Csr& adj, bool positive, std::size_t m, Rng& rng) {
  if (positive) {
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::pair<std::size_t, std::size_t>> edges;
      for (auto u : free_nodes(types))
        for (auto v : adj.neighbors(u))
          if (types[v] == InstanceType::Background) edges.emplace_back(u, v);
      if (edges.empty()) return false;
      const auto [u, v] = edges[rng.integer(0, edges.size() - 1)];
      types[u] = InstanceType::A;
      types[v] = InstanceType::B;
    }
    return true;
  }
  if (!place_random(types, InstanceType::A, m, rng)) return false;
  // B only where no A is adjacent
  std::vector<std::size_t> ok;
  for (auto u : free_nodes(types)) {
    bool touches = false;
    for (auto v : adj.neighbors(u)) touches = touches || types[v] == InstanceType::A;
    if (!touches) ok.push_back(u);
  }
  if (ok.size() < m) return false;
  rng.shuffle(ok.begin(), ok.end());
  for (std::size_t i = 0; i < m; ++i) types[ok[i]] = InstanceType::B;
  return true;
}

/// C/D instances: both types far apart (positive) or a single type (negative).
inline bool place_signals(std::vector<InstanceType>& types, const Csr& adj, bool positive, std::size_t s,
                          std::size_t min_hops, Rng& rng) {
  if (!positive) return place_random(types, rng.coin() ? InstanceType::C : InstanceType::D, s, rng);
  const std::size_t n_c = rng.integer(1, s - 1);
  if (!place_random(types, InstanceType::C, n_c, rng)) return false;
  const auto dist = hop_distances(adj, nodes_of(types, InstanceType::C));
  std::vector<std::size_t> ok;
  for (auto u : free_nodes(types))
    if (dist[u] >= min_hops) ok.push_back(u);
  if (ok.size() < s - n_c) return false;
  rng.shuffle(ok.begin(), ok.end());
  for (std::size_t i = 0; i < s - n_c; ++i) types[ok[i]] = InstanceType::D;
  return true;
}

}  // namespace detail

struct GeneratedBag {
  BagRecord record;
  std::vector<InstanceType> types;
};

/// Bag number `index` of the dataset described by `spec`, with label `label`.
/// Depends only on (spec, index, label).
inline GeneratedBag generate_bag(const SynthSpec& spec, std::size_t index, bool label) {
  Rng rng(derive_seed(spec.seed, index));
  for (std::size_t attempt = 0; attempt < spec.max_retries; ++attempt) {
    const std::size_t n = rng.integer(spec.n_min, spec.n_max);
    auto coords = jittered_grid(n, rng);
    const Csr adj = knn_adjacency(coords, GraphConfig{spec.k, true, KnnSpace::Spatial});
    std::vector<InstanceType> types(n, InstanceType::Background);
    bool ok = true;
    switch (spec.task) {
      case SynthTask::SpatialMotif:
        ok = detail::place_motif(types, adj, label, rng.integer(spec.motif_min, spec.motif_max), rng);
        break;
      case SynthTask::LongRange:
        ok = detail::place_signals(types, adj, label, rng.integer(spec.signal_min, spec.signal_max), spec.min_hops,
                                   rng);
        break;
      case SynthTask::Hybrid: {
        // negatives break exactly one of the two conditions
        const bool motif = label || rng.coin();
        const bool signals = label || !motif;
        ok = detail::place_motif(types, adj, motif, rng.integer(spec.motif_min, spec.motif_max), rng) &&
             detail::place_signals(types, adj, signals, rng.integer(spec.signal_min, spec.signal_max),
                                   spec.min_hops, rng);
        break;
      }
    }
    if (!ok) continue;

    GeneratedBag g;
    g.types = std::move(types);
    g.record.name = std::string(to_string(spec.task)) + "_" + std::to_string(index);
    g.record.label = label ? 1 : 0;
    g.record.n = static_cast<std::uint32_t>(n);
    g.record.d_in = static_cast<std::uint32_t>(spec.d_in);
    g.record.coords.reserve(2 * n);
    for (const auto& p : coords) {
      g.record.coords.push_back(static_cast<float>(p.x));
      g.record.coords.push_back(static_cast<float>(p.y));
    }
    g.record.features = instance_features(g.types, spec.d_in, spec.noise, rng);
    return g;
  }
  throw GenerationError("could not place instances for bag " + std::to_string(index) + " after " +
                        std::to_string(spec.max_retries) + " attempts");
}

/// Split sizes for `n` items under the spec's ratio (largest-remainder rounding).
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SynthSpec& spec) {
  const double total = spec.split_train + spec.split_val + spec.split_test;
  const double raw[3] = {n * spec.split_train / total, n * spec.split_val / total, n * spec.split_test / total};
  std::array<std::size_t, 3> out{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) used += (out[i] = static_cast<std::size_t>(std::floor(raw[i])));
  while (used < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (raw[i] - out[i] > raw[best] - out[best]) best = i;
    ++out[best];
    ++used;
  }
  return out;
}

/// Full dataset: labels alternate with the bag index (classes balanced within
/// one bag) and each class is split train/val/test separately.
inline BagDataset generate_dataset(const SynthSpec& spec) {
  spec.validate();
  BagDataset ds;
  ds.task = std::string(to_string(spec.task));
  ds.class_names = {"negative", "positive"};
  ds.d_in = static_cast<std::uint32_t>(spec.d_in);
  std::vector<std::vector<std::size_t>> by_class(2);
  for (std::size_t i = 0; i < spec.n_bags; ++i) by_class[i % 2].push_back(i);
  Rng split_rng(derive_seed(spec.seed, std::numeric_limits<std::uint64_t>::max()));
  std::vector<std::pair<std::size_t, int>> assignment;  // (bag index, split)
  for (auto& idx : by_class) {
    split_rng.shuffle(idx.begin(), idx.end());
    const auto sz = split_sizes(idx.size(), spec);
    for (std::size_t j = 0; j < idx.size(); ++j)
      assignment.emplace_back(idx[j], j < sz[0] ? 0 : j < sz[0] + sz[1] ? 1 : 2);
  }
  std::sort(assignment.begin(), assignment.end());
  for (const auto& [i, split] : assignment) {
    auto bag = generate_bag(spec, i, i % 2 == 1).record;
    (split == 0 ? ds.train : split == 1 ? ds.val : ds.test).push_back(std::move(bag));
  }
  return ds;
}

}  // namespace igt
