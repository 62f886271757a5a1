#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "igt/layers.hpp"
#include "igt/mil_head.hpp"
#include "igt/rng.hpp"

namespace igt {

struct ModelShape {
  std::size_t d_in = 1024;
  std::size_t d = 256;
  std::size_t n_blocks = 2;
  std::size_t n_heads = 8;
  std::size_t d_att = 128;
  std::size_t n_classes = 2;
  double genconv_beta = 1.0;
  double genconv_epsilon = 1e-7;

  bool operator==(const ModelShape&) const = default;
};

/// Every learnable tensor of the network: input projection, L GTI blocks,
/// pooling scorer and bag classifier.
template <typename T>
struct IgtModel {
  ModelShape shape;
  Linear<T> input;
  std::vector<GtiBlockParams<T>> blocks;
  PoolingParams<T> pool;
  ClassifierParams<T> classifier;

  struct Entry {
    std::string name;
    Tensor<T>* tensor;
    bool gcn_branch;
    bool attn_branch;
  };

  /// Stable checkpoint order and names.
  std::vector<Entry> entries() {
    std::vector<Entry> out;
    out.push_back({"input.weight", &input.weight, false, false});
    out.push_back({"input.bias", &input.bias, false, false});
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      const std::string b = "blocks." + std::to_string(l);
      auto& gb = blocks[l];
      out.push_back({b + ".gcn.mlp1.weight", &gb.gcn.mlp1.weight, true, false});
      out.push_back({b + ".gcn.mlp1.bias", &gb.gcn.mlp1.bias, true, false});
      out.push_back({b + ".gcn.mlp2.weight", &gb.gcn.mlp2.weight, true, false});
      out.push_back({b + ".gcn.mlp2.bias", &gb.gcn.mlp2.bias, true, false});
      out.push_back({b + ".attn.wq", &gb.attn.wq, false, true});
      out.push_back({b + ".attn.wk", &gb.attn.wk, false, true});
      out.push_back({b + ".attn.wv", &gb.attn.wv, false, true});
      out.push_back({b + ".attn.wo", &gb.attn.wo, false, true});
    }
    out.push_back({"pool.v_att", &pool.v_att, false, false});
    out.push_back({"pool.w_att", &pool.w_att, false, false});
    out.push_back({"classifier.fc1.weight", &classifier.fc1.weight, false, false});
    out.push_back({"classifier.fc1.bias", &classifier.fc1.bias, false, false});
    out.push_back({"classifier.fc2.weight", &classifier.fc2.weight, false, false});
    out.push_back({"classifier.fc2.bias", &classifier.fc2.bias, false, false});
    return out;
  }

  /// Parameters that receive gradient under `mode`, in entries() order.
  std::pair<std::vector<Tensor<T>>, std::vector<std::string>> trainable(BlockMode mode) {
    std::vector<Tensor<T>> ps;
    std::vector<std::string> names;
    for (auto& e : entries()) {
      if (e.gcn_branch && mode == BlockMode::NoGcn) continue;
      if (e.attn_branch && mode == BlockMode::NoAttn) continue;
      ps.push_back(*e.tensor);
      names.push_back(e.name);
    }
    return {std::move(ps), std::move(names)};
  }

  void set_requires_grad(bool on) {
    for (auto& e : entries()) e.tensor->set_requires_grad(on);
  }
  void zero_grad() {
    for (auto& e : entries()) e.tensor->zero_grad();
  }

  /// Deep copy of all values (no grad).
  IgtModel clone() const {
    IgtModel out = *this;
    for (auto& e : out.entries()) *e.tensor = e.tensor->detach();
    return out;
  }

  /// Glorot-uniform weights and zero biases, drawn in entries() order from a
  /// single stream, so every mode gets identical shared parameters.
  static IgtModel init(const ModelShape& s, std::uint64_t seed) {
    if (s.n_heads == 0 || s.d % s.n_heads != 0)
      throw ConfigError("d=" + std::to_string(s.d) + " must be divisible by n_heads=" + std::to_string(s.n_heads));
    if (s.d < 2 || s.d_in == 0 || s.n_classes < 2 || s.d_att == 0 || s.n_blocks == 0)
      throw ConfigError("model dimensions must be positive (d >= 2, at least 2 classes, at least 1 block)");
    IgtModel m;
    m.shape = s;
    auto lin = [](std::size_t in, std::size_t out) {
      return Linear<T>{Tensor<T>(in, out), Tensor<T>(1, out)};
    };
    m.input = lin(s.d_in, s.d);
    for (std::size_t l = 0; l < s.n_blocks; ++l) {
      GtiBlockParams<T> b;
      b.gcn.mlp1 = lin(s.d, s.d);
      b.gcn.mlp2 = lin(s.d, s.d);
      b.gcn.beta = static_cast<T>(s.genconv_beta);
      b.gcn.epsilon = static_cast<T>(s.genconv_epsilon);
      b.attn.wq = Tensor<T>(s.d, s.d);
      b.attn.wk = Tensor<T>(s.d, s.d);
      b.attn.wv = Tensor<T>(s.d, s.d);
      b.attn.wo = Tensor<T>(s.d, s.d);
      b.attn.n_heads = s.n_heads;
      m.blocks.push_back(std::move(b));
    }
    m.pool.v_att = Tensor<T>(s.d, s.d_att);
    m.pool.w_att = Tensor<T>(s.d_att, 1);
    m.classifier.fc1 = lin(s.d, s.d / 2);
    m.classifier.fc2 = lin(s.d / 2, s.n_classes);

    Rng rng(seed);
    for (auto& e : m.entries()) {
      Tensor<T>& t = *e.tensor;
      if (t.rows() == 1 && e.name.ends_with("bias")) continue;
      const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
    }
    return m;
  }
};

struct ForwardOptions {
  BlockMode mode = BlockMode::Full;
  AttentionOptions attention{};
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;  // 1×C
  Tensor<T> alpha;   // N×1
  Tensor<T> node_features;  // output of the last block
};

template <typename T>
ForwardResult<T> model_forward(const IgtModel<T>& m, const Tensor<T>& features, const Csr& adj,
                               const ForwardOptions& opt = {}) {
  if (features.cols() != m.shape.d_in)
    throw DimensionError("model expects d_in=" + std::to_string(m.shape.d_in) + ", bag has " +
                         features.shape());
  Tensor<T> h = input_projection(features, m.input);
  for (const auto& b : m.blocks) h = gti_block_forward(h, adj, b, opt.mode, opt.attention);
  auto pooled = attention_pool(h, m.pool);
  return {classify(pooled.h_bag, m.classifier), std::move(pooled.alpha), std::move(h)};
}

}  // namespace igt
