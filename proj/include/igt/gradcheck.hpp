#pragma once

// Central finite-difference gradient checks (64-bit only).

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "igt/model.hpp"
#include "igt/rng.hpp"

namespace igt {

struct GradcheckOptions {
  double step = 1e-5;
  double threshold = 1e-4;
};

struct GradcheckResult {
  std::string component;
  double max_rel_error = 0;
  std::string worst;  // "<tensor>[index]" of the largest error
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t n_checked = 0;
  bool passed = true;
};

using Wrt = std::vector<std::pair<std::string, Tensor<double>>>;

inline double gradcheck_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

/// Compares the tape gradient of the scalar `loss_fn()` with respect to every
/// element of every tensor in `wrt` against (L(x+h) - L(x-h)) / 2h.
inline GradcheckResult gradcheck(const std::string& component, const std::function<Tensor<double>()>& loss_fn,
                                 Wrt wrt, const GradcheckOptions& opt = {}) {
  GradcheckResult res;
  res.component = component;
  for (auto& [_, t] : wrt) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor<double> loss = loss_fn();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& [_, t] : wrt) analytic.emplace_back(t.grad().begin(), t.grad().end());
  for (auto& [_, t] : wrt) t.set_requires_grad(false);

  for (std::size_t w = 0; w < wrt.size(); ++w) {
    auto& [name, t] = wrt[w];
    auto x = t.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + opt.step;
      const double lp = loss_fn().data()[0];
      x[i] = orig - opt.step;
      const double lm = loss_fn().data()[0];
      x[i] = orig;
      const double numeric = (lp - lm) / (2 * opt.step);
      const double err = gradcheck_rel_error(analytic[w][i], numeric);
      ++res.n_checked;
      if (!(err <= res.max_rel_error) || res.worst.empty()) {
        if (!(err <= res.max_rel_error)) res.max_rel_error = err;
        res.worst = name + "[" + std::to_string(i) + "]";
        res.worst_analytic = analytic[w][i];
        res.worst_numeric = numeric;
      }
    }
  }
  res.passed = std::isfinite(res.max_rel_error) && res.max_rel_error < opt.threshold;
  return res;
}

namespace detail {

inline Tensor<double> random_tensor(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Tensor<double> t(r, c);
  for (auto& v : t.data()) v = scale * rng.normal();
  return t;
}

/// Random symmetric graph without self-loops; some nodes may be isolated.
inline Csr random_graph(Rng& rng, std::size_t n, double p = 0.4) {
  std::vector<std::vector<std::uint32_t>> lists(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform(0.0, 1.0) < p) {
        lists[i].push_back(static_cast<std::uint32_t>(j));
        lists[j].push_back(static_cast<std::uint32_t>(i));
      }
  return Csr::from_adjacency_lists(lists);
}

/// Projects an output onto a fixed random direction so every output element
/// contributes to the scalar loss.
inline Tensor<double> project(const Tensor<double>& out, const Tensor<double>& dir) { return sum(mul(out, dir)); }

inline void add_linear(Wrt& w, const std::string& prefix, const Linear<double>& l) {
  w.emplace_back(prefix + ".weight", l.weight);
  w.emplace_back(prefix + ".bias", l.bias);
}

}  // namespace detail

struct GradcheckSuiteOptions {
  std::uint64_t seed = 2;
  std::vector<std::size_t> sizes{1, 2, 6};
  std::size_t d_in = 5;
  std::size_t d = 8;
  std::size_t n_heads = 2;
  std::size_t d_att = 4;
  std::size_t n_classes = 3;
  GradcheckOptions check{};
};

/// Every layer in isolation plus the full model, once per bag size.
inline std::vector<GradcheckResult> gradcheck_suite(const GradcheckSuiteOptions& o = {}) {
  using detail::project;
  using detail::random_tensor;
  std::vector<GradcheckResult> out;
  ModelShape shape;
  shape.d_in = o.d_in;
  shape.d = o.d;
  shape.n_blocks = 2;
  shape.n_heads = o.n_heads;
  shape.d_att = o.d_att;
  shape.n_classes = o.n_classes;

  for (std::size_t n : o.sizes) {
    Rng rng(derive_seed(o.seed, n));
    const std::string tag = " (N=" + std::to_string(n) + ")";
    IgtModel<double> m = IgtModel<double>::init(shape, rng.engine()());
    // Nonzero biases so their gradients are exercised away from the init point.
    for (auto& e : m.entries())
      if (e.tensor->rows() == 1)
        for (auto& v : e.tensor->data()) v = 0.1 * rng.normal();
    // A projected column that is zero on every node reaches GENConv only
    // through epsilon, giving ~1e-9 gradients below finite-difference
    // resolution; shift the projection so all columns stay active.
    for (auto& v : m.input.bias.data()) v += 1.0;
    const Csr adj = detail::random_graph(rng, n);
    Tensor<double> x_in = random_tensor(rng, n, o.d_in);
    Tensor<double> h = random_tensor(rng, n, o.d);
    const Tensor<double> dir_d = random_tensor(rng, n, o.d);
    const auto& blk = m.blocks.front();
    const std::size_t block = std::max<std::size_t>(1, n / 2);

    {
      Wrt w{{"x", x_in}};
      detail::add_linear(w, "input", m.input);
      out.push_back(gradcheck("input_projection" + tag,
                              [&] { return project(input_projection(x_in, m.input), dir_d); }, w, o.check));
    }
    {
      Wrt w{{"h", h}};
      detail::add_linear(w, "mlp1", blk.gcn.mlp1);
      detail::add_linear(w, "mlp2", blk.gcn.mlp2);
      out.push_back(gradcheck("genconv" + tag, [&] { return project(genconv_forward(h, adj, blk.gcn), dir_d); }, w,
                              o.check));
    }
    const Wrt attn_w{{"h", h}, {"wq", blk.attn.wq}, {"wk", blk.attn.wk}, {"wv", blk.attn.wv}, {"wo", blk.attn.wo}};
    out.push_back(gradcheck("attention_naive" + tag,
                            [&] { return project(attention_naive(h, blk.attn), dir_d); }, attn_w, o.check));
    out.push_back(gradcheck("attention_tiled" + tag,
                            [&] { return project(attention_tiled(h, blk.attn, block), dir_d); }, attn_w, o.check));
    {
      Wrt w = attn_w;
      detail::add_linear(w, "mlp1", blk.gcn.mlp1);
      detail::add_linear(w, "mlp2", blk.gcn.mlp2);
      out.push_back(gradcheck("gti_block" + tag,
                              [&] { return project(gti_block_forward(h, adj, blk, BlockMode::Full, {}), dir_d); }, w,
                              o.check));
    }
    {
      const Tensor<double> dir_bag = random_tensor(rng, 1, o.d);
      Wrt w{{"h", h}, {"v_att", m.pool.v_att}, {"w_att", m.pool.w_att}};
      out.push_back(gradcheck("attention_pool" + tag,
                              [&] { return project(attention_pool(h, m.pool).h_bag, dir_bag); }, w, o.check));
    }
    {
      Tensor<double> hb = random_tensor(rng, 1, o.d);
      Wrt w{{"h_bag", hb}};
      detail::add_linear(w, "fc1", m.classifier.fc1);
      detail::add_linear(w, "fc2", m.classifier.fc2);
      const std::size_t label = n % o.n_classes;
      out.push_back(gradcheck("classifier" + tag,
                              [&] { return cross_entropy(classify(hb, m.classifier), label); }, w, o.check));
    }
    {
      Wrt w;
      for (auto& e : m.entries()) w.emplace_back(e.name, *e.tensor);
      const std::size_t label = (n + 1) % o.n_classes;
      ForwardOptions fo;
      fo.attention.kernel = AttentionKernel::Tiled;
      fo.attention.block = block;
      out.push_back(gradcheck("full_model" + tag,
                              [&] { return cross_entropy(model_forward(m, x_in, adj, fo).logits, label); }, w,
                              o.check));
    }
  }
  return out;
}

}  // namespace igt
