#pragma once

// Training configuration and its flat `key = value` text form. Lines starting
// with '#' and blank lines are ignored; unknown keys are rejected.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "igt/attention.hpp"
#include "igt/graph.hpp"
#include "igt/layers.hpp"

namespace igt {

enum class Precision { F32, F64 };

inline std::string_view to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }
inline Precision parse_precision(std::string_view s) {
  if (s == "f32") return Precision::F32;
  if (s == "f64") return Precision::F64;
  throw ConfigError("unknown precision '" + std::string(s) + "' (expected f32 or f64)");
}

inline std::string_view to_string(AttentionKernel k) { return k == AttentionKernel::Naive ? "naive" : "tiled"; }
inline AttentionKernel parse_attention_kernel(std::string_view s) {
  if (s == "naive") return AttentionKernel::Naive;
  if (s == "tiled") return AttentionKernel::Tiled;
  throw ConfigError("unknown attention kernel '" + std::string(s) + "' (expected naive or tiled)");
}

inline std::string_view to_string(KnnSpace s) { return s == KnnSpace::Spatial ? "spatial" : "feature"; }
inline KnnSpace parse_knn_space(std::string_view s) {
  if (s == "spatial") return KnnSpace::Spatial;
  if (s == "feature") return KnnSpace::Feature;
  throw ConfigError("unknown knn_space '" + std::string(s) + "' (expected spatial or feature)");
}

struct TrainConfig {
  // model
  std::size_t d = 256;
  std::size_t d_in = 0;  // 0: taken from the dataset
  std::size_t n_blocks = 2;
  std::size_t n_heads = 8;
  std::size_t d_att = 128;
  double genconv_beta = 1.0;
  double genconv_epsilon = 1e-7;
  BlockMode mode = BlockMode::Full;
  AttentionKernel attention_kernel = AttentionKernel::Naive;
  std::size_t attention_block = 128;
  // graph
  std::size_t k = 8;
  KnnSpace knn_space = KnnSpace::Spatial;
  // optimization
  std::size_t epochs = 40;
  double lr_initial = 1e-3;
  double lr_decayed = 1e-4;
  std::size_t decay_epoch = 20;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 1;
  // run
  std::uint64_t seed = 0;
  Precision precision = Precision::F32;
  std::size_t repeats = 3;
  // Background-patch filter level of the slide pipeline. Recorded only; bags
  // arrive as precomputed features.
  double saturation_threshold = 15;

  /// Per-dataset schedules: "nsclc" (40 epochs, decay at 20, 2 blocks),
  /// "rcc" (40, 15, 2 blocks) and "bright" (30, 15, 3 blocks).
  static TrainConfig preset(std::string_view name) {
    TrainConfig c;
    if (name == "nsclc") {
      c.epochs = 40, c.decay_epoch = 20, c.n_blocks = 2;
    } else if (name == "rcc") {
      c.epochs = 40, c.decay_epoch = 15, c.n_blocks = 2;
    } else if (name == "bright") {
      c.epochs = 30, c.decay_epoch = 15, c.n_blocks = 3;
    } else {
      throw ConfigError("unknown preset '" + std::string(name) + "' (expected nsclc, rcc or bright)");
    }
    return c;
  }

  void validate() const {
    auto positive = [](std::size_t v, const char* key) {
      if (v == 0) throw ConfigError(std::string(key) + " must be positive");
    };
    positive(d, "d");
    positive(n_blocks, "n_blocks");
    positive(n_heads, "n_heads");
    positive(d_att, "d_att");
    positive(attention_block, "attention_block");
    positive(k, "k");
    positive(epochs, "epochs");
    positive(repeats, "repeats");
    if (d % n_heads != 0) throw ConfigError("d must be divisible by n_heads");
    if (d < 2) throw ConfigError("d must be at least 2");
    if (batch_size != 1) throw ConfigError("batch_size must be 1 (one bag per optimizer step)");
    if (!(lr_initial > 0) || !(lr_decayed > 0)) throw ConfigError("learning rates must be positive");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be nonnegative");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1)) throw ConfigError("beta1/beta2 must lie in [0,1)");
    if (!(adam_eps > 0) || !(genconv_epsilon > 0)) throw ConfigError("epsilons must be positive");
    if (!std::isfinite(genconv_beta)) throw ConfigError("genconv_beta must be finite");
  }

  bool operator==(const TrainConfig&) const = default;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct ConfigField {
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

inline std::size_t parse_count(const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected a nonnegative integer, got '" + v + "'");
  return out;
}

inline double parse_real(const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw ConfigError("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("expected a real number, got '" + v + "'");
  }
}

/// Ordered key table shared by parsing and serialization.
inline const std::vector<std::pair<std::string, ConfigField>>& config_fields() {
  using C = TrainConfig;
  auto count = [](std::size_t C::*m) {
    return ConfigField{[m](const C& c) { return std::to_string(c.*m); },
                       [m](C& c, const std::string& v) { c.*m = parse_count(v); }};
  };
  auto real = [](double C::*m) {
    return ConfigField{[m](const C& c) { return fmt_double(c.*m); },
                       [m](C& c, const std::string& v) { c.*m = parse_real(v); }};
  };
  static const std::vector<std::pair<std::string, ConfigField>> fields = {
      {"d", count(&C::d)},
      {"d_in", count(&C::d_in)},
      {"n_blocks", count(&C::n_blocks)},
      {"n_heads", count(&C::n_heads)},
      {"d_att", count(&C::d_att)},
      {"genconv_beta", real(&C::genconv_beta)},
      {"genconv_epsilon", real(&C::genconv_epsilon)},
      {"mode", {[](const C& c) { return std::string(to_string(c.mode)); },
                [](C& c, const std::string& v) { c.mode = parse_block_mode(v); }}},
      {"attention_kernel", {[](const C& c) { return std::string(to_string(c.attention_kernel)); },
                            [](C& c, const std::string& v) { c.attention_kernel = parse_attention_kernel(v); }}},
      {"attention_block", count(&C::attention_block)},
      {"k", count(&C::k)},
      {"knn_space", {[](const C& c) { return std::string(to_string(c.knn_space)); },
                     [](C& c, const std::string& v) { c.knn_space = parse_knn_space(v); }}},
      {"epochs", count(&C::epochs)},
      {"lr_initial", real(&C::lr_initial)},
      {"lr_decayed", real(&C::lr_decayed)},
      {"decay_epoch", count(&C::decay_epoch)},
      {"weight_decay", real(&C::weight_decay)},
      {"beta1", real(&C::beta1)},
      {"beta2", real(&C::beta2)},
      {"adam_eps", real(&C::adam_eps)},
      {"batch_size", count(&C::batch_size)},
      {"seed", {[](const C& c) { return std::to_string(c.seed); },
                [](C& c, const std::string& v) { c.seed = parse_count(v); }}},
      {"precision", {[](const C& c) { return std::string(to_string(c.precision)); },
                     [](C& c, const std::string& v) { c.precision = parse_precision(v); }}},
      {"repeats", count(&C::repeats)},
      {"saturation_threshold", real(&C::saturation_threshold)},
  };
  return fields;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::config_fields()) keys.push_back(k);
  return keys;
}

/// Applies one `key`/`value` pair; throws ConfigError for unknown keys or bad values.
inline void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [k, f] : detail::config_fields()) {
    if (k != key) continue;
    try {
      f.set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("key '" + key + "': " + e.what());
    }
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

inline std::string serialize_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : detail::config_fields()) out += k + " = " + f.get(cfg) + "\n";
  return out;
}

/// Parses `key = value` lines on top of `base`. Errors carry `source:line`.
inline TrainConfig parse_config(std::string_view text, const std::string& source = "<config>",
                                TrainConfig base = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + t + "'");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    try {
      if (key == "preset") {
        base = TrainConfig::preset(value);
        continue;
      }
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  return base;
}

inline TrainConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

/// FNV-1a over the serialized form.
inline std::uint64_t config_hash(const TrainConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : serialize_config(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace igt
