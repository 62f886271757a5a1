#pragma once

// Bag files, one per bag:
//   "IGTB" | u32 N | u32 d_in | u32 label | N × (f32 x, f32 y) | N×d_in f32 features
// all little-endian. A dataset is a directory holding bag files plus a JSON
// manifest with the class names, d_in and per-split lists of bag paths
// (relative to the manifest).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "igt/detail/binary_io.hpp"
#include "igt/graph.hpp"

namespace igt {

struct BagRecord {
  std::string name;
  std::uint32_t label = 0;
  std::uint32_t n = 0;
  std::uint32_t d_in = 0;
  std::vector<float> coords;    // 2N, interleaved x,y
  std::vector<float> features;  // N×d_in row-major

  bool operator==(const BagRecord& o) const {
    return label == o.label && n == o.n && d_in == o.d_in && coords == o.coords && features == o.features;
  }

  std::vector<Point2> points() const {
    std::vector<Point2> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = {coords[2 * i], coords[2 * i + 1]};
    return p;
  }

  template <typename T>
  Tensor<T> feature_tensor() const {
    return Tensor<T>(n, d_in, std::vector<T>(features.begin(), features.end()));
  }
};

template <typename T>
WsiGraph<T> to_graph(const BagRecord& b, const GraphConfig& cfg) {
  return build_graph(b.feature_tensor<T>(), b.points(), b.label, cfg, b.name);
}

inline void write_bag(std::ostream& os, const BagRecord& b) {
  if (b.coords.size() != 2 * std::size_t{b.n} || b.features.size() != std::size_t{b.n} * b.d_in)
    throw IngestionError(b.name + ": buffers inconsistent with N=" + std::to_string(b.n) +
                         ", d_in=" + std::to_string(b.d_in));
  os.write("IGTB", 4);
  detail::put_le(os, b.n);
  detail::put_le(os, b.d_in);
  detail::put_le(os, b.label);
  for (float v : b.coords) detail::put_f32(os, v);
  for (float v : b.features) detail::put_f32(os, v);
}

inline void write_bag(const std::string& path, const BagRecord& b) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IngestionError("cannot open bag for writing: " + path);
  write_bag(os, b);
  if (!os) throw IngestionError("failed writing bag: " + path);
}

inline BagRecord parse_bag(const std::string& bytes, const std::string& source) {
  detail::ByteReader r(bytes, source);
  if (!r.has(16))
    throw IngestionError(source + ": truncated header, expected 16 bytes, got " + std::to_string(bytes.size()) +
                         " at byte offset 0");
  if (r.get_bytes(4) != "IGTB") throw IngestionError(source + ": bad magic (expected IGTB) at byte offset 0");
  BagRecord b;
  b.name = source;
  b.n = r.get_le<std::uint32_t>();
  b.d_in = r.get_le<std::uint32_t>();
  b.label = r.get_le<std::uint32_t>();
  const std::uint64_t expected = 16 + 4ull * (2ull * b.n + std::uint64_t{b.n} * b.d_in);
  if (bytes.size() != expected)
    throw IngestionError(source + ": length mismatch, expected " + std::to_string(expected) + " bytes, got " +
                         std::to_string(bytes.size()) + " (data starts at byte offset 16)");
  b.coords.resize(2 * std::size_t{b.n});
  for (auto& v : b.coords) v = r.get_f32();
  b.features.resize(std::size_t{b.n} * b.d_in);
  for (auto& v : b.features) v = r.get_f32();
  return b;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IngestionError("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline BagRecord read_bag(const std::string& path) { return parse_bag(read_file_bytes(path), path); }

struct BagDataset {
  std::string task;
  std::vector<std::string> class_names;
  std::uint32_t d_in = 0;
  std::vector<BagRecord> train, val, test;

  std::size_t n_classes() const { return class_names.size(); }
  std::size_t n_bags() const { return train.size() + val.size() + test.size(); }

  const std::vector<BagRecord>& split(std::string_view s) const {
    if (s == "train") return train;
    if (s == "val") return val;
    if (s == "test") return test;
    throw ConfigError("unknown split '" + std::string(s) + "' (expected train, val or test)");
  }
};

/// Writes `dir`/manifest.json and `dir`/bags/<split>_<index>.igtb.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, const BagDataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "bags");
  nlohmann::ordered_json m;
  m["format"] = "igt-dataset-1";
  m["task"] = ds.task;
  m["classes"] = ds.class_names;
  m["d_in"] = ds.d_in;
  nlohmann::ordered_json splits = nlohmann::ordered_json::object();
  for (const char* s : {"train", "val", "test"}) {
    const auto& bags = ds.split(s);
    auto arr = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < bags.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "bags/%s_%05zu.igtb", s, i);
      write_bag((dir / buf).string(), bags[i]);
      arr.push_back(buf);
    }
    splits[s] = std::move(arr);
  }
  m["splits"] = std::move(splits);
  const fs::path manifest = dir / "manifest.json";
  std::ofstream os(manifest);
  if (!os) throw IngestionError("cannot write manifest " + manifest.string());
  os << m.dump(2) << "\n";
  return manifest;
}

/// Loads a manifest and every bag it references.
inline BagDataset load_dataset(const std::filesystem::path& manifest_path) {
  namespace fs = std::filesystem;
  fs::path mp = manifest_path;
  if (fs::is_directory(mp)) mp /= "manifest.json";
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file_bytes(mp.string()));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(mp.string() + ": invalid manifest JSON: " + e.what());
  }
  BagDataset ds;
  try {
    ds.task = m.value("task", "");
    ds.class_names = m.at("classes").get<std::vector<std::string>>();
    ds.d_in = m.at("d_in").get<std::uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(mp.string() + ": manifest missing or invalid key: " + e.what());
  }
  if (ds.class_names.size() < 2) throw IngestionError(mp.string() + ": manifest needs at least 2 classes");
  const fs::path base = mp.parent_path();
  for (const char* s : {"train", "val", "test"}) {
    auto& dst = s == std::string_view("train") ? ds.train : s == std::string_view("val") ? ds.val : ds.test;
    if (!m.contains("splits") || !m["splits"].contains(s)) continue;
    for (const auto& rel : m["splits"][s]) {
      const fs::path p = base / rel.get<std::string>();
      if (!fs::exists(p)) throw IngestionError(mp.string() + ": referenced bag file not found: " + p.string());
      BagRecord b = read_bag(p.string());
      if (b.d_in != ds.d_in)
        throw IngestionError(p.string() + ": d_in " + std::to_string(b.d_in) + " differs from manifest " +
                             std::to_string(ds.d_in));
      if (b.label >= ds.class_names.size())
        throw IngestionError(p.string() + ": label " + std::to_string(b.label) + " out of range");
      b.name = rel.get<std::string>();
      dst.push_back(std::move(b));
    }
  }
  return ds;
}

}  // namespace igt
