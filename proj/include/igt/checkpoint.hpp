#pragma once

// Parameter checkpoints:
//   "IGT1" | u8 element size (4 = f32, 8 = f64) |
//   repeated { u16 name_len | name (UTF-8) | u32 rows | u32 cols | rows*cols LE values }
// Optimizer state is not stored; training resumes with fresh moments.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "igt/detail/binary_io.hpp"
#include "igt/model.hpp"

namespace igt {

struct CheckpointTensor {
  std::string name;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> values;  // widened; f32 values convert exactly
};

struct Checkpoint {
  std::uint8_t element_size = 4;
  std::vector<CheckpointTensor> tensors;
};

template <typename T>
void write_checkpoint(std::ostream& os, IgtModel<T>& model) {
  os.write("IGT1", 4);
  os.put(static_cast<char>(sizeof(T)));
  for (auto& e : model.entries()) {
    if (e.name.size() > 0xFFFF) throw ContractError("parameter name too long: " + e.name);
    detail::put_le(os, static_cast<std::uint16_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::put_le(os, static_cast<std::uint32_t>(e.tensor->rows()));
    detail::put_le(os, static_cast<std::uint32_t>(e.tensor->cols()));
    for (T v : e.tensor->data()) {
      if constexpr (sizeof(T) == 4)
        detail::put_f32(os, v);
      else
        detail::put_f64(os, v);
    }
  }
}

template <typename T>
void save_checkpoint(const std::string& path, IgtModel<T>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open checkpoint for writing: " + path);
  write_checkpoint(os, model);
  if (!os) throw Error("failed writing checkpoint: " + path);
}

inline Checkpoint parse_checkpoint(const std::string& bytes, const std::string& source) {
  detail::ByteReader r(bytes, source);
  auto fail = [&](const std::string& what) {
    return LoadError(source + ": " + what + " at byte " + std::to_string(r.offset()));
  };
  if (!r.has(5) || r.get_bytes(4) != "IGT1") throw fail("bad magic (expected IGT1)");
  Checkpoint ck;
  ck.element_size = r.get_le<std::uint8_t>();
  if (ck.element_size != 4 && ck.element_size != 8) throw fail("unknown element type code");
  while (!r.at_end()) {
    CheckpointTensor t;
    if (!r.has(2)) throw fail("truncated name length");
    const auto len = r.get_le<std::uint16_t>();
    if (!r.has(len + 8u)) throw fail("truncated tensor header");
    t.name = r.get_bytes(len);
    t.rows = r.get_le<std::uint32_t>();
    t.cols = r.get_le<std::uint32_t>();
    const std::size_t count = std::size_t{t.rows} * t.cols;
    if (!r.has(count * ck.element_size))
      throw fail("truncated values for '" + t.name + "' (need " + std::to_string(count * ck.element_size) +
                 " bytes, have " + std::to_string(r.remaining()) + ")");
    t.values.resize(count);
    for (auto& v : t.values) v = ck.element_size == 4 ? static_cast<double>(r.get_f32()) : r.get_f64();
    ck.tensors.push_back(std::move(t));
  }
  return ck;
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("cannot open checkpoint: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_checkpoint(ss.str(), path);
}

/// Copies checkpoint values into `model`. Every model parameter must be
/// present with a matching shape and no extra names may appear.
template <typename T>
void load_into(IgtModel<T>& model, const Checkpoint& ck) {
  std::map<std::string, const CheckpointTensor*> by_name;
  for (const auto& t : ck.tensors) by_name[t.name] = &t;
  std::vector<std::string> problems;
  auto entries = model.entries();
  for (auto& e : entries) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) {
      problems.push_back("missing " + e.name);
      continue;
    }
    const auto& t = *it->second;
    if (t.rows != e.tensor->rows() || t.cols != e.tensor->cols())
      problems.push_back("shape " + e.name + " " + shape_str(t.rows, t.cols) + " != " + e.tensor->shape());
    by_name.erase(it);
  }
  for (const auto& [name, _] : by_name) problems.push_back("unexpected " + name);
  if (!problems.empty()) {
    std::string msg = "checkpoint does not match model:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw LoadError(msg);
  }
  for (auto& e : entries) {
    for (const auto& t : ck.tensors) {
      if (t.name != e.name) continue;
      auto dst = e.tensor->data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(t.values[i]);
    }
  }
}

}  // namespace igt
