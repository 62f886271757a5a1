#pragma once

// Little-endian scalar encoding independent of host byte order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace igt::detail {

template <typename U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_unsigned_v<U>);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

inline void put_f32(std::ostream& os, float f) { put_le(os, std::bit_cast<std::uint32_t>(f)); }
inline void put_f64(std::ostream& os, double f) { put_le(os, std::bit_cast<std::uint64_t>(f)); }

/// Reads from an in-memory byte buffer, tracking the offset for error messages.
class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }
  const std::string& source() const { return source_; }

  /// False if fewer than n bytes remain.
  bool has(std::size_t n) const { return remaining() >= n; }

  template <typename U>
  U get_le() {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
  double get_f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }
  std::string get_bytes(std::size_t n) {
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace igt::detail
