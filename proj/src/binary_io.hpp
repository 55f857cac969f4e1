// SPDX-License-Identifier: Apache-2.0
//
// Little-endian primitives shared by the RSAE1 and RSAG1 codecs.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rsaprobe/errors.hpp"

namespace rsaprobe::detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f32s(std::string& out, std::span<const float> values) {
  const std::size_t base = out.size();
  out.resize(base + values.size() * 4);
  char* dst = out.data() + base;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(dst, values.data(), values.size() * 4);
  } else {
    for (float f : values) {
      const auto bits = std::bit_cast<std::uint32_t>(f);
      for (int i = 0; i < 4; ++i) *dst++ = static_cast<char>((bits >> (8 * i)) & 0xFFu);
    }
  }
}

/// Bounds-checked cursor over an in-memory file image. Every failure is a
/// FormatError carrying the offset where the read was attempted.
class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t offset() const noexcept { return pos_; }
  std::uint64_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::uint64_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated file: expected ") + what, pos_);
    }
  }

  std::string_view take(std::uint64_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(take(1, what)[0]); }

  std::uint32_t u32(const char* what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(s[i]);
    return v;
  }

  std::uint64_t u64(const char* what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(s[i]);
    return v;
  }

  std::vector<float> f32s(std::uint64_t count, const char* what) {
    if (count > remaining() / 4) {
      throw FormatError(std::string("truncated file: expected ") + what, pos_);
    }
    auto s = take(count * 4, what);
    std::vector<float> out(count);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(out.data(), s.data(), count * 4);
    } else {
      for (std::uint64_t k = 0; k < count; ++k) {
        std::uint32_t bits = 0;
        for (int i = 3; i >= 0; --i) bits = (bits << 8) | static_cast<std::uint8_t>(s[k * 4 + i]);
        out[k] = std::bit_cast<float>(bits);
      }
    }
    return out;
  }

 private:
  std::string_view bytes_;
  std::uint64_t pos_ = 0;
};

/// Appends `u32 length` + newline-joined ids.
void put_id_block(std::string& out, std::span<const std::string> ids);

/// Parses an id block and checks it holds exactly `expected` ids.
std::vector<std::string> read_id_block(Reader& in, std::uint64_t expected);

std::string slurp(const std::string& path);
void spit(const std::string& path, std::string_view bytes);

}  // namespace rsaprobe::detail
