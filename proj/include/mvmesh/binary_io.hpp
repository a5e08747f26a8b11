#pragma once

// Little-endian scalar encoding shared by the binary file formats.

#include "mvmesh/error.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace mvmesh::binio {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

inline void put_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

/// Reader that reports the byte offset of truncated or malformed fields.
class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  void magic(const char (&expected)[5]) {
    char got[4];
    bytes(got, 4, "magic");
    if (std::string(got, 4) != std::string(expected, 4))
      fail(std::string("bad magic, expected '") + expected + "'");
  }

  std::uint32_t u32(const char* field) {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4, field);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }

  float f32(const char* field) { return std::bit_cast<float>(u32(field)); }

  std::uint8_t u8(const char* field) {
    char c;
    bytes(&c, 1, field);
    return static_cast<std::uint8_t>(c);
  }

  std::string str(std::size_t n, const char* field) {
    std::string s(n, '\0');
    bytes(s.data(), n, field);
    return s;
  }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) fail("trailing bytes after payload");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(name_ + ": byte " + std::to_string(offset_) + ": " + what);
  }

 private:
  void bytes(char* dst, std::size_t n, const char* field) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail(std::string("truncated while reading ") + field);
    offset_ += n;
  }

  std::istream& in_;
  std::string name_;
  std::size_t offset_ = 0;
};

}  // namespace mvmesh::binio
