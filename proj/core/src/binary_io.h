// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mctse/errors.h"

namespace mctse::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

inline void put_f32(std::ostream& out, float v) { out.write(reinterpret_cast<const char*>(&v), 4); }

class Reader {
 public:
  Reader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw ParseError(what_ + ": truncated file");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  float f32() {
    float v;
    bytes(reinterpret_cast<char*>(&v), 4);
    return v;
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(what_ + ": " + msg); }

 private:
  std::istream& in_;
  std::string what_;
};

}  // namespace mctse::detail
