#pragma once

// Little-endian primitives shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>

#include "lmloc/error.hpp"

namespace lmloc::byte_io {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

/// Reads bytes while tracking the absolute offset so errors can point at it.
class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  template <typename T>
  T read_le(std::string_view what) {
    unsigned char bytes[sizeof(T)];
    read_bytes(bytes, sizeof(T), what);
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }

  void read_bytes(void* dst, std::size_t count, std::string_view what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(count));
    const auto got = static_cast<std::uint64_t>(in_.gcount());
    if (got != count) {
      fail(ErrorCategory::format, source_ + ": truncated " + std::string(what) + " at byte offset " +
                                      std::to_string(offset_ + got));
    }
    offset_ += count;
  }

  void expect_magic(std::string_view magic) {
    std::string got(magic.size(), '\0');
    in_.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (static_cast<std::size_t>(in_.gcount()) != magic.size() || got != magic) {
      fail(ErrorCategory::format, source_ + ": bad magic at byte offset 0, expected \"" +
                                      std::string(magic) + "\"");
    }
    offset_ += magic.size();
  }

  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      fail(ErrorCategory::format,
           source_ + ": unexpected trailing data at byte offset " + std::to_string(offset_));
    }
  }

  std::uint64_t offset() const { return offset_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  std::uint64_t offset_ = 0;
};

}  // namespace lmloc::byte_io
