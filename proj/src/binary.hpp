#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <type_traits>

#include "rcp/errors.hpp"

namespace rcp::detail {

/// Little-endian scalar I/O independent of host byte order.
template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) <= 8);
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    static_assert(sizeof(T) == 8);
    std::memcpy(&bits, &value, sizeof value);
  } else {
    bits = static_cast<std::uint64_t>(value);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::istream& in) {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw ParseError("unexpected end of binary data");
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  if constexpr (std::is_floating_point_v<T>) {
    T v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace rcp::detail
