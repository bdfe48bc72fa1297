#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "simtrans/errors.h"

namespace simtrans::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with native little-endian stores");

inline void WriteMagic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void ExpectMagic(std::istream& is, std::string_view magic) {
  std::string got(magic.size(), '\0');
  is.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!is || got != magic) {
    throw DataError("bad magic: expected '" + std::string(magic) + "'");
  }
}

template <typename T>
void Write(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T Read(std::istream& is) {
  T value;
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw DataError("unexpected end of file");
  return value;
}

inline void WriteString(std::ostream& os, std::string_view s) {
  Write<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string ReadString(std::istream& is, std::size_t max_len = 1u << 26) {
  const auto n = Read<std::uint32_t>(is);
  if (n > max_len) throw DataError("string length out of range");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw DataError("unexpected end of file");
  return s;
}

}  // namespace simtrans::io
