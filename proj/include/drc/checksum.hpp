#pragma once

#include <zlib.h>

#include <cstdint>
#include <span>
#include <string>

#include <fmt/format.h>

#include "drc/errors.hpp"

namespace drc {

/// CRC-32 with the IEEE 802.3 polynomial.
inline std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = ::crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::string crc_to_hex(std::uint32_t crc) { return fmt::format("{:08x}", crc); }

inline std::uint32_t crc_from_hex(const std::string& hex) {
  if (hex.size() != 8) throw InvalidArgument("crc32 must be 8 hex characters: " + hex);
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(hex, &used, 16);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != 8) throw InvalidArgument("crc32 must be 8 hex characters: " + hex);
  return static_cast<std::uint32_t>(v);
}

}  // namespace drc
