#pragma once

// Arithmetic in GF(2^8) with reduction polynomial x^8+x^4+x^3+x^2+1 (0x11D)
// and primitive element 0x02.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "drc/errors.hpp"

namespace drc::gf256 {

using Element = std::uint8_t;

inline constexpr unsigned kPolynomial = 0x11D;
inline constexpr Element kGenerator = 0x02;

/// Shift-and-add product, used only to build and check the tables.
constexpr Element mul_bitwise(Element a, Element b) {
  unsigned x = a;
  unsigned acc = 0;
  for (unsigned y = b; y != 0; y >>= 1) {
    if (y & 1u) acc ^= x;
    x <<= 1;
    if (x & 0x100u) x ^= kPolynomial;
  }
  return static_cast<Element>(acc);
}

namespace detail {

struct Tables {
  // exp is doubled so that exp[log a + log b] needs no modulo.
  std::array<Element, 510> exp{};
  std::array<int, 256> log{};
};

constexpr Tables make_tables() {
  Tables t;
  Element x = 1;
  for (int i = 0; i < 255; ++i) {
    t.exp[i] = x;
    t.exp[i + 255] = x;
    t.log[x] = i;
    x = mul_bitwise(x, kGenerator);
  }
  t.log[0] = -1;
  return t;
}

inline constexpr Tables kTables = make_tables();

constexpr bool tables_agree_with_bitwise() {
  for (unsigned a = 0; a < 256; ++a) {
    for (unsigned b = 0; b < 256; ++b) {
      Element expect = mul_bitwise(static_cast<Element>(a), static_cast<Element>(b));
      Element got = (a == 0 || b == 0)
                        ? Element{0}
                        : kTables.exp[kTables.log[a] + kTables.log[b]];
      if (expect != got) return false;
    }
  }
  return true;
}

}  // namespace detail

static_assert(detail::tables_agree_with_bitwise(),
              "log/antilog tables disagree with the bitwise product");

constexpr Element add(Element a, Element b) { return a ^ b; }

constexpr Element mul(Element a, Element b) {
  if (a == 0 || b == 0) return 0;
  return detail::kTables.exp[detail::kTables.log[a] + detail::kTables.log[b]];
}

/// Multiplicative inverse. Zero has none; asking for it is a solver bug.
constexpr Element inv(Element a) {
  if (a == 0) throw std::domain_error("gf256::inv: zero has no inverse");
  return detail::kTables.exp[255 - detail::kTables.log[a]];
}

constexpr Element div(Element a, Element b) { return mul(a, inv(b)); }

/// a^k with 0^0 = 1.
constexpr Element pow(Element a, std::uint64_t k) {
  if (k == 0) return 1;
  if (a == 0) return 0;
  auto e = (static_cast<std::uint64_t>(detail::kTables.log[a]) * (k % 255)) % 255;
  return detail::kTables.exp[e];
}

/// dst[i] ^= c * src[i]
inline void mul_add(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src,
                    Element c) {
  if (dst.size() != src.size()) throw InvalidArgument("gf256::mul_add: length mismatch");
  if (c == 0) return;
  if (c == 1) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] ^= src[i];
    return;
  }
  std::array<Element, 256> row;
  for (unsigned v = 0; v < 256; ++v) row[v] = mul(c, static_cast<Element>(v));
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] ^= row[src[i]];
}

/// buf[i] = c * buf[i]
inline void scale(std::span<std::uint8_t> buf, Element c) {
  if (c == 1) return;
  std::array<Element, 256> row;
  for (unsigned v = 0; v < 256; ++v) row[v] = mul(c, static_cast<Element>(v));
  for (auto& b : buf) b = row[b];
}

}  // namespace drc::gf256
