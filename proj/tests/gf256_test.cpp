#include <gtest/gtest.h>

#include <random>
#include <set>

#include "drc/gf256.hpp"
#include "oracle.hpp"

namespace gf = drc::gf256;

TEST(Gf256, MultiplicationMatchesSchoolbookOracle) {
  for (int a = 0; a < 256; ++a) {
    for (int b = 0; b < 256; ++b) {
      ASSERT_EQ(gf::mul(a, b), oracle::gf_mul(a, b)) << a << " * " << b;
    }
  }
}

TEST(Gf256, KnownProducts) {
  EXPECT_EQ(oracle::gf_mul(0x80, 0x02), 0x1D);
  EXPECT_EQ(gf::mul(0x80, 0x02), 0x1D);
  for (int a = 0; a < 256; ++a) {
    EXPECT_EQ(gf::mul(a, 1), a);
    EXPECT_EQ(gf::mul(a, 0), 0);
  }
}

TEST(Gf256, Inverse) {
  EXPECT_EQ(oracle::gf_inv(0x02), 0x8E);
  EXPECT_EQ(gf::inv(0x02), 0x8E);
  EXPECT_EQ(gf::inv(1), 1);
  for (int a = 1; a < 256; ++a) {
    EXPECT_EQ(gf::mul(a, gf::inv(a)), 1) << a;
    EXPECT_EQ(gf::inv(gf::inv(a)), a);
  }
  EXPECT_THROW(gf::inv(0), std::domain_error);
}

TEST(Gf256, Power) {
  EXPECT_EQ(gf::pow(0x02, 1), 0x02);
  EXPECT_EQ(oracle::gf_pow(0x02, 8), 0x1D);
  EXPECT_EQ(gf::pow(0x02, 8), 0x1D);
  EXPECT_EQ(gf::pow(0x02, 255), 1);
  EXPECT_EQ(gf::pow(0, 0), 1);
  EXPECT_EQ(gf::pow(0, 3), 0);
  for (int a = 0; a < 256; ++a) {
    EXPECT_EQ(gf::pow(a, 0), 1);
    for (int k : {1, 2, 7, 254, 300}) EXPECT_EQ(gf::pow(a, k), oracle::gf_pow(a, k));
  }
}

TEST(Gf256, GeneratorIsPrimitive) {
  std::set<int> seen;
  for (int i = 0; i < 255; ++i) seen.insert(gf::pow(0x02, i));
  EXPECT_EQ(seen.size(), 255u);
  EXPECT_EQ(seen.count(0), 0u);
}

TEST(Gf256, FieldAxiomsOnRandomTriples) {
  std::mt19937 rng(1234);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int i = 0; i < 100000; ++i) {
    gf::Element a = byte(rng), b = byte(rng), c = byte(rng);
    ASSERT_EQ(gf::mul(gf::mul(a, b), c), gf::mul(a, gf::mul(b, c)));
    ASSERT_EQ(gf::mul(a, b ^ c), gf::mul(a, b) ^ gf::mul(a, c));
    ASSERT_EQ(gf::mul(a, b), gf::mul(b, a));
  }
}

TEST(Gf256, VectorKernels) {
  std::vector<std::uint8_t> dst{1, 2, 3}, src{0x80, 0x01, 0x00};
  gf::mul_add(dst, src, 0x02);
  EXPECT_EQ(dst, (std::vector<std::uint8_t>{1 ^ 0x1D, 2 ^ 0x02, 3}));
  gf::scale(dst, 1);
  EXPECT_EQ(dst[2], 3);
  std::vector<std::uint8_t> short_src{1};
  EXPECT_THROW(gf::mul_add(dst, short_src, 3), drc::InvalidArgument);
}
