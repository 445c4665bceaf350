#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "smpcnn/ring.hpp"
#include "smpcnn/tensor_io.hpp"

using namespace smpcnn;

TEST(Ring, EncodeDecodeExamples) {
  FixedPointConfig cfg;
  EXPECT_EQ(encode(1.0, cfg), 8192u);
  EXPECT_EQ(encode(-1.0, cfg), ring_t{0} - 8192u);
  EXPECT_EQ(encode(0.5, cfg), 4096u);
  EXPECT_EQ(encode(0.0, cfg), 0u);
  EXPECT_DOUBLE_EQ(decode(encode(3.25, cfg), cfg), 3.25);
  EXPECT_DOUBLE_EQ(decode(ring_t{0} - 1, cfg), -1.0 / 8192);
}

TEST(Ring, EncodeRoundsHalfAwayFromZero) {
  FixedPointConfig cfg;
  const double half_ulp = std::ldexp(1.0, -14);
  EXPECT_EQ(encode(half_ulp, cfg), 1u);
  EXPECT_EQ(encode(-half_ulp, cfg), ring_t{0} - 1);
}

TEST(Ring, EncodeRange) {
  FixedPointConfig cfg;
  const double limit = std::ldexp(1.0, 50);
  EXPECT_EQ(encode(-limit, cfg), ring_t{1} << 63);
  EXPECT_THROW(encode(limit, cfg), RangeError);
  EXPECT_THROW(encode(std::nan(""), cfg), RangeError);
  EXPECT_THROW(encode(INFINITY, cfg), RangeError);
  EXPECT_NO_THROW(encode(limit - 1.0, cfg));
}

TEST(Ring, RoundTripWithinHalfUlp) {
  FixedPointConfig cfg;
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(g);
    EXPECT_LE(std::abs(decode(encode(x, cfg), cfg) - x), std::ldexp(1.0, -14));
  }
}

TEST(Ring, TruncationOfPartsWithinOneUlp) {
  std::mt19937_64 g(9);
  for (int i = 0; i < 100000; ++i) {
    const std::int64_t v = static_cast<std::int64_t>(g() >> 20) - (std::int64_t{1} << 43);
    const ring_t p0 = g();
    const ring_t p1 = static_cast<ring_t>(v) - p0;
    const std::int64_t got = to_signed(truncate_part(p0, 0, 13) + truncate_part(p1, 1, 13));
    const std::int64_t want = v >> 13;
    // Larger errors only happen when the signed parts overflow when summed.
    if (std::abs(got - want) > 1) {
      const __int128 signed_sum = static_cast<__int128>(to_signed(p0)) + to_signed(p1);
      EXPECT_NE(signed_sum, static_cast<__int128>(v)) << "v=" << v << " p0=" << p0;
    }
  }
}

TEST(Ring, TruncateClearIsFloor) {
  EXPECT_EQ(to_signed(truncate_clear(from_signed(-1), 13)), -1);
  EXPECT_EQ(to_signed(truncate_clear(from_signed(8191), 13)), 0);
  EXPECT_EQ(to_signed(truncate_clear(from_signed(-8193), 13)), -2);
}

TEST(Ring, SignBit) {
  EXPECT_FALSE(sign_bit(0));
  EXPECT_FALSE(sign_bit((ring_t{1} << 63) - 1));
  EXPECT_TRUE(sign_bit(ring_t{1} << 63));
  EXPECT_TRUE(sign_bit(~ring_t{0}));
}

TEST(Ring, ConfigValidation) {
  FixedPointConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.indicator_gain = cfg.one();
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.fraction_bits = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.fraction_bits = 62;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Ring, TensorEncodeDecode) {
  FixedPointConfig cfg;
  RealTensor t({2, 2}, {0.5, -0.25, 1.0, 2.0});
  auto e = encode_tensor(t, cfg);
  EXPECT_EQ(e.dims, (Shape{2, 2}));
  EXPECT_EQ(decode_tensor(e, cfg).data, t.data);
}
