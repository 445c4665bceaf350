#include <gtest/gtest.h>

#include <random>

#include "smpcnn/comparison.hpp"
#include "support/two_party.hpp"

using namespace smpcnn;
using testing_support::open2;
using testing_support::ring_vector;
using testing_support::run2;

namespace {

std::vector<ring_t> edge_values() {
  std::vector<ring_t> v{0, 1, ring_t{0} - 1, 2, ring_t{0} - 2, ring_t{1} << 62, (ring_t{1} << 63) - 1, ring_t{1} << 63,
                        (ring_t{1} << 63) + 1, 8192, ring_t{0} - 8192};
  std::mt19937_64 g(3);
  for (int i = 0; i < 150; ++i) v.push_back(g());
  return v;
}

}  // namespace

class Comparison : public ::testing::TestWithParam<Backend> {};

TEST_P(Comparison, AndGateMatchesClearAnd) {
  std::mt19937_64 g(1);
  std::vector<std::uint64_t> u[2], v[2];
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 7; ++k) {
      u[i].push_back(g());
      v[i].push_back(g());
    }
  auto [z0, z1] = run2(GetParam(), [&](Party& p) {
    auto t = p.correlated().bool_triples(p.next_op(), 7);
    return and_gate(p, t, u[p.index()], v[p.index()]);
  });
  for (int k = 0; k < 7; ++k) EXPECT_EQ(z0[k] ^ z1[k], (u[0][k] ^ u[1][k]) & (v[0][k] ^ v[1][k]));
}

TEST_P(Comparison, BeaverMultiplication) {
  std::mt19937_64 g(2);
  std::vector<ring_t> u[2], v[2];
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 9; ++k) {
      u[i].push_back(g());
      v[i].push_back(g());
    }
  auto [z0, z1] = run2(GetParam(), [&](Party& p) {
    auto t = p.correlated().arith_triples(p.next_op(), 9);
    return beaver_mul(p, t.take(9), u[p.index()], v[p.index()]);
  });
  for (int k = 0; k < 9; ++k) EXPECT_EQ(z0[k] + z1[k], (u[0][k] + u[1][k]) * (v[0][k] + v[1][k]));
}

TEST_P(Comparison, MsbExtractIsSignBit) {
  const auto vals = edge_values();
  const auto in = make_shares(ring_vector(vals), 4);
  auto [b0, b1] = run2(GetParam(), [&](Party& p) { return msb_extract(p, p.index() == 0 ? in.first : in.second); });
  const auto bits = reconstruct_bits(b0, b1);
  for (std::size_t i = 0; i < vals.size(); ++i) EXPECT_EQ(bits.get(i), sign_bit(vals[i])) << i;
}

TEST_P(Comparison, BitToArith) {
  BoolShareVector b[2] = {BoolShareVector(70), BoolShareVector(70)};
  std::mt19937_64 g(5);
  for (std::size_t i = 0; i < 70; ++i) {
    b[0].set(i, g() & 1);
    b[1].set(i, g() & 1);
  }
  auto [a0, a1] = run2(GetParam(), [&](Party& p) { return bit_to_arith(p, b[p.index()]); });
  for (std::size_t i = 0; i < 70; ++i) EXPECT_EQ(a0[i] + a1[i], ring_t(b[0].get(i) != b[1].get(i))) << i;
}

TEST_P(Comparison, ReluIsBitExact) {
  const auto vals = edge_values();
  const auto out = open2(GetParam(), make_shares(ring_vector(vals), 6),
                         [](Party& p, const Aby2Share& x) { return secure_relu(p, x); });
  for (std::size_t i = 0; i < vals.size(); ++i) EXPECT_EQ(out[i], sign_bit(vals[i]) ? 0 : vals[i]) << i;
}

TEST_P(Comparison, ReluKeepsShape) {
  RingTensor x({2, 3, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = from_signed(static_cast<std::int64_t>(i) - 12);
  const auto out =
      open2(GetParam(), make_shares(x, 7), [](Party& p, const Aby2Share& s) { return secure_relu(p, s); });
  EXPECT_EQ(out.dims, x.dims);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(to_signed(out[i]), std::max<std::int64_t>(0, to_signed(x[i])));
}

TEST_P(Comparison, ReluOfEmptyTensor) {
  RingTensor x({0});
  const auto out =
      open2(GetParam(), make_shares(x, 7), [](Party& p, const Aby2Share& s) { return secure_relu(p, s); });
  EXPECT_EQ(out.size(), 0u);
}

INSTANTIATE_TEST_SUITE_P(Backends, Comparison, ::testing::Values(Backend::dealer, Backend::helper),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Planes, RoundTrip) {
  const std::vector<ring_t> v{5, 0, ~ring_t{0}};
  const auto planes = to_planes(v);
  ASSERT_EQ(planes.size(), 64u);
  EXPECT_EQ(planes[0][0], 0b101u);
  EXPECT_EQ(planes[1][0], 0b100u);
  EXPECT_EQ(planes[2][0], 0b101u);
  EXPECT_EQ(planes[63][0], 0b100u);
  EXPECT_EQ(plane_to_bits(planes[0], 2).words[0], 0b01u);
}
