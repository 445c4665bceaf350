#include <gtest/gtest.h>

#include <random>

#include "smpcnn/proto_tensor.hpp"
#include "support/oracles.hpp"
#include "support/two_party.hpp"

using namespace smpcnn;
using testing_support::open2;
using testing_support::ring_vector;
using testing_support::run2;

namespace {

const FixedPointConfig kCfg;
constexpr std::uint64_t kTwoUlp = 2;

RingTensor fixed_tensor(Shape dims, std::mt19937_64& g, double bound) {
  const std::size_t n = numel(dims);
  return RingTensor(std::move(dims), oracle::random_fixed(g, n, bound, kCfg.fraction_bits));
}

template <class F>
RingTensor open_binary(Backend backend, const RingTensor& a, const RingTensor& b, F&& fn, std::uint64_t seed = 1) {
  const auto sa = make_shares(a, seed, 1), sb = make_shares(b, seed, 2);
  auto [r0, r1] = run2(
      backend,
      [&](Party& p) { return p.index() == 0 ? fn(p, sa.first, sb.first) : fn(p, sa.second, sb.second); }, seed);
  return reconstruct(r0, r1);
}

}  // namespace

class SecureTensor : public ::testing::TestWithParam<Backend> {};

TEST_P(SecureTensor, AddAndSubAreExact) {
  std::mt19937_64 g(1);
  const auto a = fixed_tensor({5}, g, 100), b = fixed_tensor({5}, g, 100);
  const auto s = open_binary(GetParam(), a, b, [](Party&, const Aby2Share& x, const Aby2Share& y) {
    return secure_add(x, y);
  });
  const auto d = open_binary(GetParam(), a, b, [](Party&, const Aby2Share& x, const Aby2Share& y) {
    return secure_sub(x, secure_negate(y));
  });
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(s[i], a[i] + b[i]);
    EXPECT_EQ(d[i], a[i] + b[i]);
  }
}

TEST_P(SecureTensor, HadamardWithinTwoUlp) {
  std::mt19937_64 g(2);
  for (int t = 0; t < 20; ++t) {
    const auto a = fixed_tensor({4, 5}, g, 50), b = fixed_tensor({4, 5}, g, 50);
    const auto got = open_binary(GetParam(), a, b, [](Party& p, const Aby2Share& x, const Aby2Share& y) {
      return secure_hadamard(p, x, y);
    }, 10 + t);
    EXPECT_LE(oracle::max_abs_diff(got.data, oracle::hadamard(a.data, b.data, 13)), kTwoUlp);
  }
}

TEST_P(SecureTensor, HadamardExamples) {
  // 1.5 * 2 = 3; -0.5 * 0.5 = -0.25
  const RingTensor a({2}, {encode(1.5, kCfg), encode(-0.5, kCfg)});
  const RingTensor b({2}, {encode(2.0, kCfg), encode(0.5, kCfg)});
  const auto got = open_binary(GetParam(), a, b, [](Party& p, const Aby2Share& x, const Aby2Share& y) {
    return secure_hadamard(p, x, y);
  });
  EXPECT_NEAR(decode(got[0], kCfg), 3.0, 2.0 / 8192);
  EXPECT_NEAR(decode(got[1], kCfg), -0.25, 2.0 / 8192);
}

TEST_P(SecureTensor, MatmulWithinTwoUlp) {
  std::mt19937_64 g(3);
  for (int t = 0; t < 10; ++t) {
    const auto w = fixed_tensor({6, 9}, g, 4), x = fixed_tensor({9}, g, 4);
    const auto got = open_binary(GetParam(), w, x, [](Party& p, const Aby2Share& a, const Aby2Share& b) {
      return secure_matmul(p, a, b);
    }, 20 + t);
    EXPECT_EQ(got.dims, (Shape{6}));
    EXPECT_LE(oracle::max_abs_diff(got.data, oracle::matmul(w.data, x.data, 6, 9, 1, 13)), kTwoUlp);
  }
}

TEST_P(SecureTensor, MatmulRejectsBadShapes) {
  std::mt19937_64 g(4);
  const auto w = fixed_tensor({3, 4}, g, 1), x = fixed_tensor({5}, g, 1);
  EXPECT_THROW(open_binary(GetParam(), w, x,
                           [](Party& p, const Aby2Share& a, const Aby2Share& b) { return secure_matmul(p, a, b); }),
               ShapeError);
}

TEST_P(SecureTensor, ConvWithinTwoUlpAndBias) {
  std::mt19937_64 g(5);
  const oracle::Conv c{3, 2, 3, 3, 2, 1, 1, 0, 1, 1};
  const auto params = oracle::to_params(c);
  const auto w = fixed_tensor({3, 2, 3, 3}, g, 1), x = fixed_tensor({2, 8, 6}, g, 1);
  const auto bias = fixed_tensor({3}, g, 1);
  const auto sbias = make_shares(bias, 77);
  const auto got = open_binary(GetParam(), w, x, [&](Party& p, const Aby2Share& k, const Aby2Share& in) {
    return secure_conv2d(p, k, in, p.index() == 0 ? &sbias.first : &sbias.second, params);
  });
  std::size_t orows = 0, ocols = 0;
  auto want = oracle::conv(w.data, x.data, 8, 6, c, 13, &orows, &ocols);
  EXPECT_EQ(got.dims, (Shape{3, orows, ocols}));
  const std::size_t plane = orows * ocols;
  for (std::size_t i = 0; i < want.size(); ++i) want[i] += bias[i / plane];
  EXPECT_LE(oracle::max_abs_diff(got.data, want), kTwoUlp);
}

TEST_P(SecureTensor, MaxreduceIsBitExact) {
  std::mt19937_64 g(6);
  for (std::size_t n : {1u, 2u, 3u, 7u, 64u, 65u}) {
    auto x = fixed_tensor({n}, g, 1000);
    const auto got = open2(GetParam(), make_shares(x, n), [](Party& p, const Aby2Share& s) {
      return secure_maxreduce(p, s);
    });
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0], x[oracle::argmax(x.data)]) << n;
  }
}

TEST_P(SecureTensor, IndicatorSmallSweep) {
  std::vector<ring_t> v;
  for (std::int64_t i = -300; i <= 300; ++i) v.push_back(from_signed(i));
  v.push_back(from_signed(std::int64_t{1} << 40));
  v.push_back(from_signed(-(std::int64_t{1} << 40)));
  v.push_back((ring_t{1} << 63) + 1);
  v.push_back((ring_t{1} << 63) - 1);
  const auto got = open2(GetParam(), make_shares(ring_vector(v), 5), [](Party& p, const Aby2Share& s) {
    return secure_indicator(p, s);
  });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(got[i], to_signed(v[i]) >= 0 ? kCfg.one() : 0) << to_signed(v[i]);
}

TEST_P(SecureTensor, ArgmaxWithTiesTakesHighestIndex) {
  const std::vector<double> xs{3, 1, 4, 1, 5, 9, 2, 6, 9, 0};
  RingTensor x({xs.size()});
  for (std::size_t i = 0; i < xs.size(); ++i) x[i] = encode(xs[i], kCfg);
  const auto in = make_shares(x, 8);
  const auto got = open2(GetParam(), in, [](Party& p, const Aby2Share& s) { return secure_argmax(p, s); });
  const auto scalar =
      open2(GetParam(), in, [](Party& p, const Aby2Share& s) { return secure_argmax_scalar(p, s); });
  EXPECT_EQ(got[0], 8u);
  EXPECT_EQ(scalar[0], 8u);
}

TEST_P(SecureTensor, ArgmaxSingleElement) {
  const auto got = open2(GetParam(), make_shares(ring_vector({ring_t{0} - 5}), 9),
                         [](Party& p, const Aby2Share& s) { return secure_argmax(p, s); });
  EXPECT_EQ(got[0], 0u);
}

TEST_P(SecureTensor, ConstOperations) {
  std::mt19937_64 g(7);
  const auto x = fixed_tensor({4}, g, 10);
  const RingTensor c({2, 4}, oracle::random_fixed(g, 8, 2, 13));
  const auto mm = open2(GetParam(), make_shares(x, 1), [&](Party& p, const Aby2Share& s) {
    return secure_const_matmul(p, c, s);
  });
  EXPECT_LE(oracle::max_abs_diff(mm.data, oracle::matmul(c.data, x.data, 2, 4, 1, 13)), kTwoUlp);
  const RingTensor h({4}, oracle::random_fixed(g, 4, 2, 13));
  const auto hm = open2(GetParam(), make_shares(x, 1), [&](Party& p, const Aby2Share& s) {
    return secure_const_hadamard(p, h, s);
  });
  EXPECT_LE(oracle::max_abs_diff(hm.data, oracle::hadamard(h.data, x.data, 13)), kTwoUlp);
}

INSTANTIATE_TEST_SUITE_P(Backends, SecureTensor, ::testing::Values(Backend::dealer, Backend::helper),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(SecureTensor, DealerAndHelperAgreeBitForBit) {
  std::mt19937_64 g(8);
  const auto w = fixed_tensor({3, 5}, g, 2), x = fixed_tensor({5}, g, 2);
  auto run = [&](Backend b) {
    return open_binary(b, w, x, [](Party& p, const Aby2Share& a, const Aby2Share& s) {
      return secure_argmax(p, secure_relu(p, secure_matmul(p, a, s)));
    });
  };
  EXPECT_EQ(run(Backend::dealer).data, run(Backend::helper).data);
}
