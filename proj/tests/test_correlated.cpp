#include <gtest/gtest.h>

#include <thread>

#include "smpcnn/correlated.hpp"
#include "smpcnn/helper.hpp"
#include "support/oracles.hpp"
#include "support/two_party.hpp"

using namespace smpcnn;
using testing_support::run2;

namespace {

struct Masks {
  std::vector<ring_t> a[2], b[2];
};

Masks random_masks(std::size_t na, std::size_t nb, std::uint64_t seed) {
  Prg prg(seed);
  Masks m;
  for (int i = 0; i < 2; ++i) {
    m.a[i] = prg.words(na);
    m.b[i] = prg.words(nb);
  }
  return m;
}

std::vector<ring_t> sum(const std::vector<ring_t>& x, const std::vector<ring_t>& y) {
  std::vector<ring_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return out;
}

std::pair<std::vector<ring_t>, std::vector<ring_t>> parts_via(Backend backend, const BilinearSpec& spec,
                                                              const Masks& m) {
  return run2(backend, [&](Party& p) {
    const int i = p.index();
    return p.correlated().cross_terms(p.next_op(), spec, m.a[i], m.b[i]);
  });
}

}  // namespace

class CrossTerms : public ::testing::TestWithParam<Backend> {};

TEST_P(CrossTerms, HadamardPartsSumToFullProduct) {
  const auto m = random_masks(9, 9, 1);
  auto [p0, p1] = parts_via(GetParam(), BilinearSpec::hadamard({3, 3}), m);
  const auto full = oracle::hadamard(sum(m.a[0], m.a[1]), sum(m.b[0], m.b[1]), 0);
  EXPECT_EQ(sum(p0, p1), full);
}

TEST_P(CrossTerms, MatmulPartsSumToFullProduct) {
  const auto m = random_masks(4 * 6, 6 * 2, 2);
  auto [p0, p1] = parts_via(GetParam(), BilinearSpec::matmul({4, 6}, {6, 2}), m);
  EXPECT_EQ(sum(p0, p1), oracle::matmul(sum(m.a[0], m.a[1]), sum(m.b[0], m.b[1]), 4, 6, 2, 0));
}

TEST_P(CrossTerms, ConvPartsSumToFullProduct) {
  const oracle::Conv c{2, 3, 3, 2, 2, 1, 1, 0, 1, 1};
  const auto params = oracle::to_params(c);
  const auto m = random_masks(2 * 3 * 3 * 2, 3 * 7 * 5, 3);
  auto [p0, p1] = parts_via(GetParam(), BilinearSpec::convolution(params, {3, 7, 5}), m);
  EXPECT_EQ(sum(p0, p1), oracle::conv(sum(m.a[0], m.a[1]), sum(m.b[0], m.b[1]), 7, 5, c, 0));
}

TEST_P(CrossTerms, BoolTriplesAreAndTriples) {
  auto [t0, t1] = run2(GetParam(), [&](Party& p) { return p.correlated().bool_triples(p.next_op(), 50); });
  ASSERT_EQ(t0.a.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(t0.c[i] ^ t1.c[i], (t0.a[i] ^ t1.a[i]) & (t0.b[i] ^ t1.b[i]));
  }
}

TEST_P(CrossTerms, ArithTriplesAreProducts) {
  auto [t0, t1] = run2(GetParam(), [&](Party& p) { return p.correlated().arith_triples(p.next_op(), 50); });
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(t0.c[i] + t1.c[i], (t0.a[i] + t1.a[i]) * (t0.b[i] + t1.b[i]));
}

TEST_P(CrossTerms, ShapeDisagreementIsProtocolError) {
  const auto m = random_masks(4, 4, 4);
  EXPECT_THROW(run2(GetParam(),
                    [&](Party& p) {
                      const Shape d = p.index() == 0 ? Shape{4} : Shape{2, 2};
                      return p.correlated().cross_terms(p.next_op(), BilinearSpec::hadamard(d), m.a[p.index()],
                                                        m.b[p.index()]);
                    }),
               ProtocolError);
}

INSTANTIATE_TEST_SUITE_P(Backends, CrossTerms, ::testing::Values(Backend::dealer, Backend::helper),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Correlated, BackendsProduceIdenticalParts) {
  const auto m = random_masks(5 * 7, 7, 5);
  const auto spec = BilinearSpec::matmul({5, 7}, {7});
  EXPECT_EQ(parts_via(Backend::dealer, spec, m), parts_via(Backend::helper, spec, m));
  auto triples = [](Backend b) {
    return run2(b, [](Party& p) {
      auto t = p.correlated().bool_triples(p.next_op(), 3);
      auto u = p.correlated().arith_triples(p.next_op(), 3);
      return std::vector<std::vector<ring_t>>{t.a, t.b, t.c, u.a, u.b, u.c};
    });
  };
  EXPECT_EQ(triples(Backend::dealer), triples(Backend::helper));
}

TEST(Correlated, HelperInDealerModeMatchesDealer) {
  const auto m = random_masks(6, 6, 6);
  const auto spec = BilinearSpec::hadamard({6});
  std::unique_ptr<Peer> party_side[2], helper_side[2];
  for (int i = 0; i < 2; ++i) {
    auto [a, b] = make_local_pipe();
    party_side[i] = std::make_unique<Peer>(std::move(a));
    helper_side[i] = std::make_unique<Peer>(std::move(b));
  }
  LocalSessionOptions defaults;
  const std::uint64_t seed = 1 + 0x100;  // the seed run2 gives the dealer
  std::thread helper([&] { serve_correlation(*helper_side[0], *helper_side[1], seed); });
  std::vector<ring_t> got[2];
  std::thread second([&] {
    RemoteCorrelated r(*party_side[1], true);
    got[1] = r.cross_terms(1, spec, m.a[1], m.b[1]);
  });
  {
    RemoteCorrelated r(*party_side[0], true);
    got[0] = r.cross_terms(1, spec, m.a[0], m.b[0]);
  }
  second.join();
  party_side[0]->close();
  party_side[1]->close();
  helper.join();
  auto [d0, d1] = parts_via(Backend::dealer, spec, m);
  EXPECT_EQ(got[0], d0);
  EXPECT_EQ(got[1], d1);
}

TEST(Correlated, RequestCodecRoundTrip) {
  ConvParams p;
  p.n_ker = 2;
  p.i_ch = 1;
  p.k_row = 3;
  p.k_col = 2;
  p.stride = {2, 1};
  p.pad = {1, 0, 0, 1};
  CorrelationRequest r{9, BilinearSpec::convolution(p, {1, 5, 5}), false, 0, {1, 2, 3}, {4, 5}};
  const auto back = decode_correlation_request(9, encode_correlation_request(r));
  EXPECT_TRUE(back.same_shape(r));
  EXPECT_EQ(back.delta_a, r.delta_a);
  EXPECT_EQ(back.delta_b, r.delta_b);
  auto bytes = encode_correlation_request(r);
  bytes.pop_back();
  EXPECT_THROW(decode_correlation_request(9, bytes), Error);
}

TEST(Correlated, DealerSplitMatchesDefinition) {
  const auto m = random_masks(4, 4, 7);
  Prg prg(3);
  const auto spec = BilinearSpec::hadamard({4});
  auto [p0, p1] = split_cross_terms(spec, m.a[0], m.b[0], m.a[1], m.b[1], prg, false);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(p0[i] + p1[i], m.a[0][i] * m.b[1][i] + m.a[1][i] * m.b[0][i]);
  }
}
