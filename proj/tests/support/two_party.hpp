#pragma once

#include <utility>

#include "smpcnn/session.hpp"
#include "smpcnn/sharing.hpp"

namespace testing_support {

using namespace smpcnn;

/// Runs fn at both parties over an in-process link and returns both results.
template <class F>
auto run2(Backend backend, F&& fn, std::uint64_t seed = 1, LocalSessionReport* report = nullptr) {
  LocalSessionOptions o;
  o.backend = backend;
  o.mask_seed = seed;
  o.correlation_seed = seed + 0x100;
  return run_local(o, std::forward<F>(fn), report);
}

/// Runs a one-share-in, one-share-out protocol and returns the opened result.
template <class F>
RingTensor open2(Backend backend, const std::pair<Aby2Share, Aby2Share>& in, F&& fn, std::uint64_t seed = 1) {
  auto [r0, r1] = run2(
      backend, [&](Party& p) { return fn(p, p.index() == 0 ? in.first : in.second); }, seed);
  return reconstruct(r0, r1);
}

inline RingTensor ring_vector(std::vector<ring_t> v) {
  const std::size_t n = v.size();
  return RingTensor({n}, std::move(v));
}

}  // namespace testing_support
