#pragma once

// Seedable, stream-addressable randomness. Each (seed, domain, stream) triple
// selects an independent generator, so any party can regenerate the words for
// a given operation without replaying earlier ones.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "smpcnn/ring.hpp"

namespace smpcnn {

enum class PrgDomain : std::uint32_t {
  provider = 1,
  party_masks = 2,
  correlation = 3,
  test = 4,
};

class Prg {
 public:
  Prg(std::uint64_t seed, PrgDomain domain, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(domain), static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  explicit Prg(std::uint64_t seed) : Prg(seed, PrgDomain::test, 0) {}

  ring_t next() { return engine_(); }

  void fill(std::span<ring_t> out) {
    for (auto& w : out) w = engine_();
  }

  std::vector<ring_t> words(std::size_t n) {
    std::vector<ring_t> out(n);
    fill(out);
    return out;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace smpcnn
