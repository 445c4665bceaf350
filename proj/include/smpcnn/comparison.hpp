#pragma once

// Sign extraction and ReLU over ABY2.0 shares.
//
// Each party turns its share into an additive part (x_0 = Delta - [delta]_0,
// x_1 = -[delta]_1). The parts are bit-sliced into 64 planes and added by a
// GMW ripple-carry adder whose AND gates consume XOR-shared triples. The sign
// bit is converted back to the ring with one arithmetic triple and multiplied
// into x with another.

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smpcnn/correlated.hpp"
#include "smpcnn/errors.hpp"
#include "smpcnn/party.hpp"
#include "smpcnn/sharing.hpp"

namespace smpcnn {

/// XOR-shared bit string, 64 bits per word (bit t of word w is element 64w+t).
struct BoolShareVector {
  std::size_t bits = 0;
  std::vector<std::uint64_t> words;

  BoolShareVector() = default;
  explicit BoolShareVector(std::size_t n) : bits(n), words((n + 63) / 64, 0) {}

  bool get(std::size_t i) const { return (words[i / 64] >> (i % 64)) & 1U; }
  void set(std::size_t i, bool v) {
    const std::uint64_t m = std::uint64_t{1} << (i % 64);
    words[i / 64] = v ? (words[i / 64] | m) : (words[i / 64] & ~m);
  }
};

inline BoolShareVector reconstruct_bits(const BoolShareVector& b0, const BoolShareVector& b1) {
  if (b0.bits != b1.bits) throw ProtocolError("boolean shares have different lengths");
  BoolShareVector out(b0.bits);
  for (std::size_t w = 0; w < out.words.size(); ++w) out.words[w] = b0.words[w] ^ b1.words[w];
  return out;
}

/// One bit position across all elements.
using BitPlane = std::vector<std::uint64_t>;

inline std::size_t plane_words(std::size_t n) { return (n + 63) / 64; }

/// planes[j] holds bit j of every value.
inline std::vector<BitPlane> to_planes(std::span<const ring_t> values, unsigned width = 64) {
  const std::size_t w = plane_words(values.size());
  std::vector<BitPlane> planes(width, BitPlane(w, 0));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const ring_t v = values[i];
    const std::uint64_t m = std::uint64_t{1} << (i % 64);
    for (unsigned j = 0; j < width && j < 64; ++j) {
      if ((v >> j) & 1U) planes[j][i / 64] |= m;
    }
  }
  return planes;
}

inline BoolShareVector plane_to_bits(const BitPlane& plane, std::size_t n) {
  BoolShareVector out(n);
  out.words = plane;
  if (n % 64) out.words.back() &= (std::uint64_t{1} << (n % 64)) - 1;
  return out;
}

// ---------------------------------------------------------------------------
// Gates.

/// Elementwise AND of XOR-shared words: one triple word per input word and one
/// BOOL_ROUND exchange carrying the masked operands d = u^a, e = v^b.
inline std::vector<std::uint64_t> and_gate(Party& party, BoolTripleBatch& triples, std::span<const std::uint64_t> u,
                                           std::span<const std::uint64_t> v) {
  if (u.size() != v.size()) throw ShapeError("and_gate: operand lengths differ");
  const std::size_t n = u.size();
  const auto t = triples.take(n);
  const std::uint64_t op = party.next_op();
  std::vector<std::uint64_t> msg(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    msg[i] = u[i] ^ t.a[i];
    msg[n + i] = v[i] ^ t.b[i];
  }
  const auto theirs = party.exchange(MsgType::bool_round, op, msg);
  std::vector<std::uint64_t> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t d = msg[i] ^ theirs[i];
    const std::uint64_t e = msg[n + i] ^ theirs[n + i];
    z[i] = t.c[i] ^ (d & t.b[i]) ^ (e & t.a[i]);
    if (party.is_first()) z[i] ^= d & e;
  }
  return z;
}

/// Beaver multiplication of additively shared ring values.
inline std::vector<ring_t> beaver_mul(Party& party, const ArithTripleBatch::View& t, std::span<const ring_t> u,
                                      std::span<const ring_t> v) {
  if (u.size() != v.size() || t.a.size() != u.size()) throw ShapeError("beaver_mul: operand lengths differ");
  const std::size_t n = u.size();
  const std::uint64_t op = party.next_op();
  std::vector<ring_t> msg(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    msg[i] = u[i] - t.a[i];
    msg[n + i] = v[i] - t.b[i];
  }
  const auto theirs = party.exchange(MsgType::reshare, op, msg);
  std::vector<ring_t> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ring_t d = msg[i] + theirs[i];
    const ring_t e = msg[n + i] + theirs[n + i];
    z[i] = t.c[i] + d * t.b[i] + e * t.a[i];
    if (party.is_first()) z[i] += d * e;
  }
  return z;
}

// ---------------------------------------------------------------------------
// Adders on bit planes. Operands are XOR-shared; a plane of a value held by a
// single party is that party's plane and zero at the other.

namespace detail {

inline void xor_into(BitPlane& dst, const BitPlane& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] ^= src[i];
}

inline BitPlane xor_of(const BitPlane& a, const BitPlane& b) {
  BitPlane out = a;
  xor_into(out, b);
  return out;
}

}  // namespace detail

/// Ripple-carry sum of two shared numbers of `a.size()` bits, modulo 2^width.
/// Carry recurrence c_{j+1} = ((a_j ^ c_j) & (b_j ^ c_j)) ^ c_j, one AND round
/// per bit except the last. With `msb_only` only the top sum plane is filled.
inline std::vector<BitPlane> add_planes(Party& party, BoolTripleBatch& triples, const std::vector<BitPlane>& a,
                                        const std::vector<BitPlane>& b, bool msb_only = false) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("add_planes: operand widths differ");
  const std::size_t width = a.size();
  const std::size_t w = a[0].size();
  std::vector<BitPlane> sum(width);
  BitPlane carry(w, 0);
  for (std::size_t j = 0; j < width; ++j) {
    if (!msb_only || j + 1 == width) {
      sum[j] = detail::xor_of(a[j], b[j]);
      detail::xor_into(sum[j], carry);
    }
    if (j + 1 == width) break;
    auto next = and_gate(party, triples, detail::xor_of(a[j], carry), detail::xor_of(b[j], carry));
    detail::xor_into(next, carry);
    carry = std::move(next);
  }
  return sum;
}

/// Adds a public constant `p` (bits beyond 63 are zero) to a shared number.
/// Carry: c_{j+1} = p_j ? (a_j | c_j) : (a_j & c_j), with a|c = a^c^(a&c).
inline std::vector<BitPlane> add_public_planes(Party& party, BoolTripleBatch& triples, const std::vector<BitPlane>& a,
                                               ring_t p, bool msb_only = false) {
  const std::size_t width = a.size();
  const std::size_t w = a.empty() ? 0 : a[0].size();
  auto pbit = [&](std::size_t j) { return j < 64 && ((p >> j) & 1U); };
  std::vector<BitPlane> sum(width);
  BitPlane carry(w, 0);
  for (std::size_t j = 0; j < width; ++j) {
    if (!msb_only || j + 1 == width) {
      sum[j] = detail::xor_of(a[j], carry);
      if (pbit(j) && party.is_first()) {
        for (auto& x : sum[j]) x = ~x;
      }
    }
    if (j + 1 == width) break;
    BitPlane g;
    if (j == 0) {
      g.assign(w, 0);  // carry-in is zero
    } else {
      g = and_gate(party, triples, a[j], carry);
    }
    if (pbit(j)) {
      detail::xor_into(g, a[j]);
      detail::xor_into(g, carry);
    }
    carry = std::move(g);
  }
  return sum;
}

inline std::size_t adder_and_words(std::size_t width, std::size_t n) { return (width - 1) * plane_words(n); }

/// Splits an additive part into XOR-shared operand planes: this party's bits
/// go into its own operand, the other operand is zero locally.
inline std::pair<std::vector<BitPlane>, std::vector<BitPlane>> operand_planes(const Party& party,
                                                                              std::span<const ring_t> part) {
  auto mine = to_planes(part);
  std::vector<BitPlane> zero(64, BitPlane(mine[0].size(), 0));
  if (party.index() == 0) return {std::move(mine), std::move(zero)};
  return {std::move(zero), std::move(mine)};
}

// ---------------------------------------------------------------------------
// Protocols.

/// XOR shares of the two's-complement sign of every element.
inline BoolShareVector msb_extract(Party& party, const Aby2Share& x) {
  const std::size_t n = x.size();
  const auto parts = x.additive();
  const std::uint64_t op = party.next_op();
  auto triples = party.correlated().bool_triples(op, adder_and_words(64, n));
  auto [a, b] = operand_planes(party, parts.values);
  const auto sum = add_planes(party, triples, a, b, true);
  return plane_to_bits(sum[63], n);
}

/// Additive parts of the XOR-shared bits as ring elements: b0 + b1 - 2 b0 b1.
inline std::vector<ring_t> bit_to_arith(Party& party, const BoolShareVector& bits, const ArithTripleBatch::View& t) {
  const std::size_t n = bits.bits;
  std::vector<ring_t> mine(n), zero(n, 0);
  for (std::size_t i = 0; i < n; ++i) mine[i] = bits.get(i) ? 1 : 0;
  const auto prod = party.is_first() ? beaver_mul(party, t, mine, zero) : beaver_mul(party, t, zero, mine);
  std::vector<ring_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = mine[i] - 2 * prod[i];
  return out;
}

inline std::vector<ring_t> bit_to_arith(Party& party, const BoolShareVector& bits) {
  const std::uint64_t op = party.next_op();
  auto triples = party.correlated().arith_triples(op, bits.bits);
  return bit_to_arith(party, bits, triples.take(bits.bits));
}

/// value * (1 - bit), re-shared into fresh ABY2.0 form. Integer-by-bit, so no
/// truncation is involved.
inline Aby2Share select_unless(Party& party, const AdditiveParts& value, const BoolShareVector& bit) {
  const std::size_t n = value.size();
  if (bit.bits != n) throw ShapeError("select_unless: bit count does not match tensor");
  const std::uint64_t op = party.next_op();
  auto triples = party.correlated().arith_triples(op, 2 * n);
  auto b = bit_to_arith(party, bit, triples.take(n));
  for (auto& v : b) v = ring_t{0} - v;
  if (party.is_first()) {
    for (auto& v : b) v += 1;
  }
  AdditiveParts out{value.dims, beaver_mul(party, triples.take(n), value.values, b)};
  return reshare(party, out);
}

/// max(x, 0) elementwise, bit-exact.
inline Aby2Share secure_relu(Party& party, const Aby2Share& x) {
  if (x.size() == 0) return x;
  const auto sign = msb_extract(party, x);
  return select_unless(party, x.additive(), sign);
}

/// ReLU(2^f - K * s) for a share of s in [0, 2^63). The sign test runs on a
/// widened adder so that K * s cannot wrap around the ring: the full sum bits
/// of s are recovered, multiplied by K with shifts and adds, complemented and
/// offset by 2^f + 1.
inline Aby2Share relu_gain_offset(Party& party, const Aby2Share& s) {
  const auto& cfg = party.config();
  const std::size_t n = s.size();
  if (n == 0) return s;
  const ring_t gain = cfg.indicator_gain;
  const unsigned width = 64 + static_cast<unsigned>(std::bit_width(gain));
  const std::size_t w = plane_words(n);
  const std::size_t terms = static_cast<std::size_t>(std::popcount(gain));

  const std::uint64_t op = party.next_op();
  const std::size_t need = adder_and_words(64, n) + (terms - 1) * adder_and_words(width, n) + adder_and_words(width, n);
  auto triples = party.correlated().bool_triples(op, need);

  const auto parts = s.additive();
  auto [a, b] = operand_planes(party, parts.values);
  auto bits = add_planes(party, triples, a, b);

  auto shifted = [&](unsigned k) {
    std::vector<BitPlane> out(width, BitPlane(w, 0));
    for (unsigned j = 0; j + k < width && j < 64; ++j) out[j + k] = bits[j];
    return out;
  };
  std::vector<BitPlane> scaled;
  for (unsigned k = 0; k < 64; ++k) {
    if (!((gain >> k) & 1U)) continue;
    scaled = scaled.empty() ? shifted(k) : add_planes(party, triples, scaled, shifted(k));
  }
  if (party.is_first()) {
    for (auto& plane : scaled) {
      for (auto& x : plane) x = ~x;
    }
  }
  const auto diff = add_public_planes(party, triples, scaled, cfg.one() + 1, true);
  const auto sign = plane_to_bits(diff[width - 1], n);

  const auto value = share_add_public(share_scale(s, ring_t{0} - gain), cfg.one());
  return select_unless(party, value.additive(), sign);
}

}  // namespace smpcnn
