#pragma once

// ABY2.0 arithmetic sharing over Z_2^64.
//
// A secret x is held as a public value Delta (identical at both servers) and a
// mask delta = [delta]_0 + [delta]_1 split additively, with x = Delta - delta.
// Server i stores the pair (Delta, [delta]_i).

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smpcnn/errors.hpp"
#include "smpcnn/party.hpp"
#include "smpcnn/prg.hpp"
#include "smpcnn/ring.hpp"
#include "smpcnn/tensor.hpp"

namespace smpcnn {

/// One party's additive contribution; the two parties' values sum to the
/// clear tensor.
struct AdditiveParts {
  Shape dims;
  std::vector<ring_t> values;

  std::size_t size() const noexcept { return values.size(); }
};

struct Aby2Share {
  Shape dims;
  std::vector<ring_t> pub;   // Delta
  std::vector<ring_t> priv;  // [delta]_party
  int party = 0;

  Aby2Share() = default;
  Aby2Share(Shape d, std::vector<ring_t> delta_pub, std::vector<ring_t> delta_priv, int p)
      : dims(std::move(d)), pub(std::move(delta_pub)), priv(std::move(delta_priv)), party(p) {
    validate();
  }

  std::size_t size() const noexcept { return pub.size(); }

  void validate() const {
    const std::size_t n = numel(dims);
    if (pub.size() != n || priv.size() != n) {
      throw ShapeError("share of shape " + to_string(dims) + " carries " + std::to_string(pub.size()) + "/" +
                       std::to_string(priv.size()) + " values");
    }
    if (party != 0 && party != 1) throw ProtocolError("share party must be 0 or 1");
  }

  /// x_0 = Delta - [delta]_0 at party 0, x_1 = -[delta]_1 at party 1.
  AdditiveParts additive() const {
    AdditiveParts out{dims, std::vector<ring_t>(size())};
    for (std::size_t i = 0; i < size(); ++i) out.values[i] = party == 0 ? pub[i] - priv[i] : ring_t{0} - priv[i];
    return out;
  }

  /// Same values viewed under a new shape with equal element count.
  Aby2Share reshaped(Shape d) const {
    if (numel(d) != size()) throw ShapeError("cannot reshape " + to_string(dims) + " to " + to_string(d));
    Aby2Share out = *this;
    out.dims = std::move(d);
    return out;
  }

  friend bool operator==(const Aby2Share&, const Aby2Share&) = default;
};

/// Shares with caller-chosen masks; Delta = clear + mask0 + mask1.
inline std::pair<Aby2Share, Aby2Share> make_shares_with_masks(const RingTensor& clear, std::span<const ring_t> mask0,
                                                              std::span<const ring_t> mask1) {
  if (mask0.size() != clear.size() || mask1.size() != clear.size()) {
    throw ShapeError("mask length does not match tensor " + to_string(clear.dims));
  }
  std::vector<ring_t> pub(clear.size());
  for (std::size_t i = 0; i < clear.size(); ++i) pub[i] = clear[i] + mask0[i] + mask1[i];
  return {Aby2Share(clear.dims, pub, {mask0.begin(), mask0.end()}, 0),
          Aby2Share(clear.dims, pub, {mask1.begin(), mask1.end()}, 1)};
}

/// Data-provider sharing: both mask parts uniform over Z_2^64.
inline std::pair<Aby2Share, Aby2Share> make_shares(const RingTensor& clear, Prg& prg) {
  const auto m0 = prg.words(clear.size());
  const auto m1 = prg.words(clear.size());
  return make_shares_with_masks(clear, m0, m1);
}

inline std::pair<Aby2Share, Aby2Share> make_shares(const RingTensor& clear, std::uint64_t seed,
                                                   std::uint64_t stream = 0) {
  Prg prg(seed, PrgDomain::provider, stream);
  return make_shares(clear, prg);
}

/// Delta - [delta]_0 - [delta]_1. Needs both parties' shares, which only a
/// data provider (or a test) ever holds.
inline RingTensor reconstruct(const Aby2Share& s0, const Aby2Share& s1) {
  s0.validate();
  s1.validate();
  if (s0.party != 0 || s1.party != 1) {
    throw ProtocolError("reconstruction needs the shares of party 0 and party 1");
  }
  if (s0.dims != s1.dims) {
    throw ProtocolError("share shapes differ: " + to_string(s0.dims) + " vs " + to_string(s1.dims));
  }
  RingTensor out(s0.dims);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (s0.pub[i] != s1.pub[i]) throw ProtocolError("public values differ at element " + std::to_string(i));
    out[i] = s0.pub[i] - s0.priv[i] - s1.priv[i];
  }
  return out;
}

inline RingTensor reconstruct_parts(const AdditiveParts& p0, const AdditiveParts& p1) {
  if (p0.dims != p1.dims || p0.size() != p1.size()) throw ProtocolError("additive part shapes differ");
  RingTensor out(p0.dims);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p0.values[i] + p1.values[i];
  return out;
}

/// Converts additive parts of y into a fresh ABY2.0 share of y: each party
/// adds a fresh mask part, the masked parts are exchanged (RESHARE) and summed
/// into Delta. One communication round; bit-exact.
inline Aby2Share reshare(Party& party, const AdditiveParts& parts) {
  const std::uint64_t op = party.next_op();
  Prg prg = party.masks(op);
  std::vector<ring_t> mask = prg.words(parts.size());

  std::vector<ring_t> msg;
  msg.reserve(parts.size() + parts.dims.size() + 1);
  msg.push_back(parts.dims.size());
  for (auto d : parts.dims) msg.push_back(d);
  const std::size_t header = msg.size();
  for (std::size_t i = 0; i < parts.size(); ++i) msg.push_back(parts.values[i] + mask[i]);

  std::vector<ring_t> theirs;
  try {
    theirs = party.exchange(MsgType::reshare, op, msg);
  } catch (const ProtocolError&) {
    throw ProtocolError("reshare op " + std::to_string(op) + ": parties disagree on shape " + to_string(parts.dims));
  }
  for (std::size_t i = 0; i < header; ++i) {
    if (theirs[i] != msg[i]) {
      throw ProtocolError("reshare op " + std::to_string(op) + ": parties disagree on shape " + to_string(parts.dims));
    }
  }
  std::vector<ring_t> pub(parts.size());
  for (std::size_t i = 0; i < parts.size(); ++i) pub[i] = msg[header + i] + theirs[header + i];
  return Aby2Share(parts.dims, std::move(pub), std::move(mask), party.index());
}

// ---------------------------------------------------------------------------
// Local linear arithmetic on shares. No communication.

inline Aby2Share share_add(const Aby2Share& a, const Aby2Share& b) {
  require_same_dims(a.dims, b.dims, "add");
  Aby2Share out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.pub[i] += b.pub[i];
    out.priv[i] += b.priv[i];
  }
  return out;
}

inline Aby2Share share_negate(const Aby2Share& a) {
  Aby2Share out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.pub[i] = ring_t{0} - a.pub[i];
    out.priv[i] = ring_t{0} - a.priv[i];
  }
  return out;
}

inline Aby2Share share_sub(const Aby2Share& a, const Aby2Share& b) { return share_add(a, share_negate(b)); }

/// Exact multiplication by an integer constant (no fixed-point rescaling).
inline Aby2Share share_scale(const Aby2Share& a, ring_t k) {
  Aby2Share out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.pub[i] *= k;
    out.priv[i] *= k;
  }
  return out;
}

/// Adds a public constant to every element.
inline Aby2Share share_add_public(const Aby2Share& a, ring_t c) {
  Aby2Share out = a;
  for (auto& v : out.pub) v += c;
  return out;
}

/// A public value as a share with zero masks.
inline Aby2Share share_public(const RingTensor& t, int party) {
  return Aby2Share(t.dims, t.data, std::vector<ring_t>(t.size(), 0), party);
}

/// Elements at `idx`, as a flat share.
inline Aby2Share share_gather(const Aby2Share& a, std::span<const std::size_t> idx) {
  Aby2Share out;
  out.dims = {idx.size()};
  out.party = a.party;
  out.pub.reserve(idx.size());
  out.priv.reserve(idx.size());
  for (auto i : idx) {
    if (i >= a.size()) throw ShapeError("gather index out of range");
    out.pub.push_back(a.pub[i]);
    out.priv.push_back(a.priv[i]);
  }
  return out;
}

/// Concatenates flat shares.
inline Aby2Share share_concat(const Aby2Share& a, const Aby2Share& b) {
  if (a.party != b.party) throw ProtocolError("cannot concatenate shares of different parties");
  Aby2Share out;
  out.party = a.party;
  out.dims = {a.size() + b.size()};
  out.pub = a.pub;
  out.pub.insert(out.pub.end(), b.pub.begin(), b.pub.end());
  out.priv = a.priv;
  out.priv.insert(out.priv.end(), b.priv.begin(), b.priv.end());
  return out;
}

}  // namespace smpcnn
