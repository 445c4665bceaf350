#pragma once

// Tensorized secure operations over ABY2.0 shares.

#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "smpcnn/bilinear.hpp"
#include "smpcnn/comparison.hpp"
#include "smpcnn/party.hpp"
#include "smpcnn/sharing.hpp"

namespace smpcnn {

inline Aby2Share secure_add(const Aby2Share& a, const Aby2Share& b) { return share_add(a, b); }
inline Aby2Share secure_negate(const Aby2Share& a) { return share_negate(a); }
inline Aby2Share secure_sub(const Aby2Share& a, const Aby2Share& b) { return share_sub(a, b); }

/// Generic multiplicative gate y = a (*) b for a bilinear (*).
///
/// Setup: this party's part of delta_a (*) delta_b from the correlated backend.
/// Online: part_i = setup_i - Delta_a (*) [delta_b]_i - [delta_a]_i (*) Delta_b
/// (+ Delta_a (*) Delta_b at party 1), truncated locally and re-shared.
inline Aby2Share secure_bilinear(Party& party, const BilinearSpec& spec, const Aby2Share& a, const Aby2Share& b,
                                 bool truncate = true) {
  require_same_dims(a.dims, spec.a_dims, "bilinear gate (left operand)");
  require_same_dims(b.dims, spec.b_dims, "bilinear gate (right operand)");
  const Shape out_dims = spec.output_dims();
  const std::uint64_t op = party.next_op();

  std::vector<ring_t> part = party.correlated().cross_terms(op, spec, a.priv, b.priv);
  if (part.size() != numel(out_dims)) throw ProtocolError("correlated part has the wrong length");
  {
    const auto t1 = apply_bilinear(spec, a.pub, b.priv);
    const auto t2 = apply_bilinear(spec, a.priv, b.pub);
    for (std::size_t i = 0; i < part.size(); ++i) part[i] -= t1[i] + t2[i];
  }
  if (!party.is_first()) {
    const auto t3 = apply_bilinear(spec, a.pub, b.pub);
    for (std::size_t i = 0; i < part.size(); ++i) part[i] += t3[i];
  }
  if (truncate) {
    for (auto& v : part) v = truncate_part(v, party.index(), party.config());
  }
  return reshare(party, AdditiveParts{out_dims, std::move(part)});
}

inline Aby2Share secure_hadamard(Party& party, const Aby2Share& a, const Aby2Share& b) {
  require_same_dims(a.dims, b.dims, "hadamard");
  return secure_bilinear(party, BilinearSpec::hadamard(a.dims), a, b);
}

/// w is m x k; x is k or k x n.
inline Aby2Share secure_matmul(Party& party, const Aby2Share& w, const Aby2Share& x) {
  return secure_bilinear(party, BilinearSpec::matmul(w.dims, x.dims), w, x);
}

/// Convolution of x (i_ch x rows x cols) with kernels (n_ker x i_ch x k_row x
/// k_col). One truncation per output element; bias (n_ker values, one per
/// output channel, or the full output shape) is added afterwards.
inline Aby2Share secure_conv2d(Party& party, const Aby2Share& kernels, const Aby2Share& x, const Aby2Share* bias,
                               const ConvParams& p) {
  auto y = secure_bilinear(party, BilinearSpec::convolution(p, x.dims), kernels, x);
  if (!bias) return y;
  if (bias->dims == y.dims) return share_add(y, *bias);
  if (bias->size() != p.n_ker) {
    throw ShapeError("conv bias of shape " + to_string(bias->dims) + " does not fit output " + to_string(y.dims));
  }
  const std::size_t plane = y.size() / p.n_ker;
  for (std::size_t c = 0; c < p.n_ker; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      y.pub[c * plane + i] += bias->pub[c];
      y.priv[c * plane + i] += bias->priv[c];
    }
  }
  return y;
}

namespace detail {

inline Aby2Share truncate_and_reshare(Party& party, Shape dims, std::vector<ring_t> part) {
  for (auto& v : part) v = truncate_part(v, party.index(), party.config());
  return reshare(party, AdditiveParts{std::move(dims), std::move(part)});
}

}  // namespace detail

/// Clear matrix c (m x k) times shared b (k or k x n), fixed-point.
inline Aby2Share secure_const_matmul(Party& party, const RingTensor& c, const Aby2Share& b) {
  const auto spec = BilinearSpec::matmul(c.dims, b.dims);
  const auto parts = b.additive();
  return detail::truncate_and_reshare(party, spec.output_dims(), apply_bilinear(spec, c.data, parts.values));
}

/// Clear tensor c times shared b elementwise, fixed-point.
inline Aby2Share secure_const_hadamard(Party& party, const RingTensor& c, const Aby2Share& b) {
  require_same_dims(c.dims, b.dims, "const hadamard");
  const auto parts = b.additive();
  std::vector<ring_t> part(b.size());
  for (std::size_t i = 0; i < part.size(); ++i) part[i] = c[i] * parts.values[i];
  return detail::truncate_and_reshare(party, b.dims, std::move(part));
}

/// Maximum element via a tournament, max(a, b) = b + relu(a - b); all pairs of
/// a level share one ReLU call.
inline Aby2Share secure_maxreduce(Party& party, const Aby2Share& x) {
  if (x.size() == 0) throw ShapeError("maxreduce of an empty tensor");
  Aby2Share cur = x.reshaped({x.size()});
  while (cur.size() > 1) {
    const std::size_t pairs = cur.size() / 2;
    std::vector<std::size_t> left(pairs), right(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
      left[i] = 2 * i;
      right[i] = 2 * i + 1;
    }
    const auto a = share_gather(cur, left);
    const auto b = share_gather(cur, right);
    auto winners = share_add(b, secure_relu(party, share_sub(a, b)));
    if (cur.size() % 2) {
      const std::size_t last = cur.size() - 1;
      winners = share_concat(winners, share_gather(cur, std::span<const std::size_t>(&last, 1)));
    }
    cur = std::move(winners);
  }
  return cur.reshaped({1});
}

/// encode(1) where x >= 0 and 0 where x < 0, as ReLU(1 - K ReLU(-x)) with an
/// exact integer gain.
inline Aby2Share secure_indicator(Party& party, const Aby2Share& x) {
  return relu_gain_offset(party, secure_relu(party, share_negate(x)));
}

/// Index of the maximum element (highest index on ties), as a raw integer.
inline Aby2Share secure_argmax(Party& party, const Aby2Share& x) {
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("argmax of an empty tensor");
  const auto flat = x.reshaped({n});
  const auto z1 = secure_maxreduce(party, flat);
  const RingTensor ones({n, 1}, std::vector<ring_t>(n, party.config().one()));
  const auto z2 = secure_const_matmul(party, ones, z1);
  const auto z3 = share_sub(flat, z2);
  const auto z4 = secure_indicator(party, z3);
  RingTensor k({n});
  std::iota(k.data.begin(), k.data.end(), ring_t{0});
  const auto z5 = secure_const_hadamard(party, k, z4);
  return secure_maxreduce(party, z5);
}

/// Same computation one element at a time: running max, then per-element
/// indicator and index selection. Used as the non-tensorized baseline.
inline Aby2Share secure_argmax_scalar(Party& party, const Aby2Share& x) {
  const std::size_t n = x.size();
  if (n == 0) throw ShapeError("argmax of an empty tensor");
  auto elem = [](const Aby2Share& s, std::size_t i) { return share_gather(s, std::span<const std::size_t>(&i, 1)); };
  auto running_max = [&](const Aby2Share& v) {
    Aby2Share m = elem(v, 0);
    for (std::size_t i = 1; i < n; ++i) {
      const auto e = elem(v, i);
      m = share_add(m, secure_relu(party, share_sub(e, m)));
    }
    return m;
  };
  const auto flat = x.reshaped({n});
  const auto z1 = running_max(flat);
  const RingTensor one({1, 1}, {party.config().one()});
  Aby2Share z5;
  for (std::size_t i = 0; i < n; ++i) {
    const auto z2 = secure_const_matmul(party, one, z1);
    const auto z4 = secure_indicator(party, share_sub(elem(flat, i), z2));
    const auto z5i = secure_const_hadamard(party, RingTensor({1}, {ring_t{i}}), z4);
    z5 = i == 0 ? z5i : share_concat(z5, z5i);
  }
  return running_max(z5);
}

}  // namespace smpcnn
