#pragma once

// Fixed-point arithmetic over Z_2^64.
//
// Ring elements are plain uint64_t words; unsigned arithmetic wraps mod 2^64,
// which is exactly the ring semantics. Signed views use two's complement.

#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>

#include "smpcnn/errors.hpp"

namespace smpcnn {

using ring_t = std::uint64_t;

constexpr std::int64_t to_signed(ring_t x) noexcept { return static_cast<std::int64_t>(x); }
constexpr ring_t from_signed(std::int64_t x) noexcept { return static_cast<ring_t>(x); }

struct FixedPointConfig {
  unsigned fraction_bits = 13;
  // Gain applied inside the indicator; must exceed 2^fraction_bits.
  ring_t indicator_gain = ring_t{1} << 14;

  ring_t one() const noexcept { return ring_t{1} << fraction_bits; }

  void validate() const {
    if (fraction_bits == 0 || fraction_bits >= 62) {
      throw ConfigError("fraction bits must be in [1, 61], got " + std::to_string(fraction_bits));
    }
    if (indicator_gain <= one()) {
      throw ConfigError("indicator gain " + std::to_string(indicator_gain) +
                        " must exceed 2^" + std::to_string(fraction_bits));
    }
    if (indicator_gain >= (ring_t{1} << 62)) {
      throw ConfigError("indicator gain must be below 2^62");
    }
  }

  friend bool operator==(const FixedPointConfig&, const FixedPointConfig&) = default;
};

/// Encodes a real as round(x * 2^f) in two's complement, rounding half away
/// from zero. Accepts the representable range [-2^(63-f), 2^(63-f)).
template <std::floating_point T>
ring_t encode(T x, const FixedPointConfig& cfg) {
  const T limit = std::ldexp(T{1}, 63 - static_cast<int>(cfg.fraction_bits));
  if (!(x >= -limit && x < limit)) {
    throw RangeError("value out of fixed-point range");
  }
  const T scaled = std::ldexp(x, static_cast<int>(cfg.fraction_bits));
  // llround saturates (and raises) for 2^63; the range check above keeps
  // |scaled| <= 2^63 with equality only at the exact lower bound.
  if (scaled <= -std::ldexp(T{1}, 63)) {
    return ring_t{1} << 63;
  }
  const T rounded = std::round(scaled);
  if (rounded >= std::ldexp(T{1}, 63)) {
    throw RangeError("value rounds outside fixed-point range");
  }
  return from_signed(static_cast<std::int64_t>(rounded));
}

inline ring_t encode(int x, const FixedPointConfig& cfg) { return encode(static_cast<double>(x), cfg); }

template <std::floating_point T = double>
T decode(ring_t e, const FixedPointConfig& cfg) {
  return std::ldexp(static_cast<T>(to_signed(e)), -static_cast<int>(cfg.fraction_bits));
}

/// Local truncation of one additive part of a 2f-precision product. Party 0
/// shifts its part arithmetically; party 1 shifts the negation of its part and
/// negates back. The two results sum to the truncated product within one ulp.
constexpr ring_t truncate_part(ring_t part, int party, unsigned fraction_bits) noexcept {
  if (party == 0) {
    return from_signed(to_signed(part) >> fraction_bits);
  }
  return ring_t{0} - from_signed(to_signed(ring_t{0} - part) >> fraction_bits);
}

inline ring_t truncate_part(ring_t part, int party, const FixedPointConfig& cfg) noexcept {
  return truncate_part(part, party, cfg.fraction_bits);
}

/// Clear-value truncation used by the plaintext oracle (floor division).
constexpr ring_t truncate_clear(ring_t value, unsigned fraction_bits) noexcept {
  return from_signed(to_signed(value) >> fraction_bits);
}

constexpr bool sign_bit(ring_t x) noexcept { return (x >> 63) != 0; }

}  // namespace smpcnn
