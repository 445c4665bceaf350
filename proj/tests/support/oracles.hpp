#pragma once

// Reference computations for tests. Written independently of the library
// kernels: conv works on an explicitly padded copy, products use 128-bit
// integers, split coverage is brute-forced row by row.

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "smpcnn/bilinear.hpp"
#include "smpcnn/ring.hpp"
#include "smpcnn/tensor.hpp"

namespace oracle {

using smpcnn::ring_t;

inline std::int64_t s64(ring_t v) { return static_cast<std::int64_t>(v); }

/// floor(a*b / 2^f) over exact integers, wrapped into the ring.
inline ring_t fx_mul(ring_t a, ring_t b, unsigned f) {
  const __int128 p = static_cast<__int128>(s64(a)) * static_cast<__int128>(s64(b));
  return static_cast<ring_t>(static_cast<std::uint64_t>(static_cast<__int128>(p >> f)));
}

/// Sum of exact products, then one floor division by 2^f.
inline ring_t fx_dot(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b, unsigned f) {
  __int128 acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<__int128>(a[i]) * b[i];
  return static_cast<ring_t>(static_cast<std::uint64_t>(static_cast<__int128>(acc >> f)));
}

inline std::vector<ring_t> hadamard(const std::vector<ring_t>& a, const std::vector<ring_t>& b, unsigned f) {
  std::vector<ring_t> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fx_mul(a[i], b[i], f);
  return out;
}

/// [m x k] * [k x n]
inline std::vector<ring_t> matmul(const std::vector<ring_t>& a, const std::vector<ring_t>& b, std::size_t m,
                                  std::size_t k, std::size_t n, unsigned f) {
  std::vector<ring_t> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<std::int64_t> row, col;
      for (std::size_t t = 0; t < k; ++t) {
        row.push_back(s64(a[i * k + t]));
        col.push_back(s64(b[t * n + j]));
      }
      out[i * n + j] = fx_dot(row, col, f);
    }
  return out;
}

struct Conv {
  std::size_t n_ker, i_ch, k_row, k_col, s_row, s_col, pt, pb, pl, pr;
};

/// Convolution on an explicitly zero-padded copy of the input.
inline std::vector<ring_t> conv(const std::vector<ring_t>& w, const std::vector<ring_t>& x, std::size_t rows,
                                std::size_t cols, const Conv& p, unsigned f, std::size_t* out_rows = nullptr,
                                std::size_t* out_cols = nullptr) {
  const std::size_t pr_ = rows + p.pt + p.pb, pc = cols + p.pl + p.pr;
  std::vector<std::int64_t> padded(p.i_ch * pr_ * pc, 0);
  for (std::size_t c = 0; c < p.i_ch; ++c)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t q = 0; q < cols; ++q) padded[(c * pr_ + r + p.pt) * pc + q + p.pl] = s64(x[(c * rows + r) * cols + q]);
  std::size_t orows = 0, ocols = 0;
  for (std::size_t r = 0; r + p.k_row <= pr_; r += p.s_row) ++orows;
  for (std::size_t q = 0; q + p.k_col <= pc; q += p.s_col) ++ocols;
  if (out_rows) *out_rows = orows;
  if (out_cols) *out_cols = ocols;
  std::vector<ring_t> out;
  for (std::size_t k = 0; k < p.n_ker; ++k)
    for (std::size_t orow = 0; orow < orows; ++orow)
      for (std::size_t ocol = 0; ocol < ocols; ++ocol) {
        std::vector<std::int64_t> wv, xv;
        for (std::size_t c = 0; c < p.i_ch; ++c)
          for (std::size_t a = 0; a < p.k_row; ++a)
            for (std::size_t b = 0; b < p.k_col; ++b) {
              wv.push_back(s64(w[((k * p.i_ch + c) * p.k_row + a) * p.k_col + b]));
              xv.push_back(padded[(c * pr_ + orow * p.s_row + a) * pc + ocol * p.s_col + b]);
            }
        out.push_back(fx_dot(wv, xv, f));
      }
  return out;
}

inline smpcnn::ConvParams to_params(const Conv& p) {
  smpcnn::ConvParams c;
  c.n_ker = p.n_ker;
  c.i_ch = p.i_ch;
  c.k_row = p.k_row;
  c.k_col = p.k_col;
  c.stride = {p.s_row, p.s_col};
  c.pad = {p.pt, p.pb, p.pl, p.pr};
  return c;
}

/// Highest index among the maxima of signed values.
inline std::size_t argmax(const std::vector<ring_t>& v) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (s64(v[i]) >= s64(v[best])) best = i;
  return best;
}

/// Output rows (0-based) produced by a chunk spanning padded rows [s, e]
/// (1-based, inclusive): every kernel window that lies inside the chunk and
/// starts on the stride grid.
inline std::vector<std::size_t> rows_covered(std::size_t s, std::size_t e, std::size_t padded_rows, std::size_t k,
                                             std::size_t stride) {
  std::vector<std::size_t> out;
  for (std::size_t o = 0; o * stride + k <= padded_rows; ++o) {
    const std::size_t first = o * stride + 1, last = o * stride + k;
    if (first >= s && last <= e && (first - s) % stride == 0) out.push_back(o);
  }
  return out;
}

/// Max |a - b| over signed ring values.
inline std::uint64_t max_abs_diff(const std::vector<ring_t>& a, const std::vector<ring_t>& b) {
  std::uint64_t worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::int64_t d = s64(a[i] - b[i]);
    worst = std::max<std::uint64_t>(worst, static_cast<std::uint64_t>(d < 0 ? -d : d));
  }
  return worst;
}

/// Random fixed-point values in [-bound, bound).
inline std::vector<ring_t> random_fixed(std::mt19937_64& g, std::size_t n, double bound, unsigned f) {
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<ring_t> out(n);
  for (auto& v : out) v = static_cast<ring_t>(static_cast<std::int64_t>(std::llround(u(g) * std::ldexp(1.0, static_cast<int>(f)))));
  return out;
}

}  // namespace oracle
