#pragma once

// Clear ring-level bilinear maps used by multiplicative gates, the correlated
// randomness backends and the plaintext oracle. All arithmetic wraps mod 2^64.

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smpcnn/errors.hpp"
#include "smpcnn/ring.hpp"
#include "smpcnn/tensor.hpp"

namespace smpcnn {

struct ConvParams {
  std::size_t n_ker = 1;
  std::size_t k_row = 1;
  std::size_t k_col = 1;
  std::size_t i_ch = 1;
  std::array<std::size_t, 2> stride{1, 1};          // row, col
  std::array<std::size_t, 4> pad{0, 0, 0, 0};       // top, bottom, left, right

  std::size_t pad_top() const noexcept { return pad[0]; }
  std::size_t pad_bottom() const noexcept { return pad[1]; }
  std::size_t pad_left() const noexcept { return pad[2]; }
  std::size_t pad_right() const noexcept { return pad[3]; }

  Shape kernel_dims() const { return {n_ker, i_ch, k_row, k_col}; }

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct ConvDims {
  std::size_t channels;
  std::size_t rows;
  std::size_t cols;

  Shape shape() const { return {channels, rows, cols}; }
  friend bool operator==(const ConvDims&, const ConvDims&) = default;
};

/// Output geometry: o = floor((i + pads - k) / s) + 1 per axis, o_ch = n_ker.
inline ConvDims conv_output_dims(const Shape& in, const ConvParams& p) {
  if (in.size() != 3) {
    throw ShapeError("convolution input must be channels x rows x cols, got " + to_string(in));
  }
  if (p.stride[0] == 0 || p.stride[1] == 0) {
    throw ShapeError("convolution strides must be >= 1");
  }
  if (p.n_ker == 0 || p.k_row == 0 || p.k_col == 0) {
    throw ShapeError("convolution kernel dimensions must be >= 1");
  }
  if (in[0] != p.i_ch) {
    throw ShapeError("input has " + std::to_string(in[0]) + " channels, kernels expect " +
                     std::to_string(p.i_ch));
  }
  const std::size_t rows = in[1] + p.pad_top() + p.pad_bottom();
  const std::size_t cols = in[2] + p.pad_left() + p.pad_right();
  if (p.k_row > rows || p.k_col > cols) {
    throw ShapeError("kernel " + std::to_string(p.k_row) + "x" + std::to_string(p.k_col) +
                     " larger than padded input " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  return {p.n_ker, (rows - p.k_row) / p.stride[0] + 1, (cols - p.k_col) / p.stride[1] + 1};
}

inline std::uint64_t mult_count_conv(const Shape& in, const ConvParams& p) {
  const auto o = conv_output_dims(in, p);
  return static_cast<std::uint64_t>(o.channels) * o.rows * o.cols * p.i_ch * p.k_row * p.k_col;
}

inline std::uint64_t mult_count_dense(std::size_t out_rows, std::size_t in_cols) {
  return static_cast<std::uint64_t>(out_rows) * in_cols;
}

enum class GateKind : std::uint8_t {
  hadamard = 1,
  matmul = 2,
  conv = 3,
  bool_triple = 4,
  arith_triple = 5,
};

inline const char* to_string(GateKind k) {
  switch (k) {
    case GateKind::hadamard: return "hadamard";
    case GateKind::matmul: return "matmul";
    case GateKind::conv: return "conv";
    case GateKind::bool_triple: return "bool_triple";
    case GateKind::arith_triple: return "arith_triple";
  }
  return "unknown";
}

/// Shape of a bilinear gate. For matmul, `a` is m x k and `b` is k x n or a
/// length-k vector. For conv, `a` holds kernels and `b` the input volume.
struct BilinearSpec {
  GateKind kind = GateKind::hadamard;
  Shape a_dims;
  Shape b_dims;
  ConvParams conv;

  static BilinearSpec hadamard(Shape dims) { return {GateKind::hadamard, dims, dims, {}}; }
  static BilinearSpec matmul(Shape a, Shape b) { return {GateKind::matmul, std::move(a), std::move(b), {}}; }
  static BilinearSpec convolution(const ConvParams& p, Shape input) {
    return {GateKind::conv, p.kernel_dims(), std::move(input), p};
  }

  Shape output_dims() const {
    switch (kind) {
      case GateKind::hadamard:
        require_same_dims(a_dims, b_dims, "hadamard");
        return a_dims;
      case GateKind::matmul: {
        if (a_dims.size() != 2 || b_dims.empty() || b_dims.size() > 2 || a_dims[1] != b_dims[0]) {
          throw ShapeError("matmul: incompatible shapes " + to_string(a_dims) + " and " + to_string(b_dims));
        }
        if (b_dims.size() == 1) return {a_dims[0]};
        return {a_dims[0], b_dims[1]};
      }
      case GateKind::conv: {
        if (a_dims != conv.kernel_dims()) {
          throw ShapeError("conv: kernel tensor " + to_string(a_dims) + " does not match parameters " +
                           to_string(conv.kernel_dims()));
        }
        return conv_output_dims(b_dims, conv).shape();
      }
      default:
        throw ShapeError(std::string("not a bilinear gate kind: ") + to_string(kind));
    }
  }

  friend bool operator==(const BilinearSpec&, const BilinearSpec&) = default;
};

namespace detail {

inline void hadamard_into(std::span<const ring_t> a, std::span<const ring_t> b, std::span<ring_t> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
}

inline void matmul_into(std::span<const ring_t> a, std::span<const ring_t> b, std::span<ring_t> out,
                        std::size_t m, std::size_t k, std::size_t n) {
  std::fill(out.begin(), out.end(), ring_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    ring_t* row = out.data() + i * n;
    for (std::size_t t = 0; t < k; ++t) {
      const ring_t av = a[i * k + t];
      const ring_t* brow = b.data() + t * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

inline void conv_into(std::span<const ring_t> kernels, std::span<const ring_t> input, std::span<ring_t> out,
                      const ConvParams& p, const Shape& in_dims, const ConvDims& o) {
  const std::size_t i_rows = in_dims[1];
  const std::size_t i_cols = in_dims[2];
  const auto pt = static_cast<std::ptrdiff_t>(p.pad_top());
  const auto pl = static_cast<std::ptrdiff_t>(p.pad_left());
  for (std::size_t oc = 0; oc < o.channels; ++oc) {
    for (std::size_t orow = 0; orow < o.rows; ++orow) {
      for (std::size_t ocol = 0; ocol < o.cols; ++ocol) {
        ring_t acc = 0;
        const auto r0 = static_cast<std::ptrdiff_t>(orow * p.stride[0]) - pt;
        const auto c0 = static_cast<std::ptrdiff_t>(ocol * p.stride[1]) - pl;
        for (std::size_t ic = 0; ic < p.i_ch; ++ic) {
          const ring_t* kbase = kernels.data() + ((oc * p.i_ch + ic) * p.k_row) * p.k_col;
          const ring_t* ibase = input.data() + ic * i_rows * i_cols;
          for (std::size_t kr = 0; kr < p.k_row; ++kr) {
            const auto r = r0 + static_cast<std::ptrdiff_t>(kr);
            if (r < 0 || r >= static_cast<std::ptrdiff_t>(i_rows)) continue;
            for (std::size_t kc = 0; kc < p.k_col; ++kc) {
              const auto c = c0 + static_cast<std::ptrdiff_t>(kc);
              if (c < 0 || c >= static_cast<std::ptrdiff_t>(i_cols)) continue;
              acc += kbase[kr * p.k_col + kc] * ibase[static_cast<std::size_t>(r) * i_cols + static_cast<std::size_t>(c)];
            }
          }
        }
        out[(oc * o.rows + orow) * o.cols + ocol] = acc;
      }
    }
  }
}

}  // namespace detail

/// Evaluates the gate's bilinear map on clear ring words.
inline std::vector<ring_t> apply_bilinear(const BilinearSpec& spec, std::span<const ring_t> a,
                                          std::span<const ring_t> b) {
  const Shape out_dims = spec.output_dims();
  if (a.size() != numel(spec.a_dims) || b.size() != numel(spec.b_dims)) {
    throw ShapeError(std::string(to_string(spec.kind)) + ": operand sizes do not match declared shapes");
  }
  std::vector<ring_t> out(numel(out_dims));
  switch (spec.kind) {
    case GateKind::hadamard:
      detail::hadamard_into(a, b, out);
      break;
    case GateKind::matmul: {
      const std::size_t n = spec.b_dims.size() == 1 ? 1 : spec.b_dims[1];
      detail::matmul_into(a, b, out, spec.a_dims[0], spec.a_dims[1], n);
      break;
    }
    case GateKind::conv:
      detail::conv_into(a, b, out, spec.conv, spec.b_dims, conv_output_dims(spec.b_dims, spec.conv));
      break;
    default:
      throw ShapeError("not a bilinear gate kind");
  }
  return out;
}

inline RingTensor apply_bilinear(const BilinearSpec& spec, const RingTensor& a, const RingTensor& b) {
  return RingTensor(spec.output_dims(), apply_bilinear(spec, std::span<const ring_t>(a.data),
                                                       std::span<const ring_t>(b.data)));
}

}  // namespace smpcnn
