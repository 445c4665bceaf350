#pragma once

// Plaintext reference inference: the secure pipeline's computation graph in
// clear ring arithmetic, with one truncation per multiplicative output element
// and the highest-index argmax tie-break. A double-precision variant serves as
// an informational comparator.

#include <cstddef>
#include <vector>

#include "smpcnn/bilinear.hpp"
#include "smpcnn/model.hpp"
#include "smpcnn/ring.hpp"
#include "smpcnn/tensor_io.hpp"

namespace smpcnn {

template <class T>
std::size_t argmax_highest(const std::vector<T>& v) {
  if (v.empty()) throw ShapeError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[best])) best = i;
  }
  return best;
}

inline std::size_t argmax_highest_ring(const std::vector<ring_t>& v) {
  std::vector<std::int64_t> s(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) s[i] = to_signed(v[i]);
  return argmax_highest(s);
}

struct OracleTrace {
  std::vector<RingTensor> activations;  // after each layer
  std::size_t label = 0;
};

/// Clear fixed-point forward pass on encoded tensors.
inline OracleTrace oracle_forward(const ModelSpec& spec, const std::vector<RingTensor>& weights,
                                  const std::vector<RingTensor>& biases, const RingTensor& image,
                                  const FixedPointConfig& cfg) {
  OracleTrace trace;
  RingTensor h = image;
  h.dims = spec.input;
  for (std::size_t j = 0; j < spec.layers.size(); ++j) {
    const auto& l = spec.layers[j];
    RingTensor z;
    if (l.kind == LayerKind::conv) {
      z = apply_bilinear(BilinearSpec::convolution(l.conv, h.dims), weights[j], h);
      const std::size_t plane = z.size() / l.conv.n_ker;
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = truncate_clear(z[i], cfg.fraction_bits) + biases[j][i / plane];
    } else {
      RingTensor x({h.size()}, h.data);
      z = apply_bilinear(BilinearSpec::matmul(weights[j].dims, x.dims), weights[j], x);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = truncate_clear(z[i], cfg.fraction_bits) + biases[j][i];
    }
    if (l.relu) {
      for (auto& v : z.data) v = sign_bit(v) ? 0 : v;
    }
    trace.activations.push_back(z);
    h = std::move(z);
  }
  trace.label = argmax_highest_ring(h.data);
  return trace;
}

inline std::size_t oracle_inference(const ClearModel& model, const RealTensor& image, const FixedPointConfig& cfg) {
  model.validate();
  std::vector<RingTensor> w, b;
  for (std::size_t j = 0; j < model.spec.layers.size(); ++j) {
    w.push_back(encode_tensor(model.weights[j], cfg));
    w.back().dims = model.spec.layers[j].weight_dims();
    b.push_back(encode_tensor(model.biases[j], cfg));
  }
  return oracle_forward(model.spec, w, b, encode_tensor(image, cfg), cfg).label;
}

/// Same graph in double precision.
inline std::size_t float_inference(const ClearModel& model, const RealTensor& image) {
  model.validate();
  std::vector<double> h = image.data;
  Shape dims = model.spec.input;
  for (std::size_t j = 0; j < model.spec.layers.size(); ++j) {
    const auto& l = model.spec.layers[j];
    const auto& w = model.weights[j].data;
    const auto& b = model.biases[j].data;
    std::vector<double> z;
    if (l.kind == LayerKind::conv) {
      const auto& p = l.conv;
      const auto o = conv_output_dims(dims, p);
      z.assign(o.channels * o.rows * o.cols, 0.0);
      for (std::size_t oc = 0; oc < o.channels; ++oc)
        for (std::size_t r = 0; r < o.rows; ++r)
          for (std::size_t c = 0; c < o.cols; ++c) {
            double acc = 0;
            for (std::size_t ic = 0; ic < p.i_ch; ++ic)
              for (std::size_t kr = 0; kr < p.k_row; ++kr)
                for (std::size_t kc = 0; kc < p.k_col; ++kc) {
                  const auto ir = static_cast<std::ptrdiff_t>(r * p.stride[0] + kr) - static_cast<std::ptrdiff_t>(p.pad[0]);
                  const auto icol = static_cast<std::ptrdiff_t>(c * p.stride[1] + kc) - static_cast<std::ptrdiff_t>(p.pad[2]);
                  if (ir < 0 || icol < 0 || ir >= static_cast<std::ptrdiff_t>(dims[1]) ||
                      icol >= static_cast<std::ptrdiff_t>(dims[2]))
                    continue;
                  acc += w[((oc * p.i_ch + ic) * p.k_row + kr) * p.k_col + kc] *
                         h[(ic * dims[1] + static_cast<std::size_t>(ir)) * dims[2] + static_cast<std::size_t>(icol)];
                }
            z[(oc * o.rows + r) * o.cols + c] = acc + b[oc];
          }
      dims = o.shape();
    } else {
      z.assign(l.out, 0.0);
      for (std::size_t i = 0; i < l.out; ++i) {
        double acc = 0;
        for (std::size_t k = 0; k < l.in; ++k) acc += w[i * l.in + k] * h[k];
        z[i] = acc + b[i];
      }
      dims = {l.out};
    }
    if (l.relu) {
      for (auto& v : z) v = v < 0 ? 0 : v;
    }
    h = std::move(z);
  }
  return argmax_highest(h);
}

}  // namespace smpcnn
