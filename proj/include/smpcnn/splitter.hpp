#pragma once

// Bounded-memory layer execution: kernel groups (vertical split), row chunks
// of the padded input (horizontal split) and row blocks of dense weight
// matrices. Every chunk reads its operands from share files, runs as an
// isolated unit of work and writes its output to a chunk file; chunk files are
// then concatenated into the layer output.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "smpcnn/bilinear.hpp"
#include "smpcnn/errors.hpp"
#include "smpcnn/metrics.hpp"
#include "smpcnn/model.hpp"
#include "smpcnn/party.hpp"
#include "smpcnn/proto_tensor.hpp"
#include "smpcnn/share_io.hpp"

namespace smpcnn {

/// 1-based, inclusive row range of the padded input.
struct RowRange {
  std::size_t start = 1;
  std::size_t end = 1;

  friend bool operator==(const RowRange&, const RowRange&) = default;
};

/// Row-start and row-end indices of each horizontal split, computed exactly as
/// the published procedure states (1-based indices into the padded input).
inline std::vector<RowRange> horizontal_split_indices(std::size_t i_r, std::size_t k_row, std::size_t s_row,
                                                      std::size_t p_top, std::size_t p_bottom, std::size_t n_h) {
  if (s_row == 0 || k_row == 0) throw ConfigError("kernel rows and stride must be >= 1");
  const std::size_t d_r = i_r + p_top + p_bottom;
  if (k_row > d_r) throw ShapeError("kernel rows exceed padded input rows");
  const std::size_t o_r = (d_r - k_row) / s_row + 1;
  if (n_h < 1) throw ConfigError("number of horizontal splits must be >= 1");
  if (n_h > o_r) {
    throw ConfigError("number of horizontal splits " + std::to_string(n_h) + " exceeds output rows " +
                      std::to_string(o_r));
  }
  std::size_t h_r = o_r / n_h;
  std::vector<RowRange> out(n_h);
  std::size_t t = 0;
  for (std::size_t i = 1; i <= n_h; ++i) {
    if (i == n_h) h_r = o_r / n_h + o_r % n_h;
    RowRange& r = out[i - 1];
    r.start = i == 1 ? 1 : t - (k_row - 1) + s_row;
    r.end = r.start + (k_row - 1) + (h_r - 1) * s_row;
    t = r.end;
  }
  return out;
}

/// Output rows produced by a convolution over the given input rows.
inline std::size_t range_output_rows(const RowRange& r, std::size_t k_row, std::size_t s_row) {
  return (r.end - r.start + 1 - k_row) / s_row + 1;
}

/// Contiguous blocks (first, count): n blocks of floor(total / n), the last
/// also taking the remainder.
inline std::vector<std::pair<std::size_t, std::size_t>> block_ranges(std::size_t total, std::size_t n) {
  if (n < 1 || n > total) {
    throw ConfigError("cannot split " + std::to_string(total) + " into " + std::to_string(n) + " blocks");
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t h = total / n;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(i * h, i + 1 == n ? h + total % n : h);
  return out;
}

struct ConvSplit {
  std::size_t vertical = 1;  // number of kernel groups
  std::size_t n_h = 1;       // number of horizontal splits
};

struct SplitPlan {
  std::vector<ConvSplit> conv;     // one per conv layer, in order
  std::vector<std::size_t> dense;  // one per dense layer, in order

  static SplitPlan unsplit(const ModelSpec& m) {
    SplitPlan p;
    for (const auto& l : m.layers) {
      if (l.kind == LayerKind::conv) {
        p.conv.push_back({});
      } else {
        p.dense.push_back(1);
      }
    }
    return p;
  }

  /// Throws ConfigError when the plan does not fit the model.
  void validate(const ModelSpec& m) const {
    const auto shapes = m.shapes();
    std::size_t ci = 0, di = 0;
    for (std::size_t j = 0; j < m.layers.size(); ++j) {
      const auto& l = m.layers[j];
      if (l.kind == LayerKind::conv) {
        if (ci >= conv.size()) throw ConfigError("split plan lacks an entry for conv layer " + l.name);
        const auto& s = conv[ci++];
        if (s.vertical < 1 || s.vertical > l.conv.n_ker) {
          throw ConfigError("layer " + l.name + ": vertical split " + std::to_string(s.vertical) + " not in [1, " +
                            std::to_string(l.conv.n_ker) + "]");
        }
        horizontal_split_indices(shapes[j][1], l.conv.k_row, l.conv.stride[0], l.conv.pad[0], l.conv.pad[1], s.n_h);
      } else {
        if (di >= dense.size()) throw ConfigError("split plan lacks an entry for dense layer " + l.name);
        const auto n = dense[di++];
        if (n < 1 || n > l.out) {
          throw ConfigError("layer " + l.name + ": dense split " + std::to_string(n) + " not in [1, " +
                            std::to_string(l.out) + "]");
        }
      }
    }
    if (ci != conv.size() || di != dense.size()) throw ConfigError("split plan has more entries than the model");
  }
};

namespace detail {

inline std::string range_text(std::size_t a, std::size_t b) { return std::to_string(a) + "-" + std::to_string(b); }

inline std::filesystem::path chunk_path(const std::filesystem::path& dir, int party, const std::string& layer,
                                        std::size_t g, std::size_t h) {
  return dir / (layer + ".p" + std::to_string(party) + ".k" + std::to_string(g) + ".h" + std::to_string(h) + ".chunk");
}

inline Aby2Share slice_leading(const Aby2Share& s, std::size_t first, std::size_t count) {
  const std::size_t block = s.size() / s.dims[0];
  Shape d = s.dims;
  d[0] = count;
  const auto b = static_cast<std::ptrdiff_t>(first * block), e = static_cast<std::ptrdiff_t>((first + count) * block);
  return Aby2Share(d, {s.pub.begin() + b, s.pub.begin() + e}, {s.priv.begin() + b, s.priv.begin() + e}, s.party);
}

}  // namespace detail

struct ChunkedOptions {
  std::filesystem::path scratch;
  RunMetrics* metrics = nullptr;
  bool keep_chunks = false;
};

/// Convolution layer in kernel groups x row chunks. `bias_file` may be empty.
inline void run_conv_chunked(Party& party, const std::string& layer, const ConvParams& params, const ConvSplit& split,
                             const std::filesystem::path& kernel_file, const std::filesystem::path& bias_file,
                             const std::filesystem::path& input_file, const std::filesystem::path& out_file,
                             const ChunkedOptions& opt) {
  ShareFileHeader in_header;
  {
    ShareReader r(input_file);
    in_header = r.header();
  }
  const Shape in_dims = in_header.dims;
  const ConvDims o = conv_output_dims(in_dims, params);
  const auto groups = block_ranges(params.n_ker, split.vertical);
  const auto ranges =
      horizontal_split_indices(in_dims[1], params.k_row, params.stride[0], params.pad[0], params.pad[1], split.n_h);
  std::optional<Aby2Share> bias;
  if (!bias_file.empty()) bias = read_share_file(bias_file);
  std::filesystem::create_directories(opt.scratch);

  std::vector<std::vector<std::filesystem::path>> files(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto [k0, nk] = groups[g];
    for (std::size_t h = 0; h < ranges.size(); ++h) {
      const RowRange& rr = ranges[h];
      ChunkTimer timer(opt.metrics, &party.peer(),
                       layer, "conv", detail::range_text(k0 + 1, k0 + nk), detail::range_text(rr.start, rr.end));
      const auto first = static_cast<std::ptrdiff_t>(rr.start) - 1 - static_cast<std::ptrdiff_t>(params.pad[0]);
      const auto last = static_cast<std::ptrdiff_t>(rr.end) - static_cast<std::ptrdiff_t>(params.pad[0]);
      const Aby2Share x = read_share_rows(input_file, first, last);
      const Aby2Share kernels = read_share_leading(kernel_file, k0, nk);
      ConvParams cp = params;
      cp.n_ker = nk;
      cp.pad[0] = cp.pad[1] = 0;
      std::optional<Aby2Share> b;
      if (bias) b = detail::slice_leading(*bias, k0, nk);
      const Aby2Share y = secure_conv2d(party, kernels, x, b ? &*b : nullptr, cp);
      if (y.dims[1] != range_output_rows(rr, params.k_row, params.stride[0]) || y.dims[2] != o.cols) {
        throw ShapeError("layer " + layer + ": chunk output " + to_string(y.dims) + " does not fit the layer");
      }
      const auto path = detail::chunk_path(opt.scratch, party.index(), layer, g, h);
      write_share_file(path, y, party.config().fraction_bits,
                       {"chunk " + layer + " " + detail::range_text(k0 + 1, k0 + nk) + " " +
                        detail::range_text(rr.start, rr.end)});
      files[g].push_back(path);
      timer.finish();
    }
  }

  // Kernel-major, then row-range order within each output channel.
  ShareWriter out(out_file, ShareFileHeader{party.index(), o.shape(), party.config().fraction_bits, {}});
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<std::unique_ptr<ShareReader>> readers;
    for (const auto& f : files[g]) {
      readers.push_back(std::make_unique<ShareReader>(f));
      const auto& d = readers.back()->header().dims;
      if (d.size() != 3 || d[0] != groups[g].second || d[2] != o.cols) {
        throw ShapeError(f.string() + ": chunk shape " + to_string(d) + " does not fit the layer");
      }
    }
    ring_t a, b;
    for (std::size_t c = 0; c < groups[g].second; ++c) {
      for (auto& r : readers) {
        const std::size_t n = r->header().dims[1] * o.cols;
        for (std::size_t i = 0; i < n; ++i) {
          r->next(a, b);
          out.append(a, b);
        }
      }
    }
    for (auto& r : readers) r->expect_end();
  }
  out.finish();
  if (!opt.keep_chunks) {
    for (const auto& g : files)
      for (const auto& f : g) std::filesystem::remove(f);
  }
}

/// Dense layer y = W x (+ b) in `n_splits` row blocks of W.
inline void run_matmul_chunked(Party& party, const std::string& layer, const std::filesystem::path& weight_file,
                               const std::filesystem::path& bias_file, const Aby2Share& x, std::size_t n_splits,
                               const std::filesystem::path& out_file, const ChunkedOptions& opt) {
  ShareFileHeader wh;
  {
    ShareReader r(weight_file);
    wh = r.header();
  }
  if (wh.dims.size() != 2 || wh.dims[1] != x.size()) {
    throw ShapeError("layer " + layer + ": weights " + to_string(wh.dims) + " do not fit input of " +
                     std::to_string(x.size()));
  }
  const auto blocks = block_ranges(wh.dims[0], n_splits);
  std::optional<Aby2Share> bias;
  if (!bias_file.empty()) bias = read_share_file(bias_file);
  std::filesystem::create_directories(opt.scratch);
  const Aby2Share xv = x.reshaped({x.size()});

  std::vector<std::filesystem::path> files;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto [r0, nr] = blocks[i];
    ChunkTimer timer(opt.metrics, &party.peer(), layer, "dense", "", detail::range_text(r0 + 1, r0 + nr));
    const Aby2Share w = read_share_leading(weight_file, r0, nr);
    Aby2Share y = secure_matmul(party, w, xv);
    if (bias) y = share_add(y, detail::slice_leading(bias->reshaped({bias->size()}), r0, nr));
    const auto path = detail::chunk_path(opt.scratch, party.index(), layer, 0, i);
    write_share_file(path, y, party.config().fraction_bits,
                     {"chunk " + layer + " - " + detail::range_text(r0 + 1, r0 + nr)});
    files.push_back(path);
    timer.finish();
  }

  ShareWriter out(out_file, ShareFileHeader{party.index(), {wh.dims[0]}, party.config().fraction_bits, {}});
  for (const auto& f : files) {
    ShareReader r(f);
    ring_t a, b;
    for (std::size_t i = 0; i < numel(r.header().dims); ++i) {
      r.next(a, b);
      out.append(a, b);
    }
    r.expect_end();
  }
  out.finish();
  if (!opt.keep_chunks) {
    for (const auto& f : files) std::filesystem::remove(f);
  }
}

// ---------------------------------------------------------------------------
// Planning report.

inline std::string format_plan(const ModelSpec& m, const SplitPlan& plan) {
  std::ostringstream os;
  const auto shapes = m.shapes();
  std::size_t ci = 0, di = 0;
  os << "layer  kind   input        output       multiplications  split\n";
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  auto grouped = [](std::uint64_t v) {
    std::string s = std::to_string(v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
    return s;
  };
  for (std::size_t j = 0; j < m.layers.size(); ++j) {
    const auto& l = m.layers[j];
    std::string split;
    std::uint64_t mults;
    if (l.kind == LayerKind::conv) {
      mults = mult_count_conv(shapes[j], l.conv);
      const auto& s = plan.conv.at(ci++);
      split = "vertical=" + std::to_string(s.vertical) + " n_h=" + std::to_string(s.n_h);
    } else {
      mults = mult_count_dense(l.out, l.in);
      split = "blocks=" + std::to_string(plan.dense.at(di++));
    }
    os << pad(l.name, 7) << pad(l.kind == LayerKind::conv ? "conv" : "dense", 7) << pad(to_string(shapes[j]), 13)
       << pad(to_string(shapes[j + 1]), 13) << pad(grouped(mults), 17) << split << '\n';
  }
  ci = 0;
  for (std::size_t j = 0; j < m.layers.size(); ++j) {
    const auto& l = m.layers[j];
    if (l.kind != LayerKind::conv) continue;
    const auto& s = plan.conv.at(ci++);
    const auto ranges =
        horizontal_split_indices(shapes[j][1], l.conv.k_row, l.conv.stride[0], l.conv.pad[0], l.conv.pad[1], s.n_h);
    os << "\nhorizontal split " << l.name << " (n_h=" << s.n_h << ")\n  split  S_r  E_r  output_rows\n";
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      os << "  " << pad(std::to_string(i + 1), 7) << pad(std::to_string(ranges[i].start), 5)
         << pad(std::to_string(ranges[i].end), 5) << range_output_rows(ranges[i], l.conv.k_row, l.conv.stride[0])
         << '\n';
    }
  }
  return os.str();
}

}  // namespace smpcnn
