#pragma once

// Share files.
//
//   ABY2 v1 <party> <ndims> <d1> ... <dn> <f>
//   # optional comment lines, e.g. "# chunk <layer> <kernel-range> <row-range>"
//   <Delta> <delta>            one record per element, row-major
//
// Values are decimal unsigned 64-bit integers, so round trips are bit-exact.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "smpcnn/errors.hpp"
#include "smpcnn/sharing.hpp"

namespace smpcnn {

struct ShareFileHeader {
  int party = 0;
  Shape dims;
  unsigned fraction_bits = 13;
  std::vector<std::string> comments;
};

namespace detail {

inline std::uint64_t parse_u64(std::string_view tok, const std::string& source, std::size_t line) {
  std::uint64_t v = 0;
  const auto* end = tok.data() + tok.size();
  auto [p, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || p != end || tok.empty()) {
    throw ParseError(source, line, "expected an unsigned 64-bit integer, got '" + std::string(tok) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t j = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > j) out.push_back(s.substr(j, i - j));
  }
  return out;
}

inline std::string header_line(const ShareFileHeader& h) {
  std::string s = "ABY2 v1 " + std::to_string(h.party) + " " + std::to_string(h.dims.size());
  for (auto d : h.dims) s += " " + std::to_string(d);
  s += " " + std::to_string(h.fraction_bits);
  return s;
}

inline ShareFileHeader parse_header_line(const std::string& line, const std::string& source) {
  const auto tok = split_ws(line);
  if (tok.size() < 4 || tok[0] != "ABY2" || tok[1] != "v1") {
    throw ParseError(source, 1, "not an ABY2 v1 share file");
  }
  ShareFileHeader h;
  const auto party = parse_u64(tok[2], source, 1);
  if (party > 1) throw ParseError(source, 1, "party must be 0 or 1");
  h.party = static_cast<int>(party);
  const auto nd = parse_u64(tok[3], source, 1);
  if (tok.size() != 5 + nd) throw ParseError(source, 1, "header lists " + std::to_string(nd) + " dims but has " +
                                                            std::to_string(tok.size()) + " fields");
  for (std::size_t i = 0; i < nd; ++i) h.dims.push_back(static_cast<std::size_t>(parse_u64(tok[4 + i], source, 1)));
  h.fraction_bits = static_cast<unsigned>(parse_u64(tok[4 + nd], source, 1));
  return h;
}

}  // namespace detail

/// Streams records out to a share file; the element count is checked on
/// finish().
class ShareWriter {
 public:
  ShareWriter(const std::filesystem::path& path, const ShareFileHeader& h) : path_(path), expected_(numel(h.dims)) {
    out_.open(path, std::ios::out | std::ios::trunc);
    if (!out_) throw IoError("cannot write " + path.string());
    out_ << detail::header_line(h) << '\n';
    for (const auto& c : h.comments) out_ << "# " << c << '\n';
  }

  void append(ring_t pub, ring_t priv) {
    char buf[48];
    auto p = std::to_chars(buf, buf + 20, pub).ptr;
    *p++ = ' ';
    p = std::to_chars(p, p + 20, priv).ptr;
    *p++ = '\n';
    out_.write(buf, p - buf);
    ++written_;
  }

  void append(const Aby2Share& s) {
    for (std::size_t i = 0; i < s.size(); ++i) append(s.pub[i], s.priv[i]);
  }

  void finish() {
    if (written_ != expected_) {
      throw IoError(path_.string() + ": wrote " + std::to_string(written_) + " records, header declares " +
                    std::to_string(expected_));
    }
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
    out_.close();
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t expected_;
  std::size_t written_ = 0;
};

/// Sequential record reader.
class ShareReader {
 public:
  explicit ShareReader(std::istream& in, std::string source = "<stream>") : in_(&in), source_(std::move(source)) {
    read_header();
  }
  explicit ShareReader(const std::filesystem::path& path) : owned_(path), in_(&owned_), source_(path.string()) {
    if (!owned_) throw IoError("cannot open " + path.string());
    read_header();
  }

  const ShareFileHeader& header() const noexcept { return header_; }
  std::size_t records_read() const noexcept { return read_; }

  /// Next record; throws ParseError at a malformed or missing record.
  void next(ring_t& pub, ring_t& priv) {
    std::string line;
    for (;;) {
      if (!std::getline(*in_, line)) {
        throw ParseError(source_, line_ + 1, "file ends after " + std::to_string(read_) + " of " +
                                                 std::to_string(numel(header_.dims)) + " records");
      }
      ++line_;
      if (!line.empty() && line[0] == '#') continue;
      break;
    }
    const auto tok = detail::split_ws(line);
    if (tok.size() != 2) throw ParseError(source_, line_, "expected two values per record");
    pub = detail::parse_u64(tok[0], source_, line_);
    priv = detail::parse_u64(tok[1], source_, line_);
    ++read_;
  }

  void skip(std::size_t n) {
    ring_t a, b;
    for (std::size_t i = 0; i < n; ++i) next(a, b);
  }

  /// Confirms nothing but blank or comment lines follow.
  void expect_end() {
    std::string line;
    while (std::getline(*in_, line)) {
      ++line_;
      if (line.empty() || line[0] == '#') continue;
      throw ParseError(source_, line_, "more records than the header declares");
    }
  }

 private:
  void read_header() {
    std::string line;
    if (!std::getline(*in_, line)) throw ParseError(source_, 1, "empty share file");
    line_ = 1;
    header_ = detail::parse_header_line(line, source_);
    while (in_->peek() == '#') {
      std::getline(*in_, line);
      ++line_;
      std::size_t start = 1;
      while (start < line.size() && line[start] == ' ') ++start;
      header_.comments.push_back(line.substr(start));
    }
  }

  std::ifstream owned_;
  std::istream* in_;
  std::string source_;
  ShareFileHeader header_;
  std::size_t line_ = 0;
  std::size_t read_ = 0;
};

inline void write_share_file(const std::filesystem::path& path, const Aby2Share& s, unsigned fraction_bits,
                             std::vector<std::string> comments = {}) {
  ShareWriter w(path, ShareFileHeader{s.party, s.dims, fraction_bits, std::move(comments)});
  w.append(s);
  w.finish();
}

inline Aby2Share read_shares(ShareReader& r) {
  const auto& h = r.header();
  const std::size_t n = numel(h.dims);
  std::vector<ring_t> pub(n), priv(n);
  for (std::size_t i = 0; i < n; ++i) r.next(pub[i], priv[i]);
  r.expect_end();
  return Aby2Share(h.dims, std::move(pub), std::move(priv), h.party);
}

inline Aby2Share read_share_file(const std::filesystem::path& path, ShareFileHeader* header = nullptr) {
  ShareReader r(path);
  if (header) *header = r.header();
  return read_shares(r);
}

inline std::string share_text(const Aby2Share& s, unsigned fraction_bits) {
  std::ostringstream os;
  os << detail::header_line(ShareFileHeader{s.party, s.dims, fraction_bits, {}}) << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) os << s.pub[i] << ' ' << s.priv[i] << '\n';
  return os.str();
}

inline Aby2Share parse_share_text(const std::string& text, const std::string& source, ShareFileHeader* header = nullptr) {
  std::istringstream in(text);
  ShareReader r(in, source);
  if (header) *header = r.header();
  return read_shares(r);
}

/// Reads `count` consecutive blocks along the leading dimension starting at
/// `first` (e.g. a range of kernels from a kernel file), streaming past the
/// rest.
inline Aby2Share read_share_leading(const std::filesystem::path& path, std::size_t first, std::size_t count) {
  ShareReader r(path);
  const auto& h = r.header();
  if (h.dims.empty() || first + count > h.dims[0]) {
    throw ShapeError(path.string() + ": leading range [" + std::to_string(first) + ", " + std::to_string(first + count) +
                     ") outside shape " + to_string(h.dims));
  }
  const std::size_t block = numel(h.dims) / h.dims[0];
  r.skip(first * block);
  Shape dims = h.dims;
  dims[0] = count;
  std::vector<ring_t> pub(count * block), priv(count * block);
  for (std::size_t i = 0; i < pub.size(); ++i) r.next(pub[i], priv[i]);
  return Aby2Share(std::move(dims), std::move(pub), std::move(priv), h.party);
}

/// Reads rows [row_begin, row_end) of every channel of a C x R x W share file.
/// Rows outside [0, R) (padding) come back as public zeros.
inline Aby2Share read_share_rows(const std::filesystem::path& path, std::ptrdiff_t row_begin, std::ptrdiff_t row_end) {
  ShareReader r(path);
  const auto& h = r.header();
  if (h.dims.size() != 3) throw ShapeError(path.string() + ": row reads need a 3-d share file");
  const std::size_t ch = h.dims[0], rows = h.dims[1], cols = h.dims[2];
  const std::size_t out_rows = static_cast<std::size_t>(row_end - row_begin);
  std::vector<ring_t> pub(ch * out_rows * cols, 0), priv(ch * out_rows * cols, 0);
  ring_t a, b;
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t row = 0; row < rows; ++row) {
      const auto srow = static_cast<std::ptrdiff_t>(row);
      const bool keep = srow >= row_begin && srow < row_end;
      for (std::size_t col = 0; col < cols; ++col) {
        r.next(a, b);
        if (keep) {
          const std::size_t idx = (c * out_rows + static_cast<std::size_t>(srow - row_begin)) * cols + col;
          pub[idx] = a;
          priv[idx] = b;
        }
      }
    }
  }
  return Aby2Share({ch, out_rows, cols}, std::move(pub), std::move(priv), h.party);
}

}  // namespace smpcnn
