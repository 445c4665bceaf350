#pragma once

// Clear tensor text files:
//
//   TNS v1 <ndims> <d1> ... <dn>
//   one decimal real per line, row-major

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "smpcnn/errors.hpp"
#include "smpcnn/ring.hpp"
#include "smpcnn/share_io.hpp"
#include "smpcnn/tensor.hpp"

namespace smpcnn {

using RealTensor = Tensor<double>;

inline RealTensor read_tensor(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty tensor file");
  const auto tok = detail::split_ws(line);
  if (tok.size() < 3 || tok[0] != "TNS" || tok[1] != "v1") throw ParseError(source, 1, "not a TNS v1 tensor file");
  const auto nd = detail::parse_u64(tok[2], source, 1);
  if (tok.size() != 3 + nd) {
    throw ParseError(source, 1, "header lists " + std::to_string(nd) + " dims but has " + std::to_string(tok.size() - 3));
  }
  Shape dims;
  for (std::size_t i = 0; i < nd; ++i) dims.push_back(static_cast<std::size_t>(detail::parse_u64(tok[3 + i], source, 1)));
  RealTensor t(dims);
  std::size_t lineno = 1, got = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto vals = detail::split_ws(line);
    if (vals.empty() || vals[0].front() == '#') continue;
    if (vals.size() != 1) throw ParseError(source, lineno, "expected one value per line");
    if (got == t.size()) {
      throw ParseError(source, lineno, "more values than the header's " + std::to_string(t.size()));
    }
    double v = 0;
    const auto* end = vals[0].data() + vals[0].size();
    auto [p, ec] = std::from_chars(vals[0].data(), end, v);
    if (ec != std::errc() || p != end) throw ParseError(source, lineno, "bad number '" + std::string(vals[0]) + "'");
    t[got++] = v;
  }
  if (got != t.size()) {
    throw ParseError(source, lineno, "header declares " + std::to_string(t.size()) + " values, found " +
                                         std::to_string(got));
  }
  return t;
}

inline RealTensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_tensor(in, path.string());
}

inline RealTensor parse_tensor(const std::string& text, const std::string& source = "<text>") {
  std::istringstream in(text);
  return read_tensor(in, source);
}

inline void write_tensor(std::ostream& out, const RealTensor& t) {
  out << "TNS v1 " << t.dims.size();
  for (auto d : t.dims) out << ' ' << d;
  out << '\n';
  char buf[64];
  for (double v : t.data) {
    const int n = std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out.write(buf, n);
  }
}

inline void write_tensor(const std::filesystem::path& path, const RealTensor& t) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_tensor(out, t);
  if (!out) throw IoError("write failed for " + path.string());
}

inline RingTensor encode_tensor(const RealTensor& t, const FixedPointConfig& cfg) {
  RingTensor out(t.dims);
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = encode(t[i], cfg);
  return out;
}

inline RealTensor decode_tensor(const RingTensor& t, const FixedPointConfig& cfg) {
  RealTensor out(t.dims);
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = decode(t[i], cfg);
  return out;
}

}  // namespace smpcnn
