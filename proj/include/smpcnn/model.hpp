#pragma once

// Model descriptions and key=value configuration files.
//
// A model directory holds `model.txt` plus one weight and one bias tensor per
// layer (`<name>.w.tns`, `<name>.b.tns`). model.txt:
//
//   input 1 28 28
//   conv  name=cnn1 kernels=5 size=5x5 stride=2,2 pad=1,0,1,0 activation=relu
//   dense name=nn1 out=100 activation=relu
//
// Conv weights are n_ker x i_ch x k_row x k_col; dense weights are out x in,
// applied to the previous activation flattened channel, then row, then column.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "smpcnn/bilinear.hpp"
#include "smpcnn/errors.hpp"
#include "smpcnn/share_io.hpp"
#include "smpcnn/tensor_io.hpp"

namespace smpcnn {

enum class LayerKind { conv, dense };

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::string name;
  ConvParams conv;        // conv only; i_ch is filled from the input shape
  std::size_t out = 0;    // dense only
  std::size_t in = 0;     // dense only, filled from the input shape
  bool relu = true;

  Shape weight_dims() const { return kind == LayerKind::conv ? conv.kernel_dims() : Shape{out, in}; }
  Shape bias_dims() const { return {kind == LayerKind::conv ? conv.n_ker : out}; }
};

struct ModelSpec {
  Shape input;
  std::vector<LayerSpec> layers;

  /// Input shape of each layer followed by the final output shape.
  std::vector<Shape> shapes() const {
    std::vector<Shape> s{input};
    for (const auto& l : layers) {
      const Shape& cur = s.back();
      if (l.kind == LayerKind::conv) {
        if (cur.size() != 3) throw ShapeError("layer " + l.name + ": conv needs a channel x row x col input");
        s.push_back(conv_output_dims(cur, l.conv).shape());
      } else {
        if (numel(cur) != l.in) {
          throw ShapeError("layer " + l.name + ": dense input " + std::to_string(l.in) + " does not match " +
                           to_string(cur));
        }
        s.push_back({l.out});
      }
    }
    return s;
  }

  /// Fills derived fields (conv i_ch, dense in) and checks the chain.
  void resolve() {
    if (input.empty() || numel(input) == 0) throw ConfigError("model input shape missing");
    if (layers.empty()) throw ConfigError("model has no layers");
    Shape cur = input;
    for (auto& l : layers) {
      if (l.kind == LayerKind::conv) {
        if (cur.size() != 3) throw ShapeError("layer " + l.name + ": conv needs a channel x row x col input");
        l.conv.i_ch = cur[0];
        cur = conv_output_dims(cur, l.conv).shape();
      } else {
        if (l.out == 0) throw ConfigError("layer " + l.name + ": dense layer needs out > 0");
        l.in = numel(cur);
        cur = {l.out};
      }
    }
  }
};

namespace detail {

inline std::vector<std::size_t> parse_list(const std::string& v, char sep, const std::string& src, std::size_t line) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(static_cast<std::size_t>(parse_u64(part, src, line)));
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline ModelSpec parse_model_spec(std::istream& in, const std::string& source) {
  ModelSpec m;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "input") {
      std::string d;
      while (ls >> d) m.input.push_back(static_cast<std::size_t>(detail::parse_u64(d, source, lineno)));
      continue;
    }
    if (head != "conv" && head != "dense") throw ParseError(source, lineno, "unknown directive '" + head + "'");
    LayerSpec l;
    l.kind = head == "conv" ? LayerKind::conv : LayerKind::dense;
    l.conv.stride[0] = l.conv.stride[1] = 1;
    std::string kv;
    while (ls >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError(source, lineno, "expected key=value, got '" + kv + "'");
      const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
      if (k == "name") {
        l.name = v;
      } else if (k == "activation") {
        if (v != "relu" && v != "none") throw ParseError(source, lineno, "activation must be relu or none");
        l.relu = v == "relu";
      } else if (l.kind == LayerKind::dense && k == "out") {
        l.out = static_cast<std::size_t>(detail::parse_u64(v, source, lineno));
      } else if (l.kind == LayerKind::conv && k == "kernels") {
        l.conv.n_ker = static_cast<std::size_t>(detail::parse_u64(v, source, lineno));
      } else if (l.kind == LayerKind::conv && k == "size") {
        const auto s = detail::parse_list(v, 'x', source, lineno);
        if (s.size() != 2) throw ParseError(source, lineno, "size must be <rows>x<cols>");
        l.conv.k_row = s[0];
        l.conv.k_col = s[1];
      } else if (l.kind == LayerKind::conv && k == "stride") {
        const auto s = detail::parse_list(v, ',', source, lineno);
        if (s.size() != 2) throw ParseError(source, lineno, "stride must be <row>,<col>");
        l.conv.stride[0] = s[0];
        l.conv.stride[1] = s[1];
      } else if (l.kind == LayerKind::conv && k == "pad") {
        const auto s = detail::parse_list(v, ',', source, lineno);
        if (s.size() != 4) throw ParseError(source, lineno, "pad must be <top>,<bottom>,<left>,<right>");
        for (int i = 0; i < 4; ++i) l.conv.pad[i] = s[static_cast<std::size_t>(i)];
      } else {
        throw ParseError(source, lineno, "unknown key '" + k + "' for a " + head + " layer");
      }
    }
    if (l.name.empty()) l.name = head + std::to_string(m.layers.size() + 1);
    m.layers.push_back(l);
  }
  m.resolve();
  return m;
}

inline ModelSpec read_model_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_model_spec(in, path.string());
}

inline std::string format_model_spec(const ModelSpec& m) {
  std::ostringstream os;
  os << "input";
  for (auto d : m.input) os << ' ' << d;
  os << '\n';
  for (const auto& l : m.layers) {
    if (l.kind == LayerKind::conv) {
      const auto& c = l.conv;
      os << "conv name=" << l.name << " kernels=" << c.n_ker << " size=" << c.k_row << 'x' << c.k_col
         << " stride=" << c.stride[0] << ',' << c.stride[1] << " pad=" << c.pad[0] << ',' << c.pad[1] << ','
         << c.pad[2] << ',' << c.pad[3];
    } else {
      os << "dense name=" << l.name << " out=" << l.out;
    }
    os << " activation=" << (l.relu ? "relu" : "none") << '\n';
  }
  return os.str();
}

/// Clear model: spec plus per-layer weight and bias tensors.
struct ClearModel {
  ModelSpec spec;
  std::vector<RealTensor> weights;
  std::vector<RealTensor> biases;

  void validate() const {
    if (weights.size() != spec.layers.size() || biases.size() != spec.layers.size()) {
      throw ShapeError("model needs one weight and one bias tensor per layer");
    }
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
      const auto& l = spec.layers[i];
      if (weights[i].dims != l.weight_dims()) {
        throw ShapeError("layer " + l.name + ": weights " + to_string(weights[i].dims) + ", expected " +
                         to_string(l.weight_dims()));
      }
      if (numel(biases[i].dims) != numel(l.bias_dims())) {
        throw ShapeError("layer " + l.name + ": bias " + to_string(biases[i].dims) + ", expected " +
                         to_string(l.bias_dims()));
      }
    }
  }
};

inline std::filesystem::path weight_path(const std::filesystem::path& dir, const LayerSpec& l) {
  return dir / (l.name + ".w.tns");
}
inline std::filesystem::path bias_path(const std::filesystem::path& dir, const LayerSpec& l) {
  return dir / (l.name + ".b.tns");
}

inline ClearModel read_model(const std::filesystem::path& dir) {
  ClearModel m;
  m.spec = read_model_spec(dir / "model.txt");
  for (const auto& l : m.spec.layers) {
    m.weights.push_back(read_tensor(weight_path(dir, l)));
    m.biases.push_back(read_tensor(bias_path(dir, l)));
  }
  m.validate();
  return m;
}

inline void write_model(const std::filesystem::path& dir, const ClearModel& m) {
  m.validate();
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "model.txt");
    if (!out) throw IoError("cannot write " + (dir / "model.txt").string());
    out << format_model_spec(m.spec);
  }
  for (std::size_t i = 0; i < m.spec.layers.size(); ++i) {
    write_tensor(weight_path(dir, m.spec.layers[i]), m.weights[i]);
    write_tensor(bias_path(dir, m.spec.layers[i]), m.biases[i]);
  }
}

inline RealTensor read_image(const std::filesystem::path& path, const ModelSpec& spec) {
  auto t = read_tensor(path);
  if (numel(t.dims) != numel(spec.input)) {
    throw ShapeError(path.string() + ": image shape " + to_string(t.dims) + " does not match model input " +
                     to_string(spec.input));
  }
  t.dims = spec.input;
  return t;
}

// ---------------------------------------------------------------------------
// key = value configuration.

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& source) {
    KeyValueConfig c;
    c.source_ = source;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      const auto hash = raw.find('#');
      const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
      const std::string k = detail::trim(line.substr(0, eq));
      if (k.empty()) throw ParseError(source, lineno, "empty key");
      if (c.values_.count(k)) throw ParseError(source, lineno, "duplicate key '" + k + "'");
      c.values_[k] = detail::trim(line.substr(eq + 1));
    }
    return c;
  }

  static KeyValueConfig read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    auto c = parse(in, path.string());
    c.base_ = path.parent_path();
    return c;
  }

  std::optional<std::string> get(const std::string& k) const {
    auto it = values_.find(k);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_or(const std::string& k, const std::string& fallback) const { return get(k).value_or(fallback); }

  std::string require(const std::string& k) const {
    auto v = get(k);
    if (!v) throw ConfigError(source_ + ": missing key '" + k + "'");
    return *v;
  }

  /// Relative paths resolve against the config file's directory.
  std::filesystem::path path(const std::string& k) const {
    std::filesystem::path p = require(k);
    return p.is_relative() ? base_ / p : p;
  }

  std::uint64_t number_or(const std::string& k, std::uint64_t fallback) const {
    auto v = get(k);
    if (!v) return fallback;
    return detail::parse_u64(*v, source_, 0);
  }

  void set(const std::string& k, const std::string& v) { values_[k] = v; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::string source_;
  std::filesystem::path base_;
  std::map<std::string, std::string> values_;
};

}  // namespace smpcnn
