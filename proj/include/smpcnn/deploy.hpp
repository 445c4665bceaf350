#pragma once

// Multi-process roles over TCP.
//
//   model provider  -> server0, server1   SHARE_PUSH (model.txt, weights, biases)
//   image provider  -> server0, server1   SHARE_PUSH (image), then waits for RESULT_PUSH
//   server0         -> server1            party link (RESHARE / BOOL_ROUND)
//   server0/1       -> helper             CROSS_REQ / CROSS_RESP, opened on first use
//
// SHARE_PUSH payload: "<name>\n" followed by a share file (or model.txt
// text). An empty payload ends a provider's upload. RESULT_PUSH payload: the
// label share as a share file.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smpcnn/helper.hpp"
#include "smpcnn/model.hpp"
#include "smpcnn/net.hpp"
#include "smpcnn/pipeline.hpp"
#include "smpcnn/share_io.hpp"
#include "smpcnn/tcp.hpp"

namespace smpcnn {

struct DeployConfig {
  std::uint64_t session_id = 1;
  FixedPointConfig fixed;
  std::optional<Endpoint> server[2];
  std::optional<Endpoint> helper;
  Backend backend = Backend::dealer;
  std::vector<std::size_t> cnn_split, nn_split;
  std::size_t hsplit = 1;
  std::optional<std::uint64_t> seed;
  std::filesystem::path work = "smpcnn-work";
  std::filesystem::path model_dir;
  std::filesystem::path image;
  std::optional<std::filesystem::path> metrics;
  std::chrono::milliseconds connect_timeout{std::chrono::seconds(30)};

  Hello hello(Role r) const { return Hello{kProtocolVersion, r, session_id, fixed}; }

  /// Seeds: fixed in test mode, fresh otherwise.
  std::uint64_t seed_for(std::uint64_t salt) const {
    return seed ? (*seed * 0x9e3779b97f4a7c15ULL) ^ salt : fresh_seed();
  }

  SplitPlan plan_for(const ModelSpec& m) const {
    SplitPlan p = SplitPlan::unsplit(m);
    if (!cnn_split.empty()) {
      if (cnn_split.size() != p.conv.size()) {
        throw ConfigError("--cnn-split lists " + std::to_string(cnn_split.size()) + " values for " +
                          std::to_string(p.conv.size()) + " conv layers");
      }
      for (std::size_t i = 0; i < cnn_split.size(); ++i) p.conv[i].vertical = cnn_split[i];
    }
    for (auto& c : p.conv) c.n_h = hsplit;
    if (!nn_split.empty()) {
      if (nn_split.size() != p.dense.size()) {
        throw ConfigError("--nn-split lists " + std::to_string(nn_split.size()) + " values for " +
                          std::to_string(p.dense.size()) + " dense layers");
      }
      p.dense = nn_split;
    }
    p.validate(m);
    return p;
  }
};

inline std::vector<std::size_t> parse_count_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t pos = 0;
      const auto v = std::stoull(part, &pos);
      if (pos != part.size() || v == 0) throw std::invalid_argument(part);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": expected comma-separated positive integers, got '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + " is empty");
  return out;
}

/// Reads the key=value config file into a DeployConfig.
inline DeployConfig load_deploy_config(const KeyValueConfig& kv) {
  DeployConfig c;
  c.session_id = kv.number_or("session", 1);
  c.fixed.fraction_bits = static_cast<unsigned>(kv.number_or("fraction_bits", c.fixed.fraction_bits));
  c.fixed.indicator_gain = kv.number_or("indicator_gain", c.fixed.indicator_gain);
  c.fixed.validate();
  if (auto v = kv.get("server0")) c.server[0] = parse_endpoint(*v);
  if (auto v = kv.get("server1")) c.server[1] = parse_endpoint(*v);
  if (auto v = kv.get("helper")) c.helper = parse_endpoint(*v);
  if (auto v = kv.get("backend")) c.backend = parse_backend(*v);
  if (auto v = kv.get("cnn_split")) c.cnn_split = parse_count_list(*v, "cnn_split");
  if (auto v = kv.get("nn_split")) c.nn_split = parse_count_list(*v, "nn_split");
  c.hsplit = static_cast<std::size_t>(kv.number_or("hsplit", 1));
  if (auto v = kv.get("seed")) c.seed = detail::parse_u64(*v, "config", 0);
  if (kv.get("work")) c.work = kv.path("work");
  if (kv.get("model")) c.model_dir = kv.path("model");
  if (kv.get("image")) c.image = kv.path("image");
  if (kv.get("metrics")) c.metrics = kv.path("metrics");
  return c;
}

namespace detail {

inline std::unique_ptr<Peer> dial(const Endpoint& ep, const DeployConfig& c, Role me, const std::string& name) {
  auto peer = std::make_unique<Peer>(connect_tcp(ep, c.connect_timeout), name);
  establish(*peer, c.hello(me));
  return peer;
}

inline std::vector<std::uint8_t> push_payload(const std::string& name, const std::string& body) {
  std::vector<std::uint8_t> out(name.begin(), name.end());
  out.push_back('\n');
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline void push_shares(Peer& peer, const std::vector<std::pair<std::string, std::string>>& items) {
  std::uint64_t op = 1;
  for (const auto& [name, body] : items) peer.send(MsgType::share_push, op++, push_payload(name, body));
  peer.send(MsgType::share_push, op, {});
}

}  // namespace detail

/// Model provider: shares the model and uploads one half to each server.
inline void run_model_provider(const DeployConfig& c) {
  if (c.model_dir.empty()) throw ConfigError("model provider needs a model directory");
  const auto model = read_model(c.model_dir);
  auto [s0, s1] = share_model(model, c.fixed, c.seed_for(0x11));
  const std::string spec_text = format_model_spec(model.spec);
  const NamedShares* halves[2] = {&s0, &s1};
  for (int i = 0; i < 2; ++i) {
    if (!c.server[i]) throw ConfigError("model provider needs the address of server" + std::to_string(i));
    auto peer = detail::dial(*c.server[i], c, Role::model_provider, "model-provider->server" + std::to_string(i));
    std::vector<std::pair<std::string, std::string>> items{{"model.txt", spec_text}};
    for (const auto& [name, s] : *halves[i]) items.emplace_back(name, share_text(s, c.fixed.fraction_bits));
    detail::push_shares(*peer, items);
    peer->close();
  }
}

/// Image provider: uploads image shares, waits for both label shares and
/// returns the reconstructed label.
inline std::size_t run_image_provider(const DeployConfig& c) {
  if (c.image.empty()) throw ConfigError("image provider needs an image file");
  auto image = read_tensor(c.image);
  auto x = encode_tensor(image, c.fixed);
  auto [s0, s1] = make_shares(x, c.seed_for(0x22), 2);
  const Aby2Share* halves[2] = {&s0, &s1};
  std::unique_ptr<Peer> peers[2];
  for (int i = 0; i < 2; ++i) {
    if (!c.server[i]) throw ConfigError("image provider needs the address of server" + std::to_string(i));
    peers[i] = detail::dial(*c.server[i], c, Role::image_provider, "image-provider->server" + std::to_string(i));
    detail::push_shares(*peers[i], {{"image", share_text(*halves[i], c.fixed.fraction_bits)}});
  }
  Aby2Share label[2];
  for (int i = 0; i < 2; ++i) {
    const Frame f = peers[i]->recv(MsgType::result_push, 0);
    label[i] = parse_share_text(std::string(f.payload.begin(), f.payload.end()), "RESULT_PUSH from server" +
                                                                                    std::to_string(i));
    if (label[i].party != i) throw ProtocolError("server" + std::to_string(i) + " sent a share of the wrong party");
  }
  for (auto& p : peers) p->close();
  return reconstruct_label(label[0], label[1]);
}

/// Helper node: serves correlated randomness to both servers until they hang
/// up. With the dealer backend the servers ask for full-product parts; the
/// helper process honours either request flavour.
inline void run_helper(const DeployConfig& c, std::ostream* log = nullptr) {
  if (!c.helper) throw ConfigError("helper needs its listen address");
  TcpListener listener(*c.helper);
  if (log) *log << "helper listening on " << c.helper->host << ":" << listener.port() << std::endl;
  std::unique_ptr<Peer> servers[2];
  while (!servers[0] || !servers[1]) {
    auto peer = std::make_unique<Peer>(listener.accept(), "helper");
    const Hello h = establish(*peer, c.hello(Role::helper));
    if (!is_compute_server(h.role)) {
      peer->abort("the helper only serves compute servers");
      throw ProtocolError(std::string("helper: rejected connection from ") + to_string(h.role));
    }
    const int i = h.role == Role::server0 ? 0 : 1;
    if (servers[i]) throw ProtocolError("helper: second connection from server" + std::to_string(i));
    servers[i] = std::move(peer);
  }
  serve_correlation(*servers[0], *servers[1], c.seed_for(0x33));
}

/// Compute server `index`: collects shares from both providers, runs the
/// inference with the other server and returns its label share to the image
/// provider.
inline void run_server(int index, const DeployConfig& c, std::ostream* log = nullptr) {
  if (!c.server[index]) throw ConfigError("server" + std::to_string(index) + " needs its listen address");
  if (index == 0 && !c.server[1]) throw ConfigError("server0 needs the address of server1");
  const Role me = index == 0 ? Role::server0 : Role::server1;
  const auto base = c.work / ("server" + std::to_string(index));
  const auto shares_dir = base / "shares";
  std::filesystem::create_directories(shares_dir);

  TcpListener listener(*c.server[index]);
  if (log) *log << "server" << index << " listening on port " << listener.port() << std::endl;

  std::unique_ptr<Peer> link, image_provider;
  if (index == 0) link = detail::dial(*c.server[1], c, me, "server0->server1");

  std::optional<ModelSpec> spec;
  bool have_model = false, have_image = false;
  while (!have_model || !have_image || !link) {
    auto peer = std::make_unique<Peer>(listener.accept(), "server" + std::to_string(index));
    const Hello h = establish(*peer, c.hello(me));
    if (h.role == Role::server0 && index == 1 && !link) {
      link = std::move(peer);
      continue;
    }
    if (h.role != Role::model_provider && h.role != Role::image_provider) {
      peer->abort(std::string("unexpected connection from ") + to_string(h.role));
      throw ProtocolError(std::string("server: unexpected connection from ") + to_string(h.role));
    }
    while (auto f = peer->recv_next()) {
      if (f->type == MsgType::abort) {
        throw ProtocolError(std::string(to_string(h.role)) + " aborted: " +
                             std::string(f->payload.begin(), f->payload.end()));
      }
      if (f->type != MsgType::share_push) {
        peer->abort(std::string("server expected SHARE_PUSH, got ") + to_string(f->type));
        throw ProtocolError(std::string("server expected SHARE_PUSH, got ") + to_string(f->type));
      }
      if (f->payload.empty()) break;
      const std::string text(f->payload.begin(), f->payload.end());
      const auto nl = text.find('\n');
      if (nl == std::string::npos) throw ProtocolError("SHARE_PUSH without a name line");
      const std::string name = text.substr(0, nl), body = text.substr(nl + 1);
      if (name == "model.txt") {
        std::istringstream in(body);
        spec = parse_model_spec(in, "model.txt from model provider");
        continue;
      }
      if (name.find('/') != std::string::npos || name.find("..") != std::string::npos) {
        throw ProtocolError("SHARE_PUSH with an invalid name '" + name + "'");
      }
      const bool image = name == "image";
      if (image != (h.role == Role::image_provider)) {
        throw ProtocolError(std::string(to_string(h.role)) + " may not push '" + name + "'");
      }
      auto s = parse_share_text(body, "SHARE_PUSH " + name);
      if (s.party != index) throw ProtocolError("received shares of party " + std::to_string(s.party));
      write_share_file(share_file(shares_dir, name, index), s, c.fixed.fraction_bits);
    }
    if (h.role == Role::model_provider) {
      have_model = true;
    } else {
      have_image = true;
      image_provider = std::move(peer);
    }
  }
  if (!spec) throw ProtocolError("model provider did not send model.txt");
  {
    // The image provider does not know the model; adopt the model's input shape.
    const auto path = share_file(shares_dir, "image", index);
    auto img = read_share_file(path);
    if (img.dims != spec->input) write_share_file(path, img.reshaped(spec->input), c.fixed.fraction_bits);
  }

  const Endpoint* helper_ep = c.helper ? &*c.helper : nullptr;
  RemoteCorrelated correlated(
      [&]() -> std::unique_ptr<Peer> {
        if (!helper_ep) throw TransportError("no helper address configured");
        return detail::dial(*helper_ep, c, me, "server" + std::to_string(index) + "->helper");
      },
      c.backend == Backend::dealer);
  Party party(index, c.fixed, *link, correlated, c.seed_for(0x44 + static_cast<std::uint64_t>(index)));

  RunMetrics metrics;
  Aby2Share label;
  try {
    label = run_inference(party, *spec, c.plan_for(*spec), shares_dir, base / "work", &metrics);
  } catch (const std::exception& e) {
    link->abort(e.what());
    image_provider->abort(e.what());
    throw;
  }
  image_provider->send(MsgType::result_push, 0, [&] {
    const auto t = share_text(label, c.fixed.fraction_bits);
    return std::vector<std::uint8_t>(t.begin(), t.end());
  }());
  if (c.metrics) {
    std::ofstream out(*c.metrics);
    if (!out) throw IoError("cannot write " + c.metrics->string());
    metrics.write_csv(out);
  }
  if (log) *log << "server" << index << " done in " << metrics.total_ms << " ms, peak RSS " << metrics.peak_rss_kb
                << " KiB" << std::endl;
  link->close();
  image_provider->close();
}

}  // namespace smpcnn
