#pragma once

// Helper node: serves correlated randomness to the two compute servers over
// CROSS_REQ / CROSS_RESP frames. The helper only ever receives mask parts
// (delta words) and triple counts; it never sees a public Delta value.
//
// CROSS_REQ payload (little-endian):
//   u8 gate kind, u8 include_local,
//   u8 rank_a, u64 dims_a[rank_a], u8 rank_b, u64 dims_b[rank_b],
//   10 x u64 conv geometry (kind == conv only),
//   u64 count,
//   u64 n_a, n_a words of [delta_a]_i, u64 n_b, n_b words of [delta_b]_i
// CROSS_RESP payload: packed response words.

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "smpcnn/correlated.hpp"
#include "smpcnn/net.hpp"

namespace smpcnn {

inline std::vector<std::uint8_t> encode_correlation_request(const CorrelationRequest& r) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(r.spec.kind));
  w.u8(r.include_local ? 1 : 0);
  for (const Shape* d : {&r.spec.a_dims, &r.spec.b_dims}) {
    w.u8(static_cast<std::uint8_t>(d->size()));
    for (auto v : *d) w.u64(v);
  }
  if (r.spec.kind == GateKind::conv) {
    const auto& c = r.spec.conv;
    for (auto v : {c.n_ker, c.k_row, c.k_col, c.i_ch, c.stride[0], c.stride[1], c.pad[0], c.pad[1], c.pad[2], c.pad[3]})
      w.u64(v);
  }
  w.u64(r.count);
  w.u64(r.delta_a.size());
  w.words(r.delta_a);
  w.u64(r.delta_b.size());
  w.words(r.delta_b);
  return w.take();
}

inline CorrelationRequest decode_correlation_request(std::uint64_t op_id, std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  CorrelationRequest r;
  r.op_id = op_id;
  const auto kind = in.u8();
  if (kind < 1 || kind > 5) throw ProtocolError("CROSS_REQ with unknown gate kind " + std::to_string(kind));
  r.spec.kind = static_cast<GateKind>(kind);
  r.include_local = in.u8() != 0;
  for (Shape* d : {&r.spec.a_dims, &r.spec.b_dims}) {
    const auto rank = in.u8();
    for (int i = 0; i < rank; ++i) d->push_back(static_cast<std::size_t>(in.u64()));
  }
  if (r.spec.kind == GateKind::conv) {
    auto& c = r.spec.conv;
    for (std::size_t* v : {&c.n_ker, &c.k_row, &c.k_col, &c.i_ch, &c.stride[0], &c.stride[1], &c.pad[0], &c.pad[1],
                           &c.pad[2], &c.pad[3]})
      *v = static_cast<std::size_t>(in.u64());
  }
  r.count = in.u64();
  r.delta_a = in.words(static_cast<std::size_t>(in.u64()));
  r.delta_b = in.words(static_cast<std::size_t>(in.u64()));
  if (in.remaining() != 0) throw ProtocolError("CROSS_REQ has trailing bytes");
  return r;
}

/// Compute-server side of the helper protocol. The connection is opened on
/// first use, so an unreachable helper surfaces at the first CROSS_REQ.
class RemoteCorrelated final : public CorrelatedSource {
 public:
  using Connector = std::function<std::unique_ptr<Peer>()>;

  /// With `dealer_mode` the remote node returns parts of the full product
  /// (trusted-dealer semantics); otherwise it returns cross terms only and the
  /// local product is added here.
  RemoteCorrelated(Connector connect, bool dealer_mode = false)
      : connect_(std::move(connect)), dealer_mode_(dealer_mode) {}

  /// Uses an already established peer.
  explicit RemoteCorrelated(Peer& peer, bool dealer_mode = false) : peer_(&peer), dealer_mode_(dealer_mode) {}

  std::vector<ring_t> cross_terms(std::uint64_t op_id, const BilinearSpec& spec, std::span<const ring_t> da,
                                  std::span<const ring_t> db) override {
    CorrelationRequest req{op_id, spec, dealer_mode_, 0, {da.begin(), da.end()}, {db.begin(), db.end()}};
    auto part = roundtrip(req);
    if (part.size() != numel(spec.output_dims())) throw ProtocolError("CROSS_RESP has the wrong length");
    if (!dealer_mode_) {
      const auto local = apply_bilinear(spec, da, db);
      for (std::size_t i = 0; i < part.size(); ++i) part[i] += local[i];
    }
    return part;
  }

  BoolTripleBatch bool_triples(std::uint64_t op_id, std::size_t words) override {
    CorrelationRequest req{op_id, {GateKind::bool_triple, {}, {}, {}}, dealer_mode_, words, {}, {}};
    return split_triple_words<BoolTripleBatch>(roundtrip(req), words);
  }

  ArithTripleBatch arith_triples(std::uint64_t op_id, std::size_t count) override {
    CorrelationRequest req{op_id, {GateKind::arith_triple, {}, {}, {}}, dealer_mode_, count, {}, {}};
    return split_triple_words<ArithTripleBatch>(roundtrip(req), count);
  }

  Peer* peer() { return peer_; }

 private:
  std::vector<ring_t> roundtrip(const CorrelationRequest& req) {
    if (!peer_) {
      owned_ = connect_();
      peer_ = owned_.get();
    }
    peer_->send(MsgType::cross_req, req.op_id, encode_correlation_request(req));
    const Frame resp = peer_->recv(MsgType::cross_resp, req.op_id);
    return unpack_words(resp.payload);
  }

  Connector connect_;
  std::unique_ptr<Peer> owned_;
  Peer* peer_ = nullptr;
  bool dealer_mode_;
};

/// Serves both compute servers until they disconnect. Returns normally when
/// both close cleanly; rethrows the first failure otherwise.
inline void serve_correlation(Peer& party0, Peer& party1, std::uint64_t seed) {
  CorrelationBroker broker(seed);
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto run = [&](int party, Peer& peer) {
    try {
      while (auto frame = peer.recv_next()) {
        if (frame->type == MsgType::abort) {
          throw ProtocolError("party " + std::to_string(party) + " aborted: " +
                              std::string(frame->payload.begin(), frame->payload.end()));
        }
        if (frame->type != MsgType::cross_req) {
          throw ProtocolError(std::string("helper received unexpected ") + to_string(frame->type));
        }
        auto req = decode_correlation_request(frame->op_id, frame->payload);
        auto words = broker.serve(party, std::move(req));
        peer.send(MsgType::cross_resp, frame->op_id, pack_words(words));
      }
      broker.party_left(party);
    } catch (const std::exception& e) {
      broker.abort(e.what());
      peer.abort(e.what());
      std::lock_guard lk(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };

  std::thread second([&] { run(1, party1); });
  run(0, party0);
  second.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace smpcnn
