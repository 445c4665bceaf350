#pragma once

// Framed transport between the five roles.
//
// Wire format of one frame (all integers little-endian):
//   u32 length   payload byte count
//   u8  msg_type one of MsgType
//   u64 op_id    operation the frame belongs to
//   payload      `length` bytes
//
// A Peer owns one reliable byte stream. A background reader thread parses
// frames into a mailbox; consumers pick frames by (msg_type, op_id), so frames
// of different operations may interleave on the wire.

#include <atomic>
#include <bit>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "smpcnn/errors.hpp"
#include "smpcnn/ring.hpp"

namespace smpcnn {

enum class MsgType : std::uint8_t {
  ping = 1,
  share_push = 2,
  reshare = 3,
  bool_round = 4,
  cross_req = 5,
  cross_resp = 6,
  result_push = 7,
  abort = 8,
};

constexpr bool is_registered(std::uint8_t code) noexcept { return code >= 1 && code <= 8; }

inline const char* to_string(MsgType t) {
  switch (t) {
    case MsgType::ping: return "PING";
    case MsgType::share_push: return "SHARE_PUSH";
    case MsgType::reshare: return "RESHARE";
    case MsgType::bool_round: return "BOOL_ROUND";
    case MsgType::cross_req: return "CROSS_REQ";
    case MsgType::cross_resp: return "CROSS_RESP";
    case MsgType::result_push: return "RESULT_PUSH";
    case MsgType::abort: return "ABORT";
  }
  return "?";
}

struct Frame {
  MsgType type = MsgType::ping;
  std::uint64_t op_id = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const Frame&, const Frame&) = default;
};

constexpr std::size_t kFrameHeaderBytes = 13;
constexpr std::size_t kMaxPayloadBytes = 0x7fffffffu;

// ---------------------------------------------------------------------------
// Little-endian payload packing.

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }

  void words(std::span<const ring_t> w) {
    const std::size_t start = buf_.size();
    buf_.resize(start + w.size() * 8);
    if constexpr (std::endian::native == std::endian::little) {
      if (!w.empty()) std::memcpy(buf_.data() + start, w.data(), w.size() * 8);
    } else {
      for (std::size_t i = 0; i < w.size(); ++i)
        for (int b = 0; b < 8; ++b) buf_[start + i * 8 + b] = static_cast<std::uint8_t>(w[i] >> (8 * b));
    }
  }

  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void text(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t>& buffer() { return buf_; }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }

  std::vector<ring_t> words(std::size_t n) {
    need(n * 8);
    std::vector<ring_t> out(n);
    if constexpr (std::endian::native == std::endian::little) {
      if (n) std::memcpy(out.data(), data_.data() + pos_, n * 8);
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (int b = 0; b < 8; ++b) out[i] |= static_cast<ring_t>(data_[pos_ + i * 8 + b]) << (8 * b);
    }
    pos_ += n * 8;
    return out;
  }

  std::string rest_text() {
    std::string s(data_.begin() + static_cast<std::ptrdiff_t>(pos_), data_.end());
    pos_ = data_.size();
    return s;
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw ProtocolError("payload shorter than its declared contents");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> pack_words(std::span<const ring_t> w) {
  ByteWriter out;
  out.words(w);
  return out.take();
}

inline std::vector<ring_t> unpack_words(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8 != 0) throw ProtocolError("word payload is not a multiple of 8 bytes");
  ByteReader in(bytes);
  return in.words(bytes.size() / 8);
}

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
  if (f.payload.size() > kMaxPayloadBytes) throw FramingError("frame payload exceeds 2^31-1 bytes");
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderBytes + f.payload.size());
  const auto len = static_cast<std::uint32_t>(f.payload.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.push_back(static_cast<std::uint8_t>(f.type));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(f.op_id >> (8 * i)));
  out.insert(out.end(), f.payload.begin(), f.payload.end());
  return out;
}

struct FrameHeader {
  std::uint32_t length;
  MsgType type;
  std::uint64_t op_id;
};

inline FrameHeader decode_header(std::span<const std::uint8_t, kFrameHeaderBytes> h) {
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(h[i]) << (8 * i);
  if (len > kMaxPayloadBytes) throw FramingError("frame length exceeds 2^31-1");
  if (!is_registered(h[4])) throw FramingError("unregistered message type " + std::to_string(h[4]));
  std::uint64_t op = 0;
  for (int i = 0; i < 8; ++i) op |= static_cast<std::uint64_t>(h[5 + i]) << (8 * i);
  return {len, static_cast<MsgType>(h[4]), op};
}

/// Parses exactly one frame occupying the whole buffer.
inline Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw FramingError("truncated frame header");
  const auto h = decode_header(bytes.first<kFrameHeaderBytes>());
  if (bytes.size() - kFrameHeaderBytes != h.length) {
    throw FramingError("frame length " + std::to_string(h.length) + " does not match " +
                       std::to_string(bytes.size() - kFrameHeaderBytes) + " payload bytes");
  }
  return {h.type, h.op_id, {bytes.begin() + kFrameHeaderBytes, bytes.end()}};
}

// ---------------------------------------------------------------------------
// Byte streams.

class ByteStream {
 public:
  virtual ~ByteStream() = default;
  virtual void write_all(std::span<const std::uint8_t> data) = 0;
  /// Blocks until at least one byte is available; returns 0 at end of stream.
  virtual std::size_t read_some(std::span<std::uint8_t> out) = 0;
  /// Closes both directions and unblocks pending reads on either end.
  virtual void close() = 0;
};

namespace detail {

struct PipeBuffer {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::vector<std::uint8_t>> chunks;
  std::size_t head_offset = 0;
  bool closed = false;
};

class LocalStream final : public ByteStream {
 public:
  LocalStream(std::shared_ptr<PipeBuffer> in, std::shared_ptr<PipeBuffer> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~LocalStream() override { close(); }

  void write_all(std::span<const std::uint8_t> data) override {
    std::lock_guard lk(out_->mu);
    if (out_->closed) throw TransportError("write on closed local stream");
    out_->chunks.emplace_back(data.begin(), data.end());
    out_->cv.notify_all();
  }

  std::size_t read_some(std::span<std::uint8_t> out) override {
    std::unique_lock lk(in_->mu);
    in_->cv.wait(lk, [&] { return !in_->chunks.empty() || in_->closed; });
    if (in_->chunks.empty()) return 0;
    std::size_t n = 0;
    while (n < out.size() && !in_->chunks.empty()) {
      auto& front = in_->chunks.front();
      const std::size_t take = std::min(out.size() - n, front.size() - in_->head_offset);
      std::memcpy(out.data() + n, front.data() + in_->head_offset, take);
      n += take;
      in_->head_offset += take;
      if (in_->head_offset == front.size()) {
        in_->chunks.pop_front();
        in_->head_offset = 0;
      }
    }
    return n;
  }

  void close() override {
    for (auto* b : {in_.get(), out_.get()}) {
      std::lock_guard lk(b->mu);
      b->closed = true;
      b->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<PipeBuffer> in_;
  std::shared_ptr<PipeBuffer> out_;
};

}  // namespace detail

/// In-process duplex byte stream pair; bytes written on one end are read on
/// the other.
inline std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_local_pipe() {
  auto ab = std::make_shared<detail::PipeBuffer>();
  auto ba = std::make_shared<detail::PipeBuffer>();
  return {std::make_unique<detail::LocalStream>(ba, ab), std::make_unique<detail::LocalStream>(ab, ba)};
}

// ---------------------------------------------------------------------------
// Peer.

enum class Role : std::uint8_t {
  server0 = 0,
  server1 = 1,
  helper = 2,
  image_provider = 3,
  model_provider = 4,
};

inline const char* to_string(Role r) {
  switch (r) {
    case Role::server0: return "server0";
    case Role::server1: return "server1";
    case Role::helper: return "helper";
    case Role::image_provider: return "image-provider";
    case Role::model_provider: return "model-provider";
  }
  return "?";
}

constexpr bool is_compute_server(Role r) noexcept { return r == Role::server0 || r == Role::server1; }

struct PeerCounters {
  std::uint64_t frames_sent = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t bytes_received = 0;
};

class Peer {
 public:
  using clock = std::chrono::steady_clock;

  explicit Peer(std::unique_ptr<ByteStream> stream, std::string name = "peer")
      : stream_(std::move(stream)), name_(std::move(name)) {
    reader_ = std::thread([this] { read_loop(); });
  }

  Peer(const Peer&) = delete;
  Peer& operator=(const Peer&) = delete;

  ~Peer() {
    close();
    if (reader_.joinable()) reader_.join();
  }

  const std::string& name() const noexcept { return name_; }

  void send(const Frame& f) {
    auto bytes = encode_frame(f);
    std::lock_guard lk(write_mu_);
    {
      std::lock_guard st(mu_);
      if (state_ == State::failed) throw TransportError(name_ + ": session failed: " + failure_);
      ++counters_.frames_sent;
      counters_.bytes_sent += bytes.size();
      if (recording_) sent_.push_back(bytes);
    }
    stream_->write_all(bytes);
  }

  void send(MsgType type, std::uint64_t op_id, std::vector<std::uint8_t> payload = {}) {
    send(Frame{type, op_id, std::move(payload)});
  }

  /// Waits for the frame with the given type and op id. An ABORT frame from
  /// the peer, a closed stream or a framing failure raise instead.
  Frame recv(MsgType type, std::uint64_t op_id) {
    std::unique_lock lk(mu_);
    const auto deadline = clock::now() + timeout_;
    for (;;) {
      for (auto it = mailbox_.begin(); it != mailbox_.end(); ++it) {
        if (it->type == MsgType::abort) {
          throw ProtocolError(name_ + ": peer aborted: " + std::string(it->payload.begin(), it->payload.end()));
        }
        if (it->type == type && it->op_id == op_id) {
          Frame f = std::move(*it);
          mailbox_.erase(it);
          return f;
        }
      }
      if (state_ == State::failed) throw FramingError(name_ + ": " + failure_);
      if (state_ == State::closed) {
        throw TransportError(name_ + ": connection closed while waiting for " + to_string(type) + " op " +
                             std::to_string(op_id));
      }
      if (cv_.wait_until(lk, deadline) == std::cv_status::timeout) {
        throw TransportError(name_ + ": timed out waiting for " + std::string(to_string(type)) + " op " +
                             std::to_string(op_id));
      }
    }
  }

  /// Next frame in arrival order; nullopt once the peer has closed cleanly.
  std::optional<Frame> recv_next() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !mailbox_.empty() || state_ != State::open; });
    if (!mailbox_.empty()) {
      Frame f = std::move(mailbox_.front());
      mailbox_.pop_front();
      return f;
    }
    if (state_ == State::failed) throw FramingError(name_ + ": " + failure_);
    return std::nullopt;
  }

  void close() {
    stream_->close();
  }

  /// Sends ABORT with a reason and closes. Never throws.
  void abort(const std::string& reason) noexcept {
    try {
      send(MsgType::abort, 0, std::vector<std::uint8_t>(reason.begin(), reason.end()));
    } catch (...) {
    }
    close();
  }

  bool failed() const {
    std::lock_guard lk(mu_);
    return state_ == State::failed;
  }

  PeerCounters counters() const {
    std::lock_guard lk(mu_);
    return counters_;
  }

  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }

  void record_transcript(bool on) {
    std::lock_guard lk(mu_);
    recording_ = on;
  }

  std::vector<std::vector<std::uint8_t>> received_transcript() const {
    std::lock_guard lk(mu_);
    return received_;
  }

  std::vector<std::vector<std::uint8_t>> sent_transcript() const {
    std::lock_guard lk(mu_);
    return sent_;
  }

  Role remote_role() const noexcept { return remote_role_; }
  void set_remote_role(Role r) noexcept { remote_role_ = r; }

 private:
  enum class State { open, closed, failed };

  bool read_exact(std::uint8_t* dst, std::size_t n, bool at_boundary) {
    std::size_t got = 0;
    while (got < n) {
      const std::size_t r = stream_->read_some({dst + got, n - got});
      if (r == 0) {
        if (got == 0 && at_boundary) return false;
        throw FramingError("stream ended inside a frame");
      }
      got += r;
    }
    return true;
  }

  void read_loop() {
    try {
      for (;;) {
        std::uint8_t header[kFrameHeaderBytes];
        if (!read_exact(header, kFrameHeaderBytes, true)) break;
        const auto h = decode_header(std::span<const std::uint8_t, kFrameHeaderBytes>(header));
        Frame f{h.type, h.op_id, std::vector<std::uint8_t>(h.length)};
        if (h.length) read_exact(f.payload.data(), h.length, false);
        std::lock_guard lk(mu_);
        ++counters_.frames_received;
        counters_.bytes_received += kFrameHeaderBytes + h.length;
        if (recording_) {
          std::vector<std::uint8_t> raw(header, header + kFrameHeaderBytes);
          raw.insert(raw.end(), f.payload.begin(), f.payload.end());
          received_.push_back(std::move(raw));
        }
        mailbox_.push_back(std::move(f));
        cv_.notify_all();
      }
      std::lock_guard lk(mu_);
      state_ = State::closed;
    } catch (const std::exception& e) {
      std::lock_guard lk(mu_);
      state_ = State::failed;
      failure_ = e.what();
    }
    cv_.notify_all();
  }

  std::unique_ptr<ByteStream> stream_;
  std::string name_;
  std::thread reader_;
  mutable std::mutex mu_;
  std::mutex write_mu_;
  std::condition_variable cv_;
  std::deque<Frame> mailbox_;
  State state_ = State::open;
  std::string failure_;
  PeerCounters counters_;
  bool recording_ = false;
  std::vector<std::vector<std::uint8_t>> sent_;
  std::vector<std::vector<std::uint8_t>> received_;
  std::chrono::milliseconds timeout_{std::chrono::minutes(5)};
  Role remote_role_ = Role::server0;
};

// ---------------------------------------------------------------------------
// Handshake.

constexpr std::uint32_t kProtocolVersion = 1;

struct Hello {
  std::uint32_t version = kProtocolVersion;
  Role role = Role::server0;
  std::uint64_t session_id = 0;
  FixedPointConfig fixed;

  std::vector<std::uint8_t> encode() const {
    ByteWriter w;
    w.u32(version);
    w.u8(static_cast<std::uint8_t>(role));
    w.u64(session_id);
    w.u8(static_cast<std::uint8_t>(fixed.fraction_bits));
    w.u64(fixed.indicator_gain);
    return w.take();
  }

  static Hello decode(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    Hello h;
    h.version = r.u32();
    const auto role = r.u8();
    if (role > static_cast<std::uint8_t>(Role::model_provider)) throw HandshakeError("unknown role in handshake");
    h.role = static_cast<Role>(role);
    h.session_id = r.u64();
    h.fixed.fraction_bits = r.u8();
    h.fixed.indicator_gain = r.u64();
    return h;
  }
};

/// Exchanges hellos over PING frames with op id 0. Protocol version, session
/// id and fixed-point configuration must agree; on mismatch an ABORT is sent
/// and HandshakeError raised.
inline Hello establish(Peer& peer, const Hello& mine) {
  peer.send(MsgType::ping, 0, mine.encode());
  const Frame reply = peer.recv(MsgType::ping, 0);
  const Hello theirs = Hello::decode(reply.payload);
  std::string problem;
  if (theirs.version != mine.version) {
    problem = "protocol version " + std::to_string(theirs.version) + " != " + std::to_string(mine.version);
  } else if (theirs.session_id != mine.session_id) {
    problem = "session id " + std::to_string(theirs.session_id) + " != " + std::to_string(mine.session_id);
  } else if (!(theirs.fixed == mine.fixed)) {
    problem = "fixed-point config f=" + std::to_string(theirs.fixed.fraction_bits) +
              " K=" + std::to_string(theirs.fixed.indicator_gain) + " does not match f=" +
              std::to_string(mine.fixed.fraction_bits) + " K=" + std::to_string(mine.fixed.indicator_gain);
  }
  if (!problem.empty()) {
    peer.abort("handshake: " + problem);
    throw HandshakeError("handshake with " + std::string(to_string(theirs.role)) + " failed: " + problem);
  }
  peer.set_remote_role(theirs.role);
  return theirs;
}

}  // namespace smpcnn
