#pragma once

// Multiplicative correlated randomness.
//
// For a bilinear gate y = a (*) b over ABY2.0 shares, each party needs an
// additive part of delta_a (*) delta_b. Two backends supply it:
//
//  * the dealer sees both parties' mask parts and hands each party
//    [da]_i (*) [db]_i plus its share of the cross terms, i.e. exactly what
//    the oblivious-transfer blocks of the setup phase would produce;
//  * the helper node receives the same mask parts over the network, returns
//    only a fresh split of the cross terms, and each party adds its local
//    product itself.
//
// Both backends draw the split randomness from the same per-op stream, so for
// equal seeds they yield identical parts.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smpcnn/bilinear.hpp"
#include "smpcnn/errors.hpp"
#include "smpcnn/prg.hpp"
#include "smpcnn/ring.hpp"

namespace smpcnn {

/// XOR-shared AND triples, 64 per word. A consumer takes words in order.
struct BoolTripleBatch {
  std::vector<std::uint64_t> a, b, c;
  std::size_t cursor = 0;

  std::size_t size() const noexcept { return a.size(); }
  std::size_t remaining() const noexcept { return a.size() - cursor; }

  struct View {
    std::span<const std::uint64_t> a, b, c;
  };

  View take(std::size_t words) {
    if (remaining() < words) {
      throw ResourceError("boolean triples exhausted: need " + std::to_string(words) + " words, " +
                          std::to_string(remaining()) + " left");
    }
    View v{{a.data() + cursor, words}, {b.data() + cursor, words}, {c.data() + cursor, words}};
    cursor += words;
    return v;
  }
};

/// Additively shared ring triples with c = a * b.
struct ArithTripleBatch {
  std::vector<ring_t> a, b, c;
  std::size_t cursor = 0;

  std::size_t size() const noexcept { return a.size(); }
  std::size_t remaining() const noexcept { return a.size() - cursor; }

  struct View {
    std::span<const ring_t> a, b, c;
  };

  View take(std::size_t n) {
    if (remaining() < n) {
      throw ResourceError("arithmetic triples exhausted: need " + std::to_string(n) + ", " +
                          std::to_string(remaining()) + " left");
    }
    View v{{a.data() + cursor, n}, {b.data() + cursor, n}, {c.data() + cursor, n}};
    cursor += n;
    return v;
  }
};

/// Two-party additive split of a structured mask product.
struct CrossTermBatch {
  std::uint64_t op_id = 0;
  Shape dims;
  std::vector<ring_t> part0;
  std::vector<ring_t> part1;
};

inline std::pair<BoolTripleBatch, BoolTripleBatch> dealer_bool_triples(std::size_t words, Prg& prg) {
  BoolTripleBatch t0, t1;
  for (auto* t : {&t0, &t1}) {
    t->a.resize(words);
    t->b.resize(words);
    t->c.resize(words);
  }
  for (std::size_t i = 0; i < words; ++i) {
    const std::uint64_t a = prg.next(), b = prg.next();
    const std::uint64_t c = a & b;
    t0.a[i] = prg.next();
    t0.b[i] = prg.next();
    t0.c[i] = prg.next();
    t1.a[i] = a ^ t0.a[i];
    t1.b[i] = b ^ t0.b[i];
    t1.c[i] = c ^ t0.c[i];
  }
  return {std::move(t0), std::move(t1)};
}

inline std::pair<ArithTripleBatch, ArithTripleBatch> dealer_arith_triples(std::size_t count, Prg& prg) {
  ArithTripleBatch t0, t1;
  for (auto* t : {&t0, &t1}) {
    t->a.resize(count);
    t->b.resize(count);
    t->c.resize(count);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const ring_t a = prg.next(), b = prg.next();
    const ring_t c = a * b;
    t0.a[i] = prg.next();
    t0.b[i] = prg.next();
    t0.c[i] = prg.next();
    t1.a[i] = a - t0.a[i];
    t1.b[i] = b - t0.b[i];
    t1.c[i] = c - t0.c[i];
  }
  return {std::move(t0), std::move(t1)};
}

/// Splits the full structured product of two clear mask tensors.
inline CrossTermBatch dealer_cross_terms(const BilinearSpec& spec, std::span<const ring_t> delta_a,
                                         std::span<const ring_t> delta_b, Prg& prg, std::uint64_t op_id = 0) {
  CrossTermBatch out;
  out.op_id = op_id;
  out.dims = spec.output_dims();
  const auto full = apply_bilinear(spec, delta_a, delta_b);
  out.part0 = prg.words(full.size());
  out.part1.resize(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) out.part1[i] = full[i] - out.part0[i];
  return out;
}

/// The helper's computation: split [da]_0*[db]_1 + [da]_1*[db]_0 with fresh
/// randomness. With `include_local`, each part also carries that party's
/// [da]_i*[db]_i so the parts sum to the full product.
inline std::pair<std::vector<ring_t>, std::vector<ring_t>> split_cross_terms(
    const BilinearSpec& spec, std::span<const ring_t> a0, std::span<const ring_t> b0, std::span<const ring_t> a1,
    std::span<const ring_t> b1, Prg& prg, bool include_local) {
  auto cross = apply_bilinear(spec, a0, b1);
  const auto other = apply_bilinear(spec, a1, b0);
  for (std::size_t i = 0; i < cross.size(); ++i) cross[i] += other[i];
  std::vector<ring_t> p0 = prg.words(cross.size());
  std::vector<ring_t> p1(cross.size());
  for (std::size_t i = 0; i < cross.size(); ++i) p1[i] = cross[i] - p0[i];
  if (include_local) {
    const auto l0 = apply_bilinear(spec, a0, b0);
    const auto l1 = apply_bilinear(spec, a1, b1);
    for (std::size_t i = 0; i < cross.size(); ++i) {
      p0[i] += l0[i];
      p1[i] += l1[i];
    }
  }
  return {std::move(p0), std::move(p1)};
}

/// One party's request for correlated randomness.
struct CorrelationRequest {
  std::uint64_t op_id = 0;
  BilinearSpec spec;          // kind selects cross terms or a triple flavour
  bool include_local = true;  // dealer semantics when true, helper when false
  std::uint64_t count = 0;    // triple words/elements; unused for cross terms
  std::vector<ring_t> delta_a;
  std::vector<ring_t> delta_b;

  bool same_shape(const CorrelationRequest& o) const {
    return op_id == o.op_id && spec == o.spec && include_local == o.include_local && count == o.count;
  }
};

/// Words returned to one party: a cross-term part, or a, b, c concatenated for
/// triples.
using CorrelationResponse = std::vector<ring_t>;

/// Pairs up the two parties' requests per op id and computes both responses.
/// Shared by the in-process dealer and the helper service.
class CorrelationBroker {
 public:
  explicit CorrelationBroker(std::uint64_t seed) : seed_(seed) {}

  CorrelationResponse serve(int party, CorrelationRequest req) {
    std::unique_lock lk(mu_);
    check_alive();
    const int other = 1 - party;
    if (pending_[other] && *pending_[other] != req.op_id) {
      fail_locked("protocol desync: party " + std::to_string(party) + " requested op " +
                  std::to_string(req.op_id) + " while party " + std::to_string(other) + " waits on op " +
                  std::to_string(*pending_[other]));
    }
    auto& slot = slots_[req.op_id];
    if (slot.request[party]) {
      fail_locked("duplicate request for op " + std::to_string(req.op_id) + " from party " + std::to_string(party));
    }
    slot.request[party] = std::move(req);
    if (slot.request[other]) {
      compute_locked(slot);
      pending_[other].reset();
      cv_.notify_all();
    } else {
      pending_[party] = slot.request[party]->op_id;
      const auto deadline = std::chrono::steady_clock::now() + timeout_;
      const std::uint64_t op = slot.request[party]->op_id;
      while (!slots_[op].ready) {
        check_alive();
        if (cv_.wait_until(lk, deadline) == std::cv_status::timeout) {
          fail_locked("timed out waiting for party " + std::to_string(other) + " on op " + std::to_string(op));
        }
      }
    }
    const std::uint64_t op = slot.request[party]->op_id;
    auto& s = slots_[op];
    CorrelationResponse out = std::move(s.response[party]);
    if (++s.collected == 2) slots_.erase(op);
    return out;
  }

  /// Wakes all waiters with an error; later requests fail immediately.
  void abort(const std::string& reason) {
    std::lock_guard lk(mu_);
    if (!failure_) failure_ = reason;
    cv_.notify_all();
  }

  /// Called when a party disconnects; a request still waiting on it fails.
  void party_left(int party) {
    std::lock_guard lk(mu_);
    if (pending_[1 - party] && !failure_) {
      failure_ = "party " + std::to_string(party) + " disconnected while party " + std::to_string(1 - party) +
                 " waits on op " + std::to_string(*pending_[1 - party]);
    }
    cv_.notify_all();
  }

  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }

 private:
  struct Slot {
    std::optional<CorrelationRequest> request[2];
    CorrelationResponse response[2];
    bool ready = false;
    int collected = 0;
  };

  void check_alive() const {
    if (failure_) throw ProtocolError(*failure_);
  }

  [[noreturn]] void fail_locked(const std::string& why) {
    if (!failure_) failure_ = why;
    cv_.notify_all();
    throw ProtocolError(why);
  }

  void compute_locked(Slot& slot) {
    const auto& r0 = *slot.request[0];
    const auto& r1 = *slot.request[1];
    if (!r0.same_shape(r1)) {
      fail_locked("protocol desync on op " + std::to_string(r0.op_id) + ": parties disagree on gate " +
                  to_string(r0.spec.kind) + " vs " + to_string(r1.spec.kind) + " or its shape");
    }
    Prg prg(seed_, PrgDomain::correlation, r0.op_id);
    switch (r0.spec.kind) {
      case GateKind::bool_triple: {
        auto [t0, t1] = dealer_bool_triples(r0.count, prg);
        slot.response[0] = concat(t0.a, t0.b, t0.c);
        slot.response[1] = concat(t1.a, t1.b, t1.c);
        break;
      }
      case GateKind::arith_triple: {
        auto [t0, t1] = dealer_arith_triples(r0.count, prg);
        slot.response[0] = concat(t0.a, t0.b, t0.c);
        slot.response[1] = concat(t1.a, t1.b, t1.c);
        break;
      }
      default: {
        const std::size_t na = numel(r0.spec.a_dims), nb = numel(r0.spec.b_dims);
        for (const auto* r : {&r0, &r1}) {
          if (r->delta_a.size() != na || r->delta_b.size() != nb) {
            fail_locked("op " + std::to_string(r0.op_id) + ": mask parts do not match declared shapes");
          }
        }
        auto [p0, p1] = split_cross_terms(r0.spec, r0.delta_a, r0.delta_b, r1.delta_a, r1.delta_b, prg,
                                          r0.include_local);
        slot.response[0] = std::move(p0);
        slot.response[1] = std::move(p1);
      }
    }
    slot.ready = true;
  }

  static std::vector<ring_t> concat(const std::vector<ring_t>& a, const std::vector<ring_t>& b,
                                    const std::vector<ring_t>& c) {
    std::vector<ring_t> out;
    out.reserve(a.size() * 3);
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    out.insert(out.end(), c.begin(), c.end());
    return out;
  }

  std::uint64_t seed_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::uint64_t, Slot> slots_;
  std::optional<std::uint64_t> pending_[2];
  std::optional<std::string> failure_;
  std::chrono::milliseconds timeout_{std::chrono::minutes(5)};
};

template <class Batch>
Batch split_triple_words(CorrelationResponse words, std::size_t n) {
  if (words.size() != 3 * n) throw ProtocolError("triple response has the wrong length");
  Batch t;
  t.a.assign(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(n));
  t.b.assign(words.begin() + static_cast<std::ptrdiff_t>(n), words.begin() + static_cast<std::ptrdiff_t>(2 * n));
  t.c.assign(words.begin() + static_cast<std::ptrdiff_t>(2 * n), words.end());
  return t;
}

/// Per-party view of a correlated randomness backend.
class CorrelatedSource {
 public:
  virtual ~CorrelatedSource() = default;

  /// This party's additive part of delta_a (*) delta_b (the full product).
  virtual std::vector<ring_t> cross_terms(std::uint64_t op_id, const BilinearSpec& spec,
                                          std::span<const ring_t> my_delta_a,
                                          std::span<const ring_t> my_delta_b) = 0;
  virtual BoolTripleBatch bool_triples(std::uint64_t op_id, std::size_t words) = 0;
  virtual ArithTripleBatch arith_triples(std::uint64_t op_id, std::size_t count) = 0;
};

/// In-process trusted dealer shared by both parties of a session.
class DealerHub {
 public:
  explicit DealerHub(std::uint64_t seed) : broker_(seed), endpoints_{Endpoint(*this, 0), Endpoint(*this, 1)} {}

  DealerHub(const DealerHub&) = delete;
  DealerHub& operator=(const DealerHub&) = delete;

  CorrelatedSource& endpoint(int party) { return endpoints_[party]; }
  void abort(const std::string& reason) { broker_.abort(reason); }
  CorrelationBroker& broker() { return broker_; }

 private:
  class Endpoint final : public CorrelatedSource {
   public:
    Endpoint(DealerHub& hub, int party) : hub_(&hub), party_(party) {}

    std::vector<ring_t> cross_terms(std::uint64_t op_id, const BilinearSpec& spec, std::span<const ring_t> da,
                                    std::span<const ring_t> db) override {
      CorrelationRequest req{op_id, spec, true, 0, {da.begin(), da.end()}, {db.begin(), db.end()}};
      return hub_->broker_.serve(party_, std::move(req));
    }

    BoolTripleBatch bool_triples(std::uint64_t op_id, std::size_t words) override {
      CorrelationRequest req{op_id, {GateKind::bool_triple, {}, {}, {}}, true, words, {}, {}};
      return split_triple_words<BoolTripleBatch>(hub_->broker_.serve(party_, std::move(req)), words);
    }

    ArithTripleBatch arith_triples(std::uint64_t op_id, std::size_t count) override {
      CorrelationRequest req{op_id, {GateKind::arith_triple, {}, {}, {}}, true, count, {}, {}};
      return split_triple_words<ArithTripleBatch>(hub_->broker_.serve(party_, std::move(req)), count);
    }

   private:
    DealerHub* hub_;
    int party_;
  };

  CorrelationBroker broker_;
  Endpoint endpoints_[2];
};

}  // namespace smpcnn
