#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smpcnn/correlated.hpp"
#include "smpcnn/net.hpp"
#include "smpcnn/prg.hpp"
#include "smpcnn/ring.hpp"

namespace smpcnn {

/// Protocol state of one compute server within a session: its index, the link
/// to the other server, the correlated randomness backend and the fresh-mask
/// stream. Both servers walk the same gate schedule, so `next_op()` yields
/// identical op ids on both sides.
class Party {
 public:
  Party(int index, FixedPointConfig cfg, Peer& peer, CorrelatedSource& correlated, std::uint64_t mask_seed)
      : index_(index), cfg_(cfg), peer_(&peer), correlated_(&correlated), mask_seed_(mask_seed) {
    if (index != 0 && index != 1) throw ConfigError("party index must be 0 or 1");
    cfg_.validate();
  }

  int index() const noexcept { return index_; }
  bool is_first() const noexcept { return index_ == 0; }
  const FixedPointConfig& config() const noexcept { return cfg_; }
  Peer& peer() noexcept { return *peer_; }
  CorrelatedSource& correlated() noexcept { return *correlated_; }

  std::uint64_t next_op() noexcept { return ++op_counter_; }
  std::uint64_t ops_issued() const noexcept { return op_counter_; }

  /// Fresh-mask generator for the given op; independent of all data.
  Prg masks(std::uint64_t op_id) const {
    return Prg(mask_seed_, PrgDomain::party_masks, (op_id << 1) | static_cast<std::uint64_t>(index_));
  }

  /// Sends this party's words for `op_id` and returns the peer's words.
  std::vector<ring_t> exchange(MsgType type, std::uint64_t op_id, std::span<const ring_t> mine) {
    peer_->send(type, op_id, pack_words(mine));
    auto theirs = unpack_words(peer_->recv(type, op_id).payload);
    if (theirs.size() != mine.size()) {
      throw ProtocolError(std::string(to_string(type)) + " op " + std::to_string(op_id) + ": peer sent " +
                          std::to_string(theirs.size()) + " words, expected " + std::to_string(mine.size()));
    }
    return theirs;
  }

 private:
  int index_;
  FixedPointConfig cfg_;
  Peer* peer_;
  CorrelatedSource* correlated_;
  std::uint64_t mask_seed_;
  std::uint64_t op_counter_ = 0;
};

}  // namespace smpcnn
