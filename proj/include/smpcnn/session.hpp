#pragma once

// Runs both compute parties (and, for the helper backend, the helper node) in
// one process over in-memory byte streams. The wire traffic is the same framed
// traffic the TCP deployment produces.

#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "smpcnn/correlated.hpp"
#include "smpcnn/helper.hpp"
#include "smpcnn/net.hpp"
#include "smpcnn/party.hpp"

namespace smpcnn {

enum class Backend { dealer, helper };

inline const char* to_string(Backend b) { return b == Backend::dealer ? "dealer" : "helper"; }

inline Backend parse_backend(const std::string& s) {
  if (s == "dealer") return Backend::dealer;
  if (s == "helper") return Backend::helper;
  throw ConfigError("unknown backend '" + s + "' (expected dealer or helper)");
}

struct LocalSessionOptions {
  Backend backend = Backend::dealer;
  FixedPointConfig fixed;
  std::uint64_t mask_seed = 1;
  std::uint64_t correlation_seed = 2;
  std::uint64_t session_id = 1;
  bool record_helper = false;
};

struct LocalSessionReport {
  PeerCounters link[2];                                   // each party's view of the party-to-party link
  std::vector<std::vector<std::uint8_t>> helper_received; // frames from both parties, party 0 first
  std::uint64_t ops[2] = {0, 0};
};

/// Runs fn(Party&) at both parties concurrently and returns both results.
template <class F>
auto run_local(const LocalSessionOptions& opt, F&& fn, LocalSessionReport* report = nullptr) {
  using R = std::invoke_result_t<F&, Party&>;
  static_assert(!std::is_void_v<R>, "run_local needs a result per party");

  auto [s0, s1] = make_local_pipe();
  Peer link0(std::move(s0), "party0->party1");
  Peer link1(std::move(s1), "party1->party0");

  std::unique_ptr<DealerHub> dealer;
  std::unique_ptr<Peer> helper_side[2], party_side[2];
  std::unique_ptr<RemoteCorrelated> remote[2];
  std::thread helper_thread;
  std::exception_ptr helper_failure;

  CorrelatedSource* sources[2] = {nullptr, nullptr};
  if (opt.backend == Backend::dealer) {
    dealer = std::make_unique<DealerHub>(opt.correlation_seed);
    sources[0] = &dealer->endpoint(0);
    sources[1] = &dealer->endpoint(1);
  } else {
    for (int i = 0; i < 2; ++i) {
      auto [a, b] = make_local_pipe();
      party_side[i] = std::make_unique<Peer>(std::move(a), "party" + std::to_string(i) + "->helper");
      helper_side[i] = std::make_unique<Peer>(std::move(b), "helper->party" + std::to_string(i));
      helper_side[i]->record_transcript(opt.record_helper);
      remote[i] = std::make_unique<RemoteCorrelated>(*party_side[i], false);
      sources[i] = remote[i].get();
    }
    helper_thread = std::thread([&] {
      try {
        serve_correlation(*helper_side[0], *helper_side[1], opt.correlation_seed);
      } catch (...) {
        helper_failure = std::current_exception();
      }
    });
  }

  Party p0(0, opt.fixed, link0, *sources[0], opt.mask_seed);
  Party p1(1, opt.fixed, link1, *sources[1], opt.mask_seed);

  std::optional<R> results[2];
  std::exception_ptr failures[2];
  auto body = [&](int i, Party& party, Peer& link) {
    try {
      results[i].emplace(fn(party));
    } catch (...) {
      failures[i] = std::current_exception();
      std::string why = "party failed";
      try {
        throw;
      } catch (const std::exception& e) {
        why = e.what();
      } catch (...) {
      }
      link.abort(why);
      if (dealer) dealer->abort(why);
      if (party_side[i]) party_side[i]->abort(why);
    }
  };
  std::thread second([&] { body(1, p1, link1); });
  body(0, p0, link0);
  second.join();

  if (helper_thread.joinable()) {
    party_side[0]->close();
    party_side[1]->close();
    helper_thread.join();
  }
  if (report) {
    report->link[0] = link0.counters();
    report->link[1] = link1.counters();
    report->ops[0] = p0.ops_issued();
    report->ops[1] = p1.ops_issued();
    if (helper_side[0]) {
      for (int i = 0; i < 2; ++i) {
        auto t = helper_side[i]->received_transcript();
        report->helper_received.insert(report->helper_received.end(), t.begin(), t.end());
      }
    }
  }
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  if (helper_failure) std::rethrow_exception(helper_failure);
  return std::pair<R, R>(std::move(*results[0]), std::move(*results[1]));
}

}  // namespace smpcnn
