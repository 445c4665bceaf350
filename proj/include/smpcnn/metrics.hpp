#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "smpcnn/errors.hpp"
#include "smpcnn/net.hpp"

namespace smpcnn {

namespace detail {

inline std::uint64_t status_kb(const char* key) {
  std::ifstream in("/proc/self/status");
  std::string line;
  const std::string k = std::string(key) + ":";
  while (std::getline(in, line)) {
    if (line.compare(0, k.size(), k) == 0) return std::stoull(line.substr(k.size()));
  }
  return 0;
}

}  // namespace detail

/// High-water mark of resident memory in KiB.
inline std::uint64_t peak_rss_kb() { return detail::status_kb("VmHWM"); }
inline std::uint64_t current_rss_kb() { return detail::status_kb("VmRSS"); }

/// Resets the high-water mark to the current RSS (Linux only; false when the
/// kernel refuses).
inline bool reset_peak_rss() {
  std::ofstream out("/proc/self/clear_refs");
  if (!out) return false;
  out << "5";
  out.flush();
  return static_cast<bool>(out);
}

struct ChunkMetrics {
  std::string layer;
  std::string stage;  // conv, dense, relu, argmax
  std::string kernels;
  std::string rows;
  double wall_ms = 0;
  std::uint64_t peak_rss_kb = 0;
  PeerCounters traffic;  // delta over the chunk on the party link
};

struct RunMetrics {
  int party = 0;
  std::vector<ChunkMetrics> chunks;
  double total_ms = 0;
  std::uint64_t peak_rss_kb = 0;
  PeerCounters traffic;

  double summed_ms() const {
    double s = 0;
    for (const auto& c : chunks) s += c.wall_ms;
    return s;
  }

  void write_csv(std::ostream& out) const {
    out << "party,layer,stage,kernels,rows,wall_ms,peak_rss_kb,frames_sent,bytes_sent,frames_received,bytes_received\n";
    auto row = [&](const std::string& layer, const std::string& stage, const std::string& k, const std::string& r,
                   double ms, std::uint64_t rss, const PeerCounters& t) {
      out << party << ',' << layer << ',' << stage << ',' << k << ',' << r << ',' << ms << ',' << rss << ','
          << t.frames_sent << ',' << t.bytes_sent << ',' << t.frames_received << ',' << t.bytes_received << '\n';
    };
    for (const auto& c : chunks) row(c.layer, c.stage, c.kernels, c.rows, c.wall_ms, c.peak_rss_kb, c.traffic);
    row("total", "all", "", "", total_ms, peak_rss_kb, traffic);
  }
};

inline PeerCounters operator-(const PeerCounters& a, const PeerCounters& b) {
  return {a.frames_sent - b.frames_sent, a.bytes_sent - b.bytes_sent, a.frames_received - b.frames_received,
          a.bytes_received - b.bytes_received};
}

/// Times one unit of work; finish() records it.
class ChunkTimer {
 public:
  ChunkTimer(RunMetrics* m, const Peer* link, std::string layer, std::string stage, std::string kernels = {},
             std::string rows = {})
      : metrics_(m), link_(link), start_(std::chrono::steady_clock::now()) {
    info_.layer = std::move(layer);
    info_.stage = std::move(stage);
    info_.kernels = std::move(kernels);
    info_.rows = std::move(rows);
    if (link_) before_ = link_->counters();
  }

  void finish() {
    if (!metrics_) return;
    info_.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    info_.peak_rss_kb = peak_rss_kb();
    if (link_) info_.traffic = link_->counters() - before_;
    metrics_->chunks.push_back(info_);
  }

 private:
  RunMetrics* metrics_;
  const Peer* link_;
  ChunkMetrics info_;
  PeerCounters before_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace smpcnn
