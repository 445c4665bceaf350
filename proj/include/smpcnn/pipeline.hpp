#pragma once

// N-layer CNN inference over shares: conv layers z = conv(w, h) + b, dense
// layers z = W h + b, ReLU after each layer that asks for it, argmax at the
// end. Every layer reads and writes share files so chunked execution and the
// multi-process deployment share one code path.

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "smpcnn/metrics.hpp"
#include "smpcnn/model.hpp"
#include "smpcnn/oracle.hpp"
#include "smpcnn/party.hpp"
#include "smpcnn/proto_tensor.hpp"
#include "smpcnn/session.hpp"
#include "smpcnn/share_io.hpp"
#include "smpcnn/sharing.hpp"
#include "smpcnn/splitter.hpp"

namespace smpcnn {

/// Share file of a named tensor (`image`, `<layer>.w`, `<layer>.b`) for one party.
inline std::filesystem::path share_file(const std::filesystem::path& dir, const std::string& name, int party) {
  return dir / (name + ".p" + std::to_string(party) + ".shr");
}

using NamedShares = std::map<std::string, Aby2Share>;

/// Model provider: encodes and shares every weight and bias tensor.
inline std::pair<NamedShares, NamedShares> share_model(const ClearModel& m, const FixedPointConfig& cfg,
                                                       std::uint64_t seed) {
  m.validate();
  std::pair<NamedShares, NamedShares> out;
  Prg prg(seed, PrgDomain::provider, 1);
  for (std::size_t j = 0; j < m.spec.layers.size(); ++j) {
    const auto& l = m.spec.layers[j];
    auto w = encode_tensor(m.weights[j], cfg);
    w.dims = l.weight_dims();
    auto b = encode_tensor(m.biases[j], cfg);
    b.dims = l.bias_dims();
    auto [w0, w1] = make_shares(w, prg);
    auto [b0, b1] = make_shares(b, prg);
    out.first.emplace(l.name + ".w", std::move(w0));
    out.second.emplace(l.name + ".w", std::move(w1));
    out.first.emplace(l.name + ".b", std::move(b0));
    out.second.emplace(l.name + ".b", std::move(b1));
  }
  return out;
}

/// Image provider: encodes and shares the image.
inline std::pair<Aby2Share, Aby2Share> share_image(const RealTensor& image, const ModelSpec& spec,
                                                   const FixedPointConfig& cfg, std::uint64_t seed) {
  auto x = encode_tensor(image, cfg);
  if (x.size() != numel(spec.input)) throw ShapeError("image does not match the model input " + to_string(spec.input));
  x.dims = spec.input;
  return make_shares(x, seed, 2);
}

inline void write_party_shares(const std::filesystem::path& dir, const NamedShares& shares, unsigned fraction_bits) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, s] : shares) write_share_file(share_file(dir, name, s.party), s, fraction_bits);
}

/// Runs the model at one party. `share_dir` holds this party's image and
/// model share files; intermediate files go to `scratch`.
inline Aby2Share run_inference(Party& party, const ModelSpec& spec, const SplitPlan& plan,
                               const std::filesystem::path& share_dir, const std::filesystem::path& scratch,
                               RunMetrics* metrics = nullptr) {
  plan.validate(spec);
  std::filesystem::create_directories(scratch);
  const int i = party.index();
  const auto t0 = std::chrono::steady_clock::now();
  const PeerCounters traffic0 = party.peer().counters();
  if (metrics) metrics->party = i;

  ChunkedOptions copt{scratch, metrics, false};
  std::filesystem::path cur = share_file(share_dir, "image", i);
  {
    ShareReader r(cur);
    if (r.header().dims != spec.input) {
      throw ShapeError(cur.string() + ": image shares have shape " + to_string(r.header().dims) + ", model expects " +
                       to_string(spec.input));
    }
  }
  std::size_t ci = 0, di = 0;
  for (const auto& l : spec.layers) {
    const auto z_file = share_file(scratch, l.name + ".z", i);
    const auto w_file = share_file(share_dir, l.name + ".w", i);
    const auto b_file = share_file(share_dir, l.name + ".b", i);
    if (l.kind == LayerKind::conv) {
      run_conv_chunked(party, l.name, l.conv, plan.conv[ci++], w_file, b_file, cur, z_file, copt);
    } else {
      const auto x = read_share_file(cur);
      run_matmul_chunked(party, l.name, w_file, b_file, x, plan.dense[di++], z_file, copt);
    }
    if (!l.relu) {
      cur = z_file;
      continue;
    }
    ChunkTimer timer(metrics, &party.peer(), l.name, "relu", "", "");
    const auto h_file = share_file(scratch, l.name + ".h", i);
    write_share_file(h_file, secure_relu(party, read_share_file(z_file)), party.config().fraction_bits);
    timer.finish();
    cur = h_file;
  }
  ChunkTimer timer(metrics, &party.peer(), "output", "argmax", "", "");
  const auto h = read_share_file(cur);
  auto label = secure_argmax(party, h.reshaped({h.size()}));
  timer.finish();
  if (metrics) {
    metrics->total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    metrics->peak_rss_kb = peak_rss_kb();
    metrics->traffic = party.peer().counters() - traffic0;
  }
  return label;
}

/// Label from the two parties' label shares (image-provider side).
inline std::size_t reconstruct_label(const Aby2Share& s0, const Aby2Share& s1) {
  const auto v = reconstruct(s0, s1);
  if (v.size() != 1) throw ShapeError("label share must hold one element");
  return static_cast<std::size_t>(v[0]);
}

struct LocalInferenceOptions {
  LocalSessionOptions session;
  std::optional<SplitPlan> plan;
  std::uint64_t provider_seed = 3;
  std::filesystem::path scratch;
};

struct LocalInferenceResult {
  std::size_t label = 0;
  RunMetrics metrics[2];
  LocalSessionReport report;
};

/// Providers, both compute parties and (for the helper backend) the helper in
/// one process: shares are written to `scratch`, inference runs over local
/// pipes, and the label is reconstructed as the image provider would.
inline LocalInferenceResult run_local_inference(const ClearModel& model, const RealTensor& image,
                                                const LocalInferenceOptions& opt) {
  const auto& cfg = opt.session.fixed;
  const SplitPlan plan = opt.plan.value_or(SplitPlan::unsplit(model.spec));
  const auto shares_dir = opt.scratch / "shares";
  auto [m0, m1] = share_model(model, cfg, opt.provider_seed);
  auto [x0, x1] = share_image(image, model.spec, cfg, opt.provider_seed);
  m0.emplace("image", std::move(x0));
  m1.emplace("image", std::move(x1));
  write_party_shares(shares_dir, m0, cfg.fraction_bits);
  write_party_shares(shares_dir, m1, cfg.fraction_bits);

  LocalInferenceResult result;
  auto [l0, l1] = run_local(
      opt.session,
      [&](Party& p) {
        return run_inference(p, model.spec, plan, shares_dir, opt.scratch / ("work" + std::to_string(p.index())),
                             &result.metrics[p.index()]);
      },
      &result.report);
  result.label = reconstruct_label(l0, l1);
  return result;
}

}  // namespace smpcnn
