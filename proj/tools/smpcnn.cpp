// smpcnn: role executables for two-server CNN inference.
//
//   smpcnn helper         --config c.txt
//   smpcnn server1        --config c.txt
//   smpcnn server0        --config c.txt
//   smpcnn model-provider --config c.txt
//   smpcnn image-provider --config c.txt      prints the label
//   smpcnn oracle         --config c.txt      prints the clear fixed-point label
//   smpcnn plan           --config c.txt      dims, multiplication counts, split tables

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "smpcnn.hpp"

using namespace smpcnn;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string backend;
  std::string cnn_split, nn_split;
  std::optional<std::size_t> hsplit;
  std::optional<std::uint64_t> seed;
  std::string metrics;
  std::string listen, peer, helper;
  std::string model, image, work;
};

enum Uses : unsigned {
  kBackend = 1,
  kSplit = 2,
  kMetrics = 4,
  kSeed = 8,
  kModel = 16,
  kImage = 32,
  kNet = 64,
};

void add_flags(CLI::App* cmd, Flags& f, unsigned uses) {
  cmd->add_option("--config", f.config, "key = value configuration file");
  if (uses & kBackend) {
    cmd->add_option("--backend", f.backend, "correlated randomness: dealer | helper")
        ->check(CLI::IsMember({"dealer", "helper"}));
  }
  if (uses & kSplit) {
    cmd->add_option("--cnn-split", f.cnn_split, "kernel groups per conv layer, e.g. 5,3");
    cmd->add_option("--nn-split", f.nn_split, "row blocks per dense layer, e.g. 4,1");
    cmd->add_option("--hsplit", f.hsplit, "horizontal chunks per conv layer");
  }
  if (uses & kSeed) cmd->add_option("--seed", f.seed, "deterministic seeds (test mode)");
  if (uses & kMetrics) cmd->add_option("--metrics", f.metrics, "write per-chunk metrics CSV");
  if (uses & kNet) {
    cmd->add_option("--listen", f.listen, "listen address host:port");
    cmd->add_option("--peer", f.peer, "address of the other compute server");
    cmd->add_option("--helper", f.helper, "helper address host:port");
  }
  if (uses & kModel) cmd->add_option("--model", f.model, "model directory (model.txt and tensors)");
  if (uses & kImage) cmd->add_option("--image", f.image, "image tensor file");
  if ((uses & kNet) && (uses & kMetrics)) cmd->add_option("--work", f.work, "directory for share files");
}

DeployConfig resolve(const Flags& f) {
  DeployConfig c;
  if (!f.config.empty()) c = load_deploy_config(KeyValueConfig::read(f.config));
  if (!f.backend.empty()) c.backend = parse_backend(f.backend);
  try {
    if (!f.cnn_split.empty()) c.cnn_split = parse_count_list(f.cnn_split, "--cnn-split");
    if (!f.nn_split.empty()) c.nn_split = parse_count_list(f.nn_split, "--nn-split");
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  if (f.hsplit) {
    if (*f.hsplit == 0) throw UsageError("--hsplit must be at least 1");
    c.hsplit = *f.hsplit;
  }
  if (f.seed) c.seed = f.seed;
  if (!f.metrics.empty()) c.metrics = f.metrics;
  if (!f.helper.empty()) c.helper = parse_endpoint(f.helper);
  if (!f.model.empty()) c.model_dir = f.model;
  if (!f.image.empty()) c.image = f.image;
  if (!f.work.empty()) c.work = f.work;
  return c;
}

ModelSpec model_spec_of(const DeployConfig& c) {
  if (c.model_dir.empty()) throw UsageError("no model: pass --model or set 'model' in the config");
  const auto p = std::filesystem::is_directory(c.model_dir) ? c.model_dir / "model.txt" : c.model_dir;
  return read_model_spec(p);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-server secret-shared CNN inference"};
  app.require_subcommand(1);
  Flags f;

  auto* s0 = app.add_subcommand("server0", "compute server 0");
  auto* s1 = app.add_subcommand("server1", "compute server 1");
  auto* helper = app.add_subcommand("helper", "correlated-randomness helper");
  auto* img = app.add_subcommand("image-provider", "share an image and print the label");
  auto* mdl = app.add_subcommand("model-provider", "share the model weights");
  auto* oracle = app.add_subcommand("oracle", "clear fixed-point reference label");
  auto* plan = app.add_subcommand("plan", "dims, multiplication counts and split tables");

  for (auto* s : {s0, s1}) add_flags(s, f, kBackend | kSplit | kSeed | kMetrics | kNet);
  add_flags(helper, f, kSeed | kNet);
  add_flags(img, f, kSeed | kImage);
  add_flags(mdl, f, kSeed | kModel);
  add_flags(oracle, f, kModel | kImage);
  add_flags(plan, f, kSplit | kModel);
  for (auto* s : {img, mdl}) {
    s->add_option("--server0", f.listen, "address of server 0");
    s->add_option("--server1", f.peer, "address of server 1");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    DeployConfig c = resolve(f);
    if (s0->parsed() || s1->parsed()) {
      const int i = s0->parsed() ? 0 : 1;
      if (!f.listen.empty()) c.server[i] = parse_endpoint(f.listen);
      if (!f.peer.empty()) c.server[1 - i] = parse_endpoint(f.peer);
      if (!c.server[i]) throw UsageError("server" + std::to_string(i) + ": no listen address (--listen or config)");
      if (i == 0 && !c.server[1]) throw UsageError("server0: no peer address (--peer or 'server1' in the config)");
      run_server(i, c, &std::cerr);
    } else if (helper->parsed()) {
      if (!f.listen.empty()) c.helper = parse_endpoint(f.listen);
      if (!f.peer.empty()) throw UsageError("helper: --peer does not apply");
      if (!c.helper) throw UsageError("helper: no listen address (--listen or 'helper' in the config)");
      run_helper(c, &std::cerr);
    } else if (img->parsed() || mdl->parsed()) {
      if (!f.listen.empty()) c.server[0] = parse_endpoint(f.listen);
      if (!f.peer.empty()) c.server[1] = parse_endpoint(f.peer);
      if (!c.server[0] || !c.server[1]) throw UsageError("provider: both server addresses are required");
      if (img->parsed()) {
        if (c.image.empty()) throw UsageError("image-provider: no image (--image or config)");
        std::cout << run_image_provider(c) << std::endl;
      } else {
        if (c.model_dir.empty()) throw UsageError("model-provider: no model (--model or config)");
        run_model_provider(c);
      }
    } else if (oracle->parsed()) {
      if (c.model_dir.empty() || c.image.empty()) throw UsageError("oracle: needs a model and an image");
      const auto model = read_model(c.model_dir);
      std::cout << oracle_inference(model, read_image(c.image, model.spec), c.fixed) << std::endl;
    } else if (plan->parsed()) {
      const auto spec = model_spec_of(c);
      std::cout << format_plan(spec, c.plan_for(spec));
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
