// Writes the reference deployment: the 4-layer MNIST-shaped model with random
// weights, a sample image and a loopback config.
//
//   make_reference <out-dir> [--seed n] [--port-base p]

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include "smpcnn/model.hpp"
#include "smpcnn/tensor_io.hpp"

using namespace smpcnn;

int main(int argc, char** argv) {
  CLI::App app{"Generate the reference model, image and config"};
  std::string out;
  std::uint64_t seed = 2024;
  unsigned port_base = 7100;
  app.add_option("out", out, "output directory")->required();
  app.add_option("--seed", seed, "weight and image seed");
  app.add_option("--port-base", port_base, "first of three loopback ports");
  CLI11_PARSE(app, argc, argv);

  try {
    const std::filesystem::path dir(out);
    std::istringstream spec_text(
        "input 1 28 28\n"
        "conv name=cnn1 kernels=5 size=5x5 stride=2,2 pad=1,0,1,0 activation=relu\n"
        "conv name=cnn2 kernels=3 size=4x4 stride=2,2 pad=1,0,1,0 activation=relu\n"
        "dense name=nn1 out=100 activation=relu\n"
        "dense name=nn2 out=10 activation=relu\n");
    ClearModel m;
    m.spec = parse_model_spec(spec_text, "reference");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto& l : m.spec.layers) {
      RealTensor w(l.weight_dims()), b(l.bias_dims());
      const double fan = l.kind == LayerKind::conv ? static_cast<double>(l.conv.i_ch * l.conv.k_row * l.conv.k_col)
                                                   : static_cast<double>(l.in);
      for (auto& v : w.data) v = normal(rng) / std::sqrt(fan);
      for (auto& v : b.data) v = 0.1 * normal(rng);
      m.weights.push_back(std::move(w));
      m.biases.push_back(std::move(b));
    }
    write_model(dir / "model", m);

    RealTensor image({1, 28, 28});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& v : image.data) v = unit(rng);
    write_tensor(dir / "image.tns", image);

    std::ofstream cfg(dir / "config.txt");
    cfg << "# loopback deployment of the reference model\n"
        << "session = 1\n"
        << "fraction_bits = 13\n"
        << "indicator_gain = 16384\n"
        << "server0 = 127.0.0.1:" << port_base << "\n"
        << "server1 = 127.0.0.1:" << port_base + 1 << "\n"
        << "helper = 127.0.0.1:" << port_base + 2 << "\n"
        << "backend = helper\n"
        << "model = model\n"
        << "image = image.tns\n"
        << "work = work\n";
    if (!cfg) throw IoError("cannot write " + (dir / "config.txt").string());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
