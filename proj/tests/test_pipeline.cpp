#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "smpcnn/deploy.hpp"
#include "smpcnn/pipeline.hpp"
#include "support/models.hpp"

using namespace smpcnn;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("smpcnn_pipeline_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::size_t secure_label(const ClearModel& m, const RealTensor& img, Backend b, const std::string& tag,
                         std::optional<SplitPlan> plan = std::nullopt) {
  LocalInferenceOptions o;
  o.session.backend = b;
  o.scratch = scratch(tag);
  o.plan = plan;
  const auto r = run_local_inference(m, img, o);
  std::filesystem::remove_all(o.scratch);
  return r.label;
}

}  // namespace

TEST(TensorFile, ParsesWellFormed) {
  const auto t = parse_tensor("TNS v1 2 2 2\n1\n-2.5\n# comment\n3e-1\n4\n");
  EXPECT_EQ(t.dims, (Shape{2, 2}));
  EXPECT_EQ(t.data, (std::vector<double>{1, -2.5, 0.3, 4}));
}

TEST(TensorFile, CountMismatchNamesTheLine) {
  try {
    parse_tensor("TNS v1 2 2 2\n1\n2\n3\n", "short.tns");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("short.tns"), std::string::npos);
  }
  try {
    parse_tensor("TNS v1 1 2\n1\n2\n3\n", "long.tns");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  EXPECT_THROW(parse_tensor("TNS v1 1 2\n1\nx\n"), ParseError);
  EXPECT_THROW(parse_tensor("TNS v2 1 1\n1\n"), ParseError);
  EXPECT_THROW(parse_tensor("TNS v1 2 1\n1\n"), ParseError);
}

TEST(TensorFile, WriteReadRoundTripIsExact) {
  std::mt19937_64 g(1);
  const auto t = models::random_image({2, 3}, g);
  std::ostringstream os;
  write_tensor(os, t);
  EXPECT_EQ(parse_tensor(os.str()).data, t.data);
}

TEST(ModelSpec, ReferenceDims) {
  const auto m = models::spec_from(models::kReferenceSpec);
  const auto s = m.shapes();
  EXPECT_EQ(s[1], (Shape{5, 13, 13}));
  EXPECT_EQ(s[2], (Shape{3, 6, 6}));
  EXPECT_EQ(m.layers[2].weight_dims(), (Shape{100, 108}));
  EXPECT_EQ(m.layers[3].weight_dims(), (Shape{10, 100}));
  EXPECT_EQ(m.layers[0].weight_dims(), (Shape{5, 1, 5, 5}));
  EXPECT_EQ(m.layers[1].weight_dims(), (Shape{3, 5, 4, 4}));
}

TEST(ModelSpec, ReferenceFilesValidate) {
  const auto m = read_model(std::filesystem::path(SMPCNN_REFERENCE_DIR) / "model");
  EXPECT_EQ(m.spec.layers.size(), 4u);
  EXPECT_NO_THROW(read_image(std::filesystem::path(SMPCNN_REFERENCE_DIR) / "image.tns", m.spec));
}

TEST(ModelSpec, FormatRoundTrip) {
  const auto m = models::spec_from(models::kReferenceSpec);
  EXPECT_EQ(format_model_spec(models::spec_from(format_model_spec(m))), format_model_spec(m));
}

TEST(ModelSpec, Errors) {
  EXPECT_THROW(models::spec_from("input 1 4 4\nconv kernels=2 size=5x5\n"), ShapeError);
  EXPECT_THROW(models::spec_from("input 1 4 4\npool size=2\n"), ParseError);
  EXPECT_THROW(models::spec_from("input 1 4 4\ndense out=3 activation=tanh\n"), ParseError);
  EXPECT_THROW(models::spec_from("input 1 4 4\n"), ConfigError);
  EXPECT_THROW(models::spec_from("input 16\nconv kernels=1 size=1x1\n"), ShapeError);
  try {
    models::spec_from("input 1 4 4\n\ndense out=3 colour=red\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(ModelSpec, WeightShapeMismatch) {
  std::mt19937_64 g(2);
  auto m = models::reference_model(g);
  m.weights[2] = RealTensor({108, 100});
  EXPECT_THROW(m.validate(), ShapeError);
}

TEST(KeyValue, ParsesAndReportsErrors) {
  std::istringstream in("# c\nserver0 = 127.0.0.1:1 # trailing\n\nhsplit=3\n");
  const auto kv = KeyValueConfig::parse(in, "c.txt");
  EXPECT_EQ(kv.require("server0"), "127.0.0.1:1");
  EXPECT_EQ(kv.number_or("hsplit", 1), 3u);
  EXPECT_EQ(kv.number_or("missing", 7), 7u);
  EXPECT_THROW(kv.require("missing"), ConfigError);
  std::istringstream bad("a = 1\nnot a pair\n");
  EXPECT_THROW(KeyValueConfig::parse(bad, "bad"), ParseError);
  std::istringstream dup("a = 1\na = 2\n");
  EXPECT_THROW(KeyValueConfig::parse(dup, "dup"), ParseError);
}

TEST(Oracle, HandComputedDense) {
  // W = [[1, 2], [3, 4]], x = [0.5, 0.25], b = [0, -2]: z = [1, 0.5]
  ClearModel m;
  m.spec = models::spec_from("input 2\ndense out=2 activation=none\n");
  m.weights = {RealTensor({2, 2}, {1, 2, 3, 4})};
  m.biases = {RealTensor({2}, {0, -2})};
  const FixedPointConfig cfg;
  std::vector<RingTensor> w{encode_tensor(m.weights[0], cfg)}, b{encode_tensor(m.biases[0], cfg)};
  const auto trace = oracle_forward(m.spec, w, b, encode_tensor(RealTensor({2}, {0.5, 0.25}), cfg), cfg);
  EXPECT_EQ(decode(trace.activations[0][0], cfg), 1.0);
  EXPECT_EQ(decode(trace.activations[0][1], cfg), 0.5);
  EXPECT_EQ(trace.label, 0u);
}

TEST(Oracle, ZeroWeightsOneHotBias) {
  for (std::size_t k = 0; k < 5; ++k) {
    ClearModel m;
    m.spec = models::spec_from("input 3\ndense out=5 activation=relu\n");
    m.weights = {RealTensor({5, 3})};
    RealTensor b({5});
    b[k] = 1.0;
    m.biases = {b};
    EXPECT_EQ(oracle_inference(m, RealTensor({3}, {1, 2, 3}), {}), k);
  }
}

TEST(Oracle, TiesResolveToHighestIndex) {
  ClearModel m;
  m.spec = models::spec_from("input 2\ndense out=4 activation=relu\n");
  m.weights = {RealTensor({4, 2})};
  m.biases = {RealTensor({4}, {1, 3, 3, 2})};
  EXPECT_EQ(oracle_inference(m, RealTensor({2}), {}), 2u);
}

class Pipeline : public ::testing::TestWithParam<Backend> {};

TEST_P(Pipeline, IdentityDenseWithLargeBias) {
  ClearModel m;
  m.spec = models::spec_from("input 6\ndense out=6 activation=relu\n");
  RealTensor w({6, 6});
  for (std::size_t i = 0; i < 6; ++i) w[i * 6 + i] = 1.0;
  RealTensor b({6});
  b[3] = 100.0;
  m.weights = {w};
  m.biases = {b};
  EXPECT_EQ(secure_label(m, RealTensor({6}, {1, 2, 3, 4, 5, 6}), GetParam(), "identity"), 3u);
}

TEST_P(Pipeline, ReferenceModelZeroImageMatchesOracle) {
  std::mt19937_64 g(3);
  const auto m = models::reference_model(g);
  const RealTensor img({1, 28, 28});
  EXPECT_EQ(secure_label(m, img, GetParam(), "zero"), oracle_inference(m, img, {}));
}

TEST_P(Pipeline, PlansAgree) {
  std::mt19937_64 g(4);
  const auto m = models::reference_model(g);
  const auto img = models::random_image({1, 28, 28}, g);
  const auto want = oracle_inference(m, img, {});
  SplitPlan a = SplitPlan::unsplit(m.spec), b = a, c = a;
  b.conv = {{5, 2}, {3, 2}};
  b.dense = {4, 2};
  c.conv = {{2, 13}, {1, 6}};
  c.dense = {100, 10};
  for (const auto& p : {a, b, c}) EXPECT_EQ(secure_label(m, img, GetParam(), "plans", p), want);
}

TEST_P(Pipeline, RandomSmallModelsMatchOracle) {
  std::mt19937_64 g(5);
  for (int t = 0; t < 10; ++t) {
    const auto m = models::random_small_model(g);
    const auto img = models::random_image(m.spec.input, g);
    EXPECT_EQ(secure_label(m, img, GetParam(), "small"), oracle_inference(m, img, {})) << format_model_spec(m.spec);
  }
}

TEST_P(Pipeline, MetricsTotalsCoverChunks) {
  std::mt19937_64 g(6);
  const auto m = models::reference_model(g);
  LocalInferenceOptions o;
  o.session.backend = GetParam();
  o.scratch = scratch("metrics");
  SplitPlan p = SplitPlan::unsplit(m.spec);
  p.conv[0] = {5, 2};
  o.plan = p;
  const auto r = run_local_inference(m, models::random_image({1, 28, 28}, g), o);
  const auto& mt = r.metrics[0];
  EXPECT_GT(mt.chunks.size(), 10u);
  EXPECT_LE(mt.summed_ms(), mt.total_ms * 1.01 + 1.0);
  std::uint64_t frames = 0;
  for (const auto& c : mt.chunks) frames += c.traffic.frames_sent;
  EXPECT_EQ(frames, mt.traffic.frames_sent);
  std::ostringstream csv;
  mt.write_csv(csv);
  EXPECT_NE(csv.str().find("0,total,all"), std::string::npos);
  std::filesystem::remove_all(o.scratch);
}

INSTANTIATE_TEST_SUITE_P(Backends, Pipeline, ::testing::Values(Backend::dealer, Backend::helper),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Pipeline, ShapeErrorAbortsBothParties) {
  std::mt19937_64 g(7);
  const auto m = models::reference_model(g);
  EXPECT_THROW(secure_label(m, RealTensor({1, 27, 28}), Backend::dealer, "bad"), ShapeError);
}

namespace {

std::uint16_t free_port() {
  TcpListener l(Endpoint{"127.0.0.1", 0});
  return l.port();
}

}  // namespace

TEST(Deploy, HelperRejectsNonServers) {
  DeployConfig c;
  c.helper = Endpoint{"127.0.0.1", free_port()};
  std::exception_ptr failure;
  std::thread helper([&] {
    try {
      run_helper(c);
    } catch (...) {
      failure = std::current_exception();
    }
  });
  {
    Peer p(connect_tcp(*c.helper), "intruder");
    establish(p, c.hello(Role::image_provider));
    EXPECT_THROW(p.recv(MsgType::cross_resp, 1), ProtocolError);
  }
  helper.join();
  ASSERT_TRUE(failure);
  EXPECT_THROW(std::rethrow_exception(failure), ProtocolError);
}

TEST(Deploy, ServerRejectsWrongPush) {
  DeployConfig c;
  c.server[1] = Endpoint{"127.0.0.1", free_port()};
  c.work = scratch("deploy_wrong");
  std::exception_ptr failure;
  std::thread server([&] {
    try {
      run_server(1, c);
    } catch (...) {
      failure = std::current_exception();
    }
  });
  {
    Peer p(connect_tcp(*c.server[1]), "intruder");
    establish(p, c.hello(Role::image_provider));
    p.send(MsgType::share_push, 1, detail::push_payload("cnn1.w", "x"));
    EXPECT_ANY_THROW(p.recv(MsgType::result_push, 0));
  }
  server.join();
  ASSERT_TRUE(failure);
  EXPECT_THROW(std::rethrow_exception(failure), ProtocolError);
  std::filesystem::remove_all(c.work);
}

TEST(Deploy, FullRunOverTcpThreads) {
  std::mt19937_64 g(8);
  const auto model = models::reference_model(g);
  const auto img = models::random_image({1, 28, 28}, g);
  const auto dir = scratch("deploy_full");
  write_model(dir / "model", model);
  write_tensor(dir / "image.tns", img);
  for (Backend b : {Backend::dealer, Backend::helper}) {
    DeployConfig c;
    c.server[0] = Endpoint{"127.0.0.1", free_port()};
    c.server[1] = Endpoint{"127.0.0.1", free_port()};
    c.helper = Endpoint{"127.0.0.1", free_port()};
    c.backend = b;
    c.seed = 11;
    c.work = dir / "work";
    c.model_dir = dir / "model";
    c.image = dir / "image.tns";
    c.hsplit = 2;
    std::vector<std::thread> roles;
    std::exception_ptr failures[3];
    roles.emplace_back([&] { try { run_helper(c); } catch (...) { failures[0] = std::current_exception(); } });
    roles.emplace_back([&] { try { run_server(1, c); } catch (...) { failures[1] = std::current_exception(); } });
    roles.emplace_back([&] { try { run_server(0, c); } catch (...) { failures[2] = std::current_exception(); } });
    run_model_provider(c);
    const auto label = run_image_provider(c);
    for (auto& t : roles) t.join();
    for (auto& f : failures) EXPECT_FALSE(f);
    EXPECT_EQ(label, oracle_inference(model, img, {}));
  }
  std::filesystem::remove_all(dir);
}
