#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "deepf0/model.hpp"
#include "deepf0/weights_io.hpp"
#include "support/gradcheck.hpp"

using namespace deepf0;
using Catch::Approx;
using testsupport::central_diff;
using testsupport::rel_err;

namespace {

DeepF0Config tiny_config() {
  DeepF0Config c;
  c.frame_length = 64;
  c.channels = 4;
  c.first_kernel = 5;
  c.block_kernel = 5;
  c.dilations = {1, 2, 4, 8};
  c.pool = 16;
  c.bins = 8;
  return c;
}

std::vector<float> random_frame(std::size_t n, Rng& rng) {
  std::vector<float> f(n);
  for (auto& v : f) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return f;
}

std::size_t flattened_size(const ModelParams<float>& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&n](const std::vector<float>& t) { n += t.size(); });
  return n;
}

}  // namespace

TEST_CASE("build is deterministic and matches the config") {
  DeepF0Config cfg;  // defaults
  auto a = build<float>(cfg, 1234);
  auto b = build<float>(cfg, 1234);
  REQUIRE(a.blocks.size() == 4);
  REQUIRE(a.dense.in_dim == 2048);
  REQUIRE(a.dense.out_dim == 360);
  std::vector<const std::vector<float>*> at, bt;
  for_each_tensor(a, [&](const std::vector<float>& t) { at.push_back(&t); });
  for_each_tensor(b, [&](const std::vector<float>& t) { bt.push_back(&t); });
  REQUIRE(at.size() == bt.size());
  for (std::size_t i = 0; i < at.size(); ++i) REQUIRE(*at[i] == *bt[i]);

  auto c = build<float>(cfg, 1235);
  REQUIRE(c.first_conv.direction != a.first_conv.direction);
}

TEST_CASE("param_count: default config and reduction") {
  DeepF0Config cfg;
  const std::size_t n = param_count(cfg);
  REQUIRE(n >= 4'900'000);
  REQUIRE(n <= 5'100'000);
  const double reduction = 100.0 * (22.2e6 - static_cast<double>(n)) / 22.2e6;
  REQUIRE(reduction == Approx(77.4).margin(0.5));
}

TEST_CASE("param_count equals the flattened parameter vector") {
  for (auto cfg : {DeepF0Config{}, tiny_config()}) {
    auto params = build<float>(cfg, 7);
    REQUIRE(param_count(cfg) == flattened_size(params));
  }
}

TEST_CASE("param_count hand-countable minimal config") {
  DeepF0Config c;
  c.frame_length = 16;
  c.channels = 1;
  c.first_kernel = 1;
  c.block_kernel = 1;
  c.dilations = {1};
  c.pool = 16;
  c.bins = 1;
  // first conv 1+1+1, dilated 1+1+1, pointwise 1+1+1, dense 1*1+1
  REQUIRE(param_count(c) == 11);
}

TEST_CASE("param_count with no blocks") {
  DeepF0Config c = tiny_config();
  c.dilations = {};
  // first conv: 4*1*5 + 4 + 4 = 28; dense: (4*4)*8 + 8 = 136
  REQUIRE(param_count(c) == 28 + 136);
}

TEST_CASE("receptive_field") {
  DeepF0Config cfg;
  REQUIRE(receptive_field(cfg) == 1009);
  REQUIRE(receptive_field(cfg) <= cfg.frame_length);

  DeepF0Config ones = cfg;
  ones.first_kernel = 1;
  ones.block_kernel = 1;
  REQUIRE(receptive_field(ones) == 1);

  DeepF0Config one_block = cfg;
  one_block.block_kernel = 2;
  one_block.dilations = {1};
  REQUIRE(receptive_field(one_block) == 65);

  // strictly increasing over nested dilation sets
  std::size_t prev = 0;
  for (auto dil : std::vector<std::vector<std::size_t>>{
           {1}, {1, 2}, {1, 2, 4}, {1, 2, 4, 8}}) {
    DeepF0Config c = cfg;
    c.dilations = dil;
    const std::size_t rf = receptive_field(c);
    REQUIRE(rf > prev);
    prev = rf;
  }
}

TEST_CASE("forward produces bins in (0,1) and is deterministic") {
  auto cfg = tiny_config();
  auto params = build<float>(cfg, 42);
  Rng rng(1);
  auto frame = random_frame(cfg.frame_length, rng);

  auto y1 = forward(params, frame);
  auto y2 = forward(params, frame);
  REQUIRE(y1.size() == cfg.bins);
  for (float v : y1) {
    REQUIRE(v > 0.0f);
    REQUIRE(v < 1.0f);
  }
  REQUIRE(y1 == y2);  // bit-identical

  std::vector<float> short_frame(10, 0.0f);
  REQUIRE_THROWS_AS(forward(params, short_frame), ShapeError);
}

TEST_CASE("residual toggle changes the output") {
  auto cfg = tiny_config();
  auto params = build<float>(cfg, 42);
  Rng rng(2);
  auto frame = random_frame(cfg.frame_length, rng);
  auto with_res = forward(params, frame);

  auto cfg2 = cfg;
  cfg2.use_residual = false;
  auto params2 = params;
  params2.config = cfg2;
  auto without = forward(params2, frame);
  REQUIRE(with_res != without);
}

TEST_CASE("zero frame with zero biases gives a constant output") {
  auto cfg = tiny_config();
  auto params = build<float>(cfg, 3);  // biases start at zero
  std::vector<float> frame(cfg.frame_length, 0.0f);
  auto y = forward(params, frame);
  for (float v : y) REQUIRE(v == Approx(y[0]).margin(1e-7));
}

TEST_CASE("residual identity: gated-off blocks pass ReLU(x) through") {
  auto cfg = tiny_config();
  auto params = build<float>(cfg, 4);
  for (auto& b : params.blocks) {
    std::fill(b.dilated.gain.begin(), b.dilated.gain.end(), 0.0f);
    std::fill(b.dilated.bias.begin(), b.dilated.bias.end(), 0.0f);
    std::fill(b.pointwise.gain.begin(), b.pointwise.gain.end(), 0.0f);
    std::fill(b.pointwise.bias.begin(), b.pointwise.bias.end(), 0.0f);
  }
  Rng rng(5);
  auto frame = random_frame(cfg.frame_length, rng);
  ForwardCache<float> cache;
  forward_cached(params, frame, cache);

  // With F(x) = 0 each block computes ReLU(x).
  FeatureMap<float> expect = cache.first_out;
  relu_inplace(expect);
  REQUIRE(cache.blocks.back().out.data == expect.data);
}

TEST_CASE("causality holds through the block stack") {
  auto cfg = tiny_config();
  auto params = build<float>(cfg, 6);
  Rng rng(7);
  auto frame = random_frame(cfg.frame_length, rng);

  ForwardCache<float> cache;
  forward_cached(params, frame, cache);

  const std::size_t t = 20;
  auto frame2 = frame;
  for (std::size_t s = t + 1; s < frame2.size(); ++s) {
    frame2[s] += static_cast<float>(rng.uniform(0.5, 2.0));
  }
  ForwardCache<float> cache2;
  forward_cached(params, frame2, cache2);

  const auto& last1 = cache.blocks.back().out;
  const auto& last2 = cache2.blocks.back().out;
  for (std::size_t c = 0; c < last1.channels; ++c) {
    for (std::size_t s = 0; s <= t; ++s) {
      REQUIRE(last1.at(c, s) == last2.at(c, s));
    }
  }
}

TEST_CASE("end-to-end gradients match finite differences (shrunken config)") {
  auto cfg = tiny_config();
  auto params = build<double>(cfg, 11);
  Rng rng(12);
  // Fresh models have all-zero biases, which parks ReLU pre-activations
  // exactly on the kink where central differences are undefined. Nudge the
  // biases off zero before checking.
  params.first_conv.bias[0] = 0.01;
  for (auto& b : params.blocks) {
    for (auto& v : b.dilated.bias) v = rng.uniform(-0.05, 0.05);
    for (auto& v : b.pointwise.bias) v = rng.uniform(-0.05, 0.05);
  }
  for (auto& v : params.dense.bias) v = rng.uniform(-0.05, 0.05);
  std::vector<double> frame(cfg.frame_length);
  for (auto& v : frame) v = rng.uniform(-1.0, 1.0);
  std::vector<double> target(cfg.bins);
  for (auto& v : target) v = rng.uniform(0.0, 1.0);

  ForwardCache<double> cache;
  auto probs = forward_cached(params, frame, cache);
  ModelGrads<double> grads(params);
  backward(params, cache, bce_loss_grad(probs, target), grads);

  auto loss = [&]() { return bce_loss(forward(params, frame), target); };

  std::vector<std::vector<double>*> ptensors;
  for_each_tensor(params,
                  [&](std::vector<double>& t) { ptensors.push_back(&t); });
  std::vector<const std::vector<double>*> gtensors;
  for_each_tensor(grads, [&](const std::vector<double>& t) {
    gtensors.push_back(&t);
  });

  // Spot-check a slice of every tensor (the acceptance suite sweeps all).
  Rng pick(13);
  double worst = 0.0;
  for (std::size_t ti = 0; ti < ptensors.size(); ++ti) {
    auto& tensor = *ptensors[ti];
    const std::size_t checks = std::min<std::size_t>(tensor.size(), 6);
    for (std::size_t c = 0; c < checks; ++c) {
      const std::size_t i = pick.below(tensor.size());
      const double fd = central_diff(loss, tensor, i);
      worst = std::max(worst, rel_err((*gtensors[ti])[i], fd));
    }
  }
  REQUIRE(worst < 1e-3);
}

TEST_CASE("dropout is applied in training mode only and is seeded") {
  auto cfg = tiny_config();
  cfg.use_dropout = true;
  cfg.dropout_rate = 0.5;
  auto params = build<float>(cfg, 21);
  Rng frame_rng(22);
  auto frame = random_frame(cfg.frame_length, frame_rng);

  ForwardCache<float> c1, c2, c3;
  Rng r1(99), r2(99), r3(100);
  auto y1 = forward_cached(params, frame, c1, &r1);
  auto y2 = forward_cached(params, frame, c2, &r2);
  auto y3 = forward_cached(params, frame, c3, &r3);
  REQUIRE(y1 == y2);  // same mask stream
  REQUIRE(y1 != y3);  // different mask stream

  auto inference = forward(params, frame);
  REQUIRE(inference != y1);
  bool saw_zero = false;
  for (float m : c1.blocks[0].dropout_mask) {
    if (m == 0.0f) saw_zero = true;
  }
  REQUIRE(saw_zero);
}

TEST_CASE("weights round-trip bit-exactly") {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "deepf0_test_weights.df0w";

  auto cfg = tiny_config();
  auto params = build<float>(cfg, 31);
  save_weights(params, path.string());
  auto loaded = load_weights(path.string());

  REQUIRE(loaded.config.channels == cfg.channels);
  REQUIRE(loaded.config.dilations == cfg.dilations);
  std::vector<const std::vector<float>*> a, b;
  for_each_tensor(params, [&](const std::vector<float>& t) { a.push_back(&t); });
  for_each_tensor(loaded, [&](const std::vector<float>& t) { b.push_back(&t); });
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(*a[i] == *b[i]);

  fs::remove(path);
}

TEST_CASE("weight loading rejects malformed files") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path();
  const auto path = dir / "deepf0_test_weights2.df0w";

  auto cfg = tiny_config();
  auto params = build<float>(cfg, 32);
  save_weights(params, path.string());

  SECTION("truncated payload") {
    std::ifstream is(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                            std::istreambuf_iterator<char>());
    is.close();
    bytes.resize(bytes.size() - 17);
    const auto trunc = dir / "deepf0_test_trunc.df0w";
    std::ofstream os(trunc, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.close();
    REQUIRE_THROWS_AS(load_weights(trunc.string()), FormatError);
    fs::remove(trunc);
  }

  SECTION("bad magic") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
    f.close();
    REQUIRE_THROWS_AS(load_weights(path.string()), FormatError);
  }

  SECTION("shape table disagrees with the config block") {
    // The dense row count lives near the end of the shape table; flip a
    // dilation count in the config block instead, which desyncs the table.
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    // magic(4) + version(4) + 6 u32 + flags(4) + rate(4) = offset 40 for
    // the dilation count
    f.seekp(40);
    const std::uint32_t wrong = 2;
    unsigned char b[4] = {wrong & 0xff, 0, 0, 0};
    f.write(reinterpret_cast<char*>(b), 4);
    f.close();
    REQUIRE_THROWS_AS(load_weights(path.string()), FormatError);
  }

  fs::remove(path);
}
